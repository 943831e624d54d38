import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh

from twpa3wm.dispersion import (
    Band,
    LcOscillator,
    Modulated,
    Uniform,
    UniformWithCJ,
    UpConversionRegion,
    band_structure,
    classify_up_conversion,
    classify_up_conversion_model,
    kappa_of_omega,
    model_from_dict,
    model_to_dict,
    no_upconversion_bandwidth,
    omega_of_kappa,
    phase_mismatch,
    sweet_spot_lc,
    sweet_spot_modulated,
    upconversion_threshold,
    write_band_csv,
)
from twpa3wm.errors import AboveCutoff, BandUnavailable, InGap, NoSweetSpot


def ring_frequencies(n_nodes, springs, masses=None):
    """Normal-mode frequencies of a periodic mass-spring ring (independent of the closed forms)."""
    k = np.asarray(springs, float)
    m = np.ones(n_nodes) if masses is None else np.asarray(masses, float)
    K = np.zeros((n_nodes, n_nodes))
    for j in range(n_nodes):
        a, b = j, (j + 1) % n_nodes
        K[a, a] += k[j]
        K[b, b] += k[j]
        K[a, b] -= k[j]
        K[b, a] -= k[j]
    minv = 1 / np.sqrt(m)
    w2 = np.linalg.eigvalsh(minv[:, None] * K * minv[None, :])
    return np.sqrt(np.clip(w2, 0, None))


class TestUniform:
    def test_ring_spectrum(self):
        n = 40
        w_ring = ring_frequencies(n, np.full(n, 0.7**2))
        kap = 2 * np.pi * np.arange(n) / n
        w_model = Uniform(0.7).omega(np.minimum(kap, 2 * np.pi - kap))
        assert np.sort(w_ring) == pytest.approx(np.sort(w_model), abs=1e-7)

    @given(st.floats(1e-6, 1.999))
    def test_round_trip(self, w):
        m = Uniform(1.0)
        assert m.omega(m.kappa(w)) == pytest.approx(w, rel=1e-12)

    def test_above_cutoff(self):
        with pytest.raises(AboveCutoff):
            kappa_of_omega(Uniform(1.0), 2.1)

    def test_no_upper_band(self):
        with pytest.raises(BandUnavailable):
            omega_of_kappa(Uniform(1.0), 1.0, Band.UPPER)

    def test_degenerate_mismatch_sign(self):
        # concave dispersion: the pump wavevector exceeds twice the half-frequency one
        assert phase_mismatch(Uniform(1.0), 1.0, 0.0) > 0


class TestUniformWithCJ:
    def test_reduces_to_uniform(self):
        k = np.linspace(0, np.pi, 11)
        assert UniformWithCJ(1.0, 0.0).omega(k) == pytest.approx(Uniform(1.0).omega(k))

    def test_ring_spectrum_with_junction_capacitance(self):
        # generalised eigenproblem K phi = w^2 (C + CJ K) phi on a ring, C = 1, 1/L = 1
        n, r = 30, 0.12
        K = 2 * np.eye(n) - np.roll(np.eye(n), 1, 0) - np.roll(np.eye(n), -1, 0)
        w_ring = np.sqrt(np.clip(eigh(K, np.eye(n) + r * K, eigvals_only=True), 0, None))
        kap = 2 * np.pi * np.arange(n) / n
        w_model = UniformWithCJ(1.0, r).omega(np.minimum(kap, 2 * np.pi - kap))
        assert w_ring == pytest.approx(np.sort(w_model), abs=1e-7)

    @given(st.floats(0.0, 0.3), st.floats(0.01, 0.99))
    def test_round_trip(self, r, frac):
        m = UniformWithCJ(1.0, r)
        w = frac * m.cutoff
        assert m.omega(m.kappa(w)) == pytest.approx(w, rel=1e-10)


class TestLcOscillator:
    @given(st.floats(0.05, math.pi))
    @settings(max_examples=50)
    def test_bands_are_roots_of_the_secular_quadratic(self, k):
        m = LcOscillator(1.0, 1.5, 0.95)
        s = 4 * math.sin(k / 2) ** 2
        roots = np.sort(np.roots([m.nu, -(m.omega1**2 + s), m.omega1**2 * s]).real)
        got = np.array([m.omega(k, Band.LOWER), m.omega(k, Band.UPPER)]) ** 2
        assert got == pytest.approx(roots, rel=1e-10)

    def test_gap(self):
        m = LcOscillator(1.0, 1.5, 0.95)
        lo, hi = m.gaps[0]
        with pytest.raises(InGap):
            m.kappa(0.5 * (lo + hi))
        assert hi == pytest.approx(1.5 / math.sqrt(0.95))

    def test_invalid_nu(self):
        with pytest.raises(ValueError):
            LcOscillator(1.0, 1.5, 1.5)


class TestModulated:
    def test_diatomic_ring(self):
        w1, w2, cells = 1.0, 1.25, 24
        springs = np.tile([w1**2, w2**2], cells)
        w_ring = np.sort(ring_frequencies(2 * cells, springs))
        m = Modulated(w1, w2)
        q = 2 * np.pi * np.arange(cells) / cells  # per supercell
        kap = np.minimum(q, 2 * np.pi - q) / 2
        w_model = np.sort(np.concatenate([m.omega(kap, Band.LOWER), m.omega(kap, Band.UPPER)]))
        assert w_ring == pytest.approx(w_model, abs=1e-7)

    def test_extended_zone_labels_agree(self):
        m = Modulated(1.0, 1.25)
        k = 0.4
        assert m.omega(math.pi - k, Band.UPPER) == pytest.approx(m.omega(k, Band.UPPER))


class TestSweetSpots:
    def test_lc(self):
        wp = sweet_spot_lc(1.5, 0.95)
        assert wp == pytest.approx(1.77, abs=0.01)
        m = LcOscillator(1.0, 1.5, 0.95)
        assert abs(phase_mismatch(m, wp, 0.0)) < 1e-8

    def test_lc_no_spot(self):
        with pytest.raises(NoSweetSpot):
            sweet_spot_lc(1.5, 1.0)

    @pytest.mark.parametrize("w2", [1.25, 1.5])
    def test_modulated_back_substitution(self, w2):
        spot = sweet_spot_modulated(1.0, w2)
        m = Modulated(1.0, w2)
        up = float(m.omega(spot.kappa_p, Band.UPPER))
        low = float(m.omega(spot.kappa_p / 2, Band.LOWER))
        assert up == pytest.approx(spot.omega_p, abs=1e-10)
        assert low == pytest.approx(spot.omega_p / 2, abs=1e-10)

    @pytest.mark.parametrize("w2", [1.0, 1.1])
    def test_modulated_without_spot(self, w2):
        # the closed form puts the pump below the zone boundary: no phase-matched upper-band pump
        with pytest.raises(NoSweetSpot):
            sweet_spot_modulated(1.0, w2)


class TestUpConversion:
    def test_threshold(self):
        assert upconversion_threshold() == pytest.approx(4 / 3)

    @pytest.mark.parametrize(
        "wp, delta, region",
        [
            (0.9, 0.0, UpConversionRegion.ALL_CONVERTIBLE),
            (1.2, 0.0, UpConversionRegion.SIGNAL_IDLER_CONVERTIBLE),
            (1.5, 0.0, UpConversionRegion.ALL_BLOCKED),
            (1.5, 0.9, UpConversionRegion.ONE_OF_SIGNAL_IDLER_CONVERTIBLE),
        ],
    )
    def test_regions(self, wp, delta, region):
        assert classify_up_conversion(wp, delta) is region

    @given(st.floats(0.05, 1.95), st.floats(-0.95, 0.95))
    def test_model_classification_matches_uniform(self, wp, delta):
        assert classify_up_conversion_model(Uniform(1.0), wp, delta) is classify_up_conversion(wp, delta)

    def test_bandwidth(self):
        assert no_upconversion_bandwidth(1.2) == 0.0
        wp = 1.6
        d = no_upconversion_bandwidth(wp)
        assert classify_up_conversion(wp, 0.999 * d) is UpConversionRegion.ALL_BLOCKED
        assert classify_up_conversion(wp, 1.001 * d) is not UpConversionRegion.ALL_BLOCKED


class TestSerialisation:
    @pytest.mark.parametrize(
        "model", [Uniform(1.2), UniformWithCJ(1.0, 0.1), LcOscillator(1.0, 1.5, 0.9), Modulated(1.0, 1.3)]
    )
    def test_dict_round_trip(self, model):
        assert model_from_dict(model_to_dict(model)) == model

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            model_from_dict({"model": "graphene"})

    def test_band_csv(self, tmp_path):
        p = write_band_csv(LcOscillator(), tmp_path / "b.csv", n=11)
        lines = p.read_text().splitlines()
        assert lines[0] == "kappa,omega_lower,omega_upper"
        assert len(lines) == 12
        t = band_structure(Uniform(), 5)
        assert np.all(np.isnan(t["omega_upper"]))
