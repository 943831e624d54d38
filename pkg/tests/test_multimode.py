import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from twpa3wm.device_models import CellCoefficients
from twpa3wm.dispersion import Uniform
from twpa3wm.errors import HarmonicAboveCutoff
from twpa3wm.multimode import (
    RTOL,
    GainSurface,
    ScaledPumpSystem,
    critical_harmonics,
    gain_threshold_mu,
    integrate_4wm_third_harmonic,
    integrate_pump_harmonics,
    integrate_pump_harmonics_physical,
    integrate_signal_idler,
    scaled_parameters,
    single_mode_growth_rate,
)


def loop_pump_rhs(M, mu):
    """Direct double-loop evaluation of the scaled pump ladder."""

    def rhs(xi, a):
        da = np.zeros(M, complex)
        for m in range(1, M + 1):
            s = 0j
            for n in range(m + 1, M + 1):
                s += m * a[n - 1] * np.conj(a[n - m - 1]) * np.exp(0.5j * mu * xi * n * m * (n - m))
            for n in range(1, m):
                s -= m / 2 * a[n - 1] * a[m - n - 1] * np.exp(-0.5j * mu * xi * m * n * (m - n))
            da[m - 1] = s
        return da

    return rhs


class TestPumpLadder:
    def test_second_harmonic_closed_form(self):
        lad = integrate_pump_harmonics(ScaledPumpSystem(0.0, 2, 6.0))
        assert lad.pump[0].real == pytest.approx(1 / np.cosh(lad.xi), abs=1e-8)
        assert lad.pump[1].real == pytest.approx(-np.tanh(lad.xi), abs=1e-8)

    @pytest.mark.parametrize("mu, M", [(2.0, 4), (0.5, 6), (8.0, 3)])
    def test_against_loop_implementation(self, mu, M):
        lad = integrate_pump_harmonics(ScaledPumpSystem(mu, M, 8.0), n_samples=41)
        y0 = np.zeros(M, complex)
        y0[0] = 1
        ref = solve_ivp(loop_pump_rhs(M, mu), (0, 8.0), y0, t_eval=lad.xi, rtol=1e-11, atol=1e-13)
        assert np.max(np.abs(lad.pump - ref.y)) < 1e-6

    @given(st.floats(0.0, 12.0), st.integers(1, 6))
    @settings(max_examples=15, deadline=None)
    def test_norm_conserved(self, mu, M):
        lad = integrate_pump_harmonics(ScaledPumpSystem(mu, M, 10.0), n_samples=101)
        assert np.max(np.abs(lad.pump_norm() - 1)) < 10 * RTOL * 10

    def test_critical_harmonics(self):
        assert critical_harmonics(8.0) == 3
        assert critical_harmonics(2.0) == 5

    def test_dispersion_suppresses_conversion(self):
        strong = integrate_pump_harmonics(ScaledPumpSystem(8.0, 3, 10.0)).main_tone_power.min()
        weak = integrate_pump_harmonics(ScaledPumpSystem(1.0, 3, 10.0)).main_tone_power.min()
        assert strong > weak

    def test_csv(self, tmp_path):
        lad = integrate_pump_harmonics(ScaledPumpSystem(2.0, 2, 1.0), n_samples=5)
        lines = lad.write_csv(tmp_path / "p.csv").read_text().splitlines()
        assert lines[0] == "xi,re_a1,im_a1,re_a2,im_a2"
        assert len(lines) == 6


class TestFourWaveMixing:
    @pytest.mark.parametrize("mu", [0.0, 3.0])
    def test_conservation(self, mu):
        lad = integrate_4wm_third_harmonic(mu, 20.0)
        inv = np.abs(lad.pump[0]) ** 2 + 3 * np.abs(lad.pump[1]) ** 2
        assert np.max(np.abs(inv - 1)) < 10 * RTOL * 10

    def test_negative_mu(self):
        with pytest.raises(ValueError):
            integrate_4wm_third_harmonic(-1.0, 1.0)


class TestSignalLadder:
    @pytest.mark.parametrize("mu, delta", [(0.0, 0.0), (4.0, 0.3), (6.0, 0.0)])
    def test_single_mode_rate_from_linear_system(self, mu, delta):
        # M = 1: constant pump, signal and conjugate idler obey a 2x2 linear system
        q, qo = (1 + delta) / 2, (1 - delta) / 2
        kap = mu * (1 - delta**2) / 8
        lam = np.linalg.eigvals(np.array([[-0.5j * kap, q], [qo, 0.5j * kap]]))
        assert single_mode_growth_rate(mu, delta) == pytest.approx(max(lam.real), abs=1e-12)

    def test_single_mode_integration_matches_rate(self):
        mu, delta = 4.0, 0.3
        g = single_mode_growth_rate(mu, delta)
        lad = integrate_signal_idler(mu, delta, 1, 60.0)
        i0, i1 = np.searchsorted(lad.xi, [40.0, 60.0])
        slope = (np.log(np.abs(lad.signal[0, i1 - 1])) - np.log(np.abs(lad.signal[0, i0]))) / (
            lad.xi[i1 - 1] - lad.xi[i0])
        assert slope == pytest.approx(g, abs=1e-4)

    def test_threshold(self):
        assert gain_threshold_mu(0.0) == 8.0
        assert single_mode_growth_rate(8.1, 0.0) == 0.0

    @given(st.floats(0.0, 10.0), st.integers(1, 4), st.floats(-0.8, 0.8))
    @settings(max_examples=12, deadline=None)
    def test_manley_rowe(self, mu, M, delta):
        lad = integrate_signal_idler(mu, delta, M, 10.0, n_samples=101)
        mr = lad.manley_rowe() / lad.seed**2
        assert np.max(np.abs(mr - mr[0])) < 1e-6 * max(1.0, np.max(lad.gain()))

    def test_gain_surface_matches_single_runs(self):
        deltas = [0.0, 0.4]
        surf = GainSurface(3.0, deltas, 3, 12.0)
        xi = np.array([4.0, 12.0])
        for j, d in enumerate(deltas):
            lad = integrate_signal_idler(3.0, d, 3, 12.0)
            ref = np.interp(xi, lad.xi, lad.gain())
            assert surf.gain(xi)[:, j] == pytest.approx(ref, rel=1e-5)

    def test_gain_surface_range(self):
        surf = GainSurface(3.0, [0.0], 2, 5.0)
        with pytest.raises(ValueError):
            surf.gain(6.0)

    @pytest.mark.parametrize("kwargs", [dict(delta=1.0), dict(M=0), dict(mu=-1.0), dict(seed_signal=0.0)])
    def test_invalid_arguments(self, kwargs):
        args = dict(mu=1.0, delta=0.0, M=2, xi_max=1.0, seed_signal=1e-6)
        args.update(kwargs)
        with pytest.raises(ValueError):
            integrate_signal_idler(**args)

    def test_gain_csv(self, tmp_path):
        lad = integrate_signal_idler(1.0, 0.0, 2, 2.0, n_samples=3)
        lines = lad.write_gain_csv(tmp_path / "g.csv").read_text().splitlines()
        assert lines[0] == "xi,G_dB"
        assert float(lines[1].split(",")[1]) == pytest.approx(0.0, abs=1e-12)


class TestPhysicalLadder:
    def test_low_frequency_limit_matches_scaled(self):
        # weak dispersion: the unscaled solver maps onto the scaled one
        w, A = 0.05, 0.02
        c = CellCoefficients(0.0, 1.0, 1.0)
        kp = 2 * math.asin(w / 2)
        eps = A * kp
        mu, xi_per_cell = scaled_parameters(eps, kp)
        n = 4.0 / xi_per_cell
        phys = integrate_pump_harmonics_physical(c, Uniform(1.0), w, A, 3, n, n_samples=3)
        scal = integrate_pump_harmonics(ScaledPumpSystem(mu, 3, 4.0), n_samples=3)
        assert abs(phys.pump[0, -1]) / A == pytest.approx(abs(scal.pump[0, -1]), rel=2e-2)

    def test_harmonic_above_cutoff_warns(self):
        c = CellCoefficients(0.0, 1.0, 1.0)
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            lad = integrate_pump_harmonics_physical(c, Uniform(1.0), 0.8, 0.1, 4, 10.0, n_samples=3)
        assert any(issubclass(r.category, HarmonicAboveCutoff) for r in rec)
        assert lad.pump.shape[0] == 2
