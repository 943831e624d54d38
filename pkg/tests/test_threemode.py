import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twpa3wm.dispersion import LcOscillator, Uniform, kappa_of_omega, sweet_spot_lc
from twpa3wm.errors import AboveCutoff
from twpa3wm.threemode import (
    PumpDrive,
    boundary_power_gain,
    delta_max,
    determinant,
    epsilon_at_cutoff,
    gain_approx,
    gain_band,
    gain_cutoff_frequency,
    gain_exact,
    gain_vs_pump,
    min_pump_strength_estimate,
    power_gain_db,
    pump_window,
    solve_determinant,
)

U = Uniform(1.0)


def coupled_matrix_det(kt, kp, ks, ki, c):
    """2x2 signal / conjugate-idler system obtained by inserting plane waves into the chain equation.

    Signal ``a exp(i qs n)``, conjugate idler ``b exp(-i qi n)`` with ``qs + qi = kp``; pump
    ``c/chi3 * cos(kp n - wp t)``. Independent of the sine-product form used by the solver.
    """
    e = cmath.exp
    qs = (kp + kt) / 2
    qi = (kp - kt) / 2
    d_s = 4 * cmath.sin(qs / 2) ** 2 - 4 * math.sin(ks / 2) ** 2
    d_i = 4 * cmath.sin(qi / 2) ** 2 - 4 * math.sin(ki / 2) ** 2
    x_s = (c / 2) * (1 - e(-1j * kp)) * (1 - e(1j * qi)) * (e(1j * qs) - 1)
    x_i = (c / 2) * (1 - e(1j * kp)) * (1 - e(-1j * qs)) * (e(-1j * qi) - 1)
    return d_s * d_i - x_s * x_i


def oracle_growth(kp, ks, ki, c):
    """Largest Im(kt)/2 among roots of the coupled matrix, from a grid of starting points."""
    best = 0.0
    for re in np.linspace(ks - ki - 0.6, ks - ki + 0.6, 7):
        for im in (0.02, 0.1, 0.3):
            try:
                z = complex(mpmath.findroot(lambda t: coupled_matrix_det(complex(t), kp, ks, ki, c),
                                            mpmath.mpc(re, im)))
            except (ValueError, ZeroDivisionError):
                continue
            if abs(coupled_matrix_det(z, kp, ks, ki, c)) < 1e-12 and abs(z.real - (ks - ki)) < math.pi:
                best = max(best, z.imag / 2)
    return best


class TestDeterminant:
    @pytest.mark.parametrize(
        "wp, delta, eps",
        [(1.31, 0.0, 0.4), (0.67, 0.0, 0.1), (1.0, 0.2, 0.3), (1.5, -0.1, 0.35), (0.5, 0.4, 0.2)],
    )
    def test_growth_matches_coupled_matrix(self, wp, delta, eps):
        kp = kappa_of_omega(U, wp)
        ks = kappa_of_omega(U, (1 + delta) * wp / 2)
        ki = kappa_of_omega(U, (1 - delta) * wp / 2)
        c = eps / wp
        sol = solve_determinant(kp, ks, ki, c)
        assert abs(coupled_matrix_det(sol.kappa_tilde, kp, ks, ki, c)) < 1e-9
        assert sol.g == pytest.approx(oracle_growth(kp, ks, ki, c), abs=1e-8)

    def test_residual_reported(self):
        sol = gain_exact(U, 1.31, 0.0, 0.4)
        assert sol.residual < 1e-10
        assert abs(determinant(sol.kappa_tilde, sol.kappa_p, sol.kappa_s, sol.kappa_i, 0.4 / 1.31)) < 1e-10

    def test_no_pump_no_gain(self):
        sol = solve_determinant(1.0, 0.5, 0.5, 0.0)
        assert sol.g == 0.0 and not sol.exponential

    def test_invalid_wavevector(self):
        with pytest.raises(ValueError):
            solve_determinant(4.0, 1.0, 1.0, 0.1)
        with pytest.raises(ValueError):
            solve_determinant(1.0, 0.5, 0.5, -0.1)

    @given(st.floats(0.05, 1.9), st.floats(-0.9, 0.9), st.floats(0.01, 0.5))
    @settings(max_examples=40, deadline=None)
    def test_detuning_symmetry(self, wp, delta, eps):
        a = gain_exact(U, wp, delta, eps).g
        b = gain_exact(U, wp, -delta, eps).g
        assert a >= 0
        assert a == pytest.approx(b, abs=1e-9)


class TestPumpConvention:
    def test_frequency_convention(self):
        assert PumpDrive(1.3, 0.4).chi3_amplitude(U) == pytest.approx(0.4 / 1.3)

    def test_wavevector_convention(self):
        kp = kappa_of_omega(U, 1.3)
        c = PumpDrive(1.3, 0.4, "wavevector").chi3_amplitude(U, kp)
        assert c == pytest.approx(0.4 / (2 * math.sin(kp / 2)))

    def test_conventions_agree_on_uniform_chain(self):
        # on the uniform chain omega = 2 sin(kappa/2), so both forms coincide
        a = gain_exact(U, 1.1, 0.1, 0.3, "frequency").g
        b = gain_exact(U, 1.1, 0.1, 0.3, "wavevector").g
        assert a == pytest.approx(b, rel=1e-12)

    def test_unknown_convention(self):
        with pytest.raises(ValueError):
            PumpDrive(1.0, 0.1, "amplitude")


class TestUniformGain:
    def _peak(self, eps):
        grid = np.linspace(0.3, 1.95, 331)
        g = gain_vs_pump(U, grid, eps)
        i = int(np.argmax(g))
        return grid[i], g[i]

    def test_peak_strong_pump(self):
        wp, g = self._peak(0.4)
        assert g == pytest.approx(0.06, abs=0.005)
        assert wp == pytest.approx(1.31, abs=0.03)

    def test_peak_weak_pump(self):
        wp, _ = self._peak(0.1)
        assert wp == pytest.approx(0.67, abs=0.03)

    def test_power_gain(self):
        assert power_gain_db(0.06, 50) == pytest.approx(26.0, abs=0.5)
        assert power_gain_db(0.06, 50) == pytest.approx(10 * math.log10(math.exp(2 * 0.06 * 50)))

    @pytest.mark.parametrize("wp, delta", [(0.5, 0.0), (0.8, 0.3), (1.2, 0.1)])
    def test_small_pump_approximation(self, wp, delta):
        exact = gain_exact(U, wp, delta, 0.05).g
        approx = gain_approx(U, wp, delta, 0.05)
        assert approx == pytest.approx(exact, rel=0.05, abs=1e-4)

    def test_above_cutoff(self):
        with pytest.raises(AboveCutoff):
            gain_exact(U, 2.05, 0.0, 0.2)


class TestCutoff:
    def test_cutoff_monotone_in_pump(self):
        w = [gain_cutoff_frequency(e) for e in (0.1, 0.2, 0.3)]
        assert w[0] < w[1] < w[2]

    def test_cutoff_is_gain_edge(self):
        w = gain_cutoff_frequency(0.3)
        assert gain_exact(U, w - 1e-3, 0.0, 0.3).g > 0
        assert gain_exact(U, w + 1e-3, 0.0, 0.3).g == 0

    def test_threshold_crossing(self):
        eps = epsilon_at_cutoff(4 / 3)
        assert gain_cutoff_frequency(eps) == pytest.approx(4 / 3, abs=1e-6)

    def test_estimate_internal_consistency(self):
        est = min_pump_strength_estimate()
        assert est.mismatch == pytest.approx(est.kappa_p - 2 * est.kappa_s, abs=1e-12)
        assert 2 * math.sin(est.kappa_p / 2) == pytest.approx(4 / 3, abs=1e-9)


class TestBoundaryGain:
    def test_unity_without_pump_coupling(self):
        kp, ks, ki = (kappa_of_omega(U, w) for w in (1.0, 0.55, 0.45))
        assert boundary_power_gain(kp, ks, ki, 1e-9, 100) == pytest.approx(1.0, abs=1e-6)

    def test_asymptotic_slope(self):
        wp, d, eps = 1.0, 0.1, 0.3
        kp, ks, ki = (kappa_of_omega(U, w) for w in (wp, (1 + d) * wp / 2, (1 - d) * wp / 2))
        g = solve_determinant(kp, ks, ki, eps / wp).g
        a = 10 * math.log10(boundary_power_gain(kp, ks, ki, eps / wp, 400))
        b = 10 * math.log10(boundary_power_gain(kp, ks, ki, eps / wp, 600))
        assert (b - a) / 200 == pytest.approx(20 * g * math.log10(math.e), rel=1e-3)


class TestTwoBand:
    LC = LcOscillator(1.0, 1.5, 0.95)

    def test_sweet_spot_gain(self):
        wp = sweet_spot_lc(1.5, 0.95)
        sol = gain_exact(self.LC, wp, 0.0, 0.06)
        assert sol.g == pytest.approx(0.014, abs=0.002)
        assert sol.power_gain_db(200) == pytest.approx(24, abs=1)
        assert abs(sol.mismatch) < 1e-8

    @pytest.mark.parametrize("eps, expected", [(0.02, 0.14), (0.04, 0.19), (0.06, 0.23)])
    def test_bandwidth(self, eps, expected):
        wp = sweet_spot_lc(1.5, 0.95)
        assert delta_max(self.LC, wp, eps) == pytest.approx(expected, rel=0.15)

    def test_gain_band_flags(self):
        wp = sweet_spot_lc(1.5, 0.95)
        tr = gain_band(self.LC, wp, 0.06, 200, np.linspace(-0.99, 0.99, 45))
        assert "ok" in tr.flags
        assert set(tr.flags) <= {"ok", "gap", "above_cutoff"}
        lo, hi = tr.gain_interval()
        assert lo == pytest.approx(-hi)
        assert tr.bandwidth() == hi

    def test_pump_window_contains_sweet_spot(self):
        wp = sweet_spot_lc(1.5, 0.95)
        lo, hi = pump_window(self.LC, wp, 0.06)
        assert lo < wp < hi

    def test_gain_band_csv(self, tmp_path):
        tr = gain_band(U, 1.0, 0.3, 50, np.linspace(-0.5, 0.5, 5))
        lines = tr.write_csv(tmp_path / "g.csv").read_text().splitlines()
        assert lines[0] == "delta,omega_s,g,G_dB"
        assert len(lines) == 6
