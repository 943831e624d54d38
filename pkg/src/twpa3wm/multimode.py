"""Coupled-mode ladders for pump harmonics and up-converted signal/idler modes.

Scaled pump harmonics (3WM), with ``d(m, n) = m n (m - n) / 2``::

    a_m' = m sum_{n>m} a_n conj(a_{n-m}) exp(i mu xi d(n, m))
         - m/2 sum_{n<m} a_n a_{m-n} exp(-i mu xi d(m, n))

Signal modes ``a_{s,m}`` at ``omega_s + m omega_p`` and idler modes
``a_{i,m}`` at ``omega_i + m omega_p`` (``m = 0 .. M-1``) are driven linearly
by the pump ladder. Every ladder is integrated jointly with its pump as one
complex state vector; right-hand sides are assembled from flat term lists.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .device_models import CellCoefficients
from .dispersion import DispersionModel, kappa_of_omega
from .errors import AboveCutoff, HarmonicAboveCutoff, InGap, StepFailure

RTOL = 1e-9
ATOL = 1e-12
N_SAMPLES = 1000


@dataclass(frozen=True)
class ScaledPumpSystem:
    mu: float
    M: int
    xi_max: float
    rtol: float = RTOL
    atol: float = ATOL

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError("mu must be non-negative")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        if not self.xi_max > 0:
            raise ValueError("xi_max must be positive")


@dataclass
class ModeLadder:
    """Trajectories on a common grid; rows are harmonic indices.

    ``pump[m-1]`` is harmonic ``m``; ``signal[m]`` and ``idler[m]`` are the
    modes up-converted by ``m`` pump quanta.
    """

    xi: np.ndarray
    pump: np.ndarray
    signal: np.ndarray | None = None
    idler: np.ndarray | None = None
    delta: float | None = None
    mu: float | None = None
    seed: float | None = None

    @property
    def main_tone_power(self) -> np.ndarray:
        return np.abs(self.pump[0]) ** 2

    def pump_norm(self, weights=None) -> np.ndarray:
        p = np.abs(self.pump) ** 2
        if weights is None:
            return p.sum(axis=0)
        return (np.asarray(weights, float)[:, None] * p).sum(axis=0)

    def manley_rowe(self) -> np.ndarray:
        """``sum |a_s|^2/(m+q) - sum |a_i|^2/(m+1-q)`` with ``q = (1+delta)/2``."""
        if self.signal is None:
            raise ValueError("no signal ladder")
        m = np.arange(self.signal.shape[0])[:, None]
        q = (1 + self.delta) / 2
        return (np.abs(self.signal) ** 2 / (m + q)).sum(axis=0) - (np.abs(self.idler) ** 2 / (m + 1 - q)).sum(axis=0)

    def gain(self) -> np.ndarray:
        """Linear signal power gain ``|a_{s,0}(xi) / a_{s,0}(0)|^2``."""
        if self.signal is None:
            raise ValueError("no signal ladder")
        return np.abs(self.signal[0] / self.signal[0, 0]) ** 2

    def gain_db(self) -> np.ndarray:
        return 10 * np.log10(self.gain())

    def write_csv(self, path) -> Path:
        path = Path(path)
        rows = [("pump", j + 1, self.pump[j]) for j in range(self.pump.shape[0])]
        if self.signal is not None:
            rows += [("s", j, self.signal[j]) for j in range(self.signal.shape[0])]
            rows += [("i", j, self.idler[j]) for j in range(self.idler.shape[0])]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            header = ["xi"]
            for name, j, _ in rows:
                tag = f"a{j}" if name == "pump" else f"a_{name}{j}"
                header += [f"re_{tag}", f"im_{tag}"]
            w.writerow(header)
            for k, x in enumerate(self.xi):
                line = [repr(float(x))]
                for _, _, traj in rows:
                    line += [repr(float(traj[k].real)), repr(float(traj[k].imag))]
                w.writerow(line)
        return path

    def write_gain_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "G_dB"])
            for x, g in zip(self.xi, self.gain_db()):
                w.writerow([repr(float(x)), repr(float(g))])
        return path


class _Terms:
    """Quadratic terms ``coef * A * B * exp(i phase * xi)`` summed into ``target``."""

    def __init__(self):
        self.rows = []

    def add(self, target, coef, ia, conj_a, ib, conj_b, phase):
        self.rows.append((target, coef, ia, conj_a, ib, conj_b, phase))

    def compile(self, size, mu):
        if not self.rows:
            return lambda xi, y: np.zeros(size, complex), 0.0
        cols = list(zip(*self.rows))
        tgt = np.array(cols[0], int)
        coef = np.array(cols[1], float)
        ia, ca = np.array(cols[2], int), np.array(cols[3], bool)
        ib, cb = np.array(cols[4], int), np.array(cols[5], bool)
        ph = mu * np.array(cols[6], float)

        def rhs(xi, y):
            a = np.where(ca, np.conj(y[ia]), y[ia])
            b = np.where(cb, np.conj(y[ib]), y[ib])
            v = coef * a * b * np.exp(1j * ph * xi)
            return np.bincount(tgt, v.real, size) + 1j * np.bincount(tgt, v.imag, size)

        return rhs, float(np.max(np.abs(ph)))


def _d(m, n):
    return 0.5 * m * n * (m - n)


def _pump_terms(terms, M, offset=0):
    for m in range(1, M + 1):
        for n in range(m + 1, M + 1):
            terms.add(offset + m - 1, m, offset + n - 1, False, offset + n - m - 1, True, _d(n, m))
        for n in range(1, m):
            terms.add(offset + m - 1, -m / 2, offset + n - 1, False, offset + m - n - 1, False, -_d(m, n))


def _signal_idler_terms(terms, M, delta, s0, i0):
    """Linear ladder for one detuning; ``s0``/``i0`` index the first signal/idler mode."""
    q_s, q_i = (1 + delta) / 2, (1 - delta) / 2
    for x0, y0, q, qo in ((s0, i0, q_s, q_i), (i0, s0, q_i, q_s)):
        for m in range(M):
            f = m + q
            for n in range(m + 1, M + 1):
                dp = (n**3 - (m + q) ** 3 - (n - m - 1 + qo) ** 3) / 6
                terms.add(x0 + m, f, n - 1, False, y0 + n - m - 1, True, dp)
            for n in range(m + 1, M):
                ds = ((n + q) ** 3 - (m + q) ** 3 - (n - m) ** 3) / 6
                terms.add(x0 + m, f, x0 + n, False, n - m - 1, True, ds)
            for n in range(1, m + 1):
                ds = ((m + q) ** 3 - (m - n + q) ** 3 - n**3) / 6
                terms.add(x0 + m, -f, n - 1, False, x0 + m - n, False, -ds)


def _integrate(rhs, y0, xi_max, rtol, atol, max_phase, n_samples, dense=False):
    max_step = np.inf if max_phase == 0 else 0.1 / max_phase
    xs = np.linspace(0.0, xi_max, n_samples)
    sol = solve_ivp(rhs, (0.0, xi_max), y0, method="RK45", t_eval=xs, rtol=rtol, atol=atol,
                    max_step=max_step, dense_output=dense)
    if sol.status != 0:
        raise StepFailure(sol.message)
    return sol


def integrate_pump_harmonics(sys: ScaledPumpSystem, n_samples: int = N_SAMPLES) -> ModeLadder:
    """Pump ladder from ``a_1(0) = 1``."""
    M = int(sys.M)
    terms = _Terms()
    _pump_terms(terms, M)
    rhs, max_phase = terms.compile(M, sys.mu)
    y0 = np.zeros(M, complex)
    y0[0] = 1.0
    sol = _integrate(rhs, y0, sys.xi_max, sys.rtol, sys.atol, max_phase, n_samples)
    return ModeLadder(xi=sol.t, pump=sol.y, mu=sys.mu)


def critical_harmonics(mu: float, xi_ref: float = 10.0, tol: float = 0.01, M_max: int = 40,
                       rtol: float = RTOL, atol: float = ATOL) -> int:
    """Smallest ``M`` whose main-tone power differs from the ``M+1`` ladder by less than ``tol``."""
    prev = integrate_pump_harmonics(ScaledPumpSystem(mu, 1, xi_ref, rtol, atol)).main_tone_power
    for M in range(1, M_max + 1):
        nxt = integrate_pump_harmonics(ScaledPumpSystem(mu, M + 1, xi_ref, rtol, atol)).main_tone_power
        if np.max(np.abs(prev - nxt)) < tol:
            return M
        prev = nxt
    raise StepFailure(f"no convergence in M up to {M_max} for mu={mu}")


def integrate_4wm_third_harmonic(mu_4wm: float, xi_max: float, rtol: float = RTOL, atol: float = ATOL,
                                 n_samples: int = N_SAMPLES) -> ModeLadder:
    """Kerr pump with its third harmonic; ``pump[0]`` is ``a_1``, ``pump[1]`` is ``a_3``."""
    if not mu_4wm >= 0:
        raise ValueError("mu must be non-negative")
    mu = float(mu_4wm)

    def rhs(xi, y):
        a1, a3 = y
        e = np.exp(1j * mu * xi)
        return np.array([
            1j * (a1 * a1 * np.conj(a1) - 3 * a3 * np.conj(a1) ** 2 * e),
            3j * (2 * a3 * a1 * np.conj(a1) - a1**3 / (3 * e)),
        ])

    sol = _integrate(rhs, np.array([1.0 + 0j, 0j]), xi_max, rtol, atol, mu, n_samples)
    return ModeLadder(xi=sol.t, pump=sol.y, mu=mu)


def _signal_system(mu, deltas, M):
    n_d = len(deltas)
    size = M + 2 * M * n_d
    terms = _Terms()
    _pump_terms(terms, M)
    for j, d in enumerate(deltas):
        s0 = M + 2 * M * j
        _signal_idler_terms(terms, M, d, s0, s0 + M)
    return terms.compile(size, mu), size


def _check_signal_args(mu, delta, M, xi_max, seed):
    if not mu >= 0:
        raise ValueError("mu must be non-negative")
    if not -1 < delta < 1:
        raise ValueError("delta must lie in (-1, 1)")
    if int(M) != M or M < 1:
        raise ValueError("M must be a positive integer")
    if not xi_max > 0 or not seed > 0:
        raise ValueError("xi_max and seed must be positive")


def integrate_signal_idler(mu: float, delta: float, M: int, xi_max: float, seed_signal: float = 1e-6,
                           rtol: float = RTOL, atol: float = ATOL, n_samples: int = N_SAMPLES) -> ModeLadder:
    """Signal and idler ladders driven by a co-evolving pump ladder of ``M`` harmonics."""
    _check_signal_args(mu, delta, M, xi_max, seed_signal)
    M = int(M)
    (rhs, max_phase), size = _signal_system(mu, [delta], M)
    y0 = np.zeros(size, complex)
    y0[0] = 1.0
    y0[M] = seed_signal
    sol = _integrate(rhs, y0, xi_max, rtol, atol, max_phase, n_samples)
    return ModeLadder(
        xi=sol.t, pump=sol.y[:M], signal=sol.y[M:2 * M], idler=sol.y[2 * M:3 * M],
        delta=delta, mu=mu, seed=seed_signal,
    )


class GainSurface:
    """Dense-output gain ``G(xi, delta)`` from one joint integration over many detunings."""

    def __init__(self, mu, deltas, M, xi_max, seed=1e-6, rtol=RTOL, atol=ATOL):
        deltas = [float(d) for d in deltas]
        for d in deltas:
            _check_signal_args(mu, d, M, xi_max, seed)
        self.mu, self.deltas, self.M, self.xi_max, self.seed = mu, np.array(deltas), int(M), xi_max, seed
        (rhs, max_phase), size = _signal_system(mu, deltas, self.M)
        y0 = np.zeros(size, complex)
        y0[0] = 1.0
        self._sig_idx = np.array([self.M + 2 * self.M * j for j in range(len(deltas))])
        y0[self._sig_idx] = seed
        self._sol = _integrate(rhs, y0, xi_max, rtol, atol, max_phase, 2, dense=True)

    def gain(self, xi) -> np.ndarray:
        """Linear gain, shape ``(len(xi), len(deltas))``."""
        xi = np.atleast_1d(np.asarray(xi, float))
        if np.any(xi < 0) or np.any(xi > self.xi_max * (1 + 1e-12)):
            raise ValueError("xi outside the integrated range")
        y = self._sol.sol(xi)
        return (np.abs(y[self._sig_idx]) ** 2 / self.seed**2).T

    def gain_db(self, xi) -> np.ndarray:
        return 10 * np.log10(self.gain(xi))


def gain_threshold_mu(delta: float) -> float:
    """Largest ``mu`` with exponential growth in the single-mode ladder."""
    if not -1 < delta < 1:
        raise ValueError("delta must lie in (-1, 1)")
    return 8 / math.sqrt(1 - delta * delta)


def single_mode_growth_rate(mu: float, delta: float) -> float:
    """Closed-form growth rate of ``M = 1``; 0 above the threshold."""
    x = 1 - delta * delta
    val = x * (1 - mu * mu * x / 64)
    return 0.5 * math.sqrt(val) if val > 0 else 0.0


def scaled_parameters(epsilon: float, kappa_p: float) -> tuple[float, float]:
    """``(mu, xi per cell)`` in the low-frequency limit: ``mu = kappa_p^2/eps``, ``xi = eps kappa_p x / 4``."""
    return kappa_p**2 / epsilon, epsilon * kappa_p / 4


def integrate_pump_harmonics_physical(coeffs: CellCoefficients, model: DispersionModel, omega_p: float,
                                      A_p0: float, M: int, x_max: float, rtol: float = RTOL,
                                      atol: float = ATOL, n_samples: int = N_SAMPLES) -> ModeLadder:
    """Unscaled pump ladder with exact wavevectors; ``xi`` holds the cell coordinate.

    Harmonics that do not propagate on ``model`` are dropped with a warning.
    """
    if int(M) != M or M < 1:
        raise ValueError("M must be a positive integer")
    ks = []
    for m in range(1, int(M) + 1):
        try:
            ks.append(kappa_of_omega(model, m * omega_p))
        except (AboveCutoff, InGap):
            break
    if not ks:
        raise ValueError("pump does not propagate")
    if len(ks) < M:
        warnings.warn(f"only {len(ks)} of {M} harmonics propagate; truncating", HarmonicAboveCutoff, stacklevel=2)
    M = len(ks)
    k = np.array(ks)
    c = coeffs.chi3 / 4
    terms = _Terms()
    for m in range(1, M + 1):
        for n in range(m + 1, M + 1):
            terms.add(m - 1, c * k[n - 1] * k[n - m - 1], n - 1, False, n - m - 1, True,
                      k[n - 1] - k[m - 1] - k[n - m - 1])
        for n in range(1, m):
            terms.add(m - 1, -c / 2 * k[n - 1] * k[m - n - 1], n - 1, False, m - n - 1, False,
                      -(k[m - 1] - k[n - 1] - k[m - n - 1]))
    rhs, max_phase = terms.compile(M, 1.0)
    y0 = np.zeros(M, complex)
    y0[0] = A_p0
    sol = _integrate(rhs, y0, x_max, rtol, atol, max_phase, n_samples)
    return ModeLadder(xi=sol.t, pump=sol.y)
