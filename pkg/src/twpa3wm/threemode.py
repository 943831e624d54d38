"""Pump, signal and idler on a discrete chain without up-converted modes.

The signal and idler grow as ``exp(i(kappa_p + kt) n / 2)`` where the complex
wavevector correction ``kt`` is a root of

    sin((kp-2ks+kt)/4) sin((kp-2ki-kt)/4) sin((kp+2ks+kt)/4) sin((kp+2ki-kt)/4)
        = (chi3 |A_p|)^2 sin^2(kp/2) sin^2((kp+kt)/4) sin^2((kp-kt)/4).

Writing ``w = exp(i kt / 4)`` turns both sides into Laurent polynomials of
degree four, so all roots in one period follow from an eigenvalue problem.
The physical pair lies near ``kt = ks - ki``; the gain per cell is
``g = Im(kt)/2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .dispersion import DispersionModel, Uniform, kappa_of_omega
from .errors import AboveCutoff, InGap, NoConvergence

LOG10E = math.log10(math.e)
RESIDUAL_TOL = 1e-10
# Im(kt) below this is treated as a real (non-growing) root
IMAG_TOL = 1e-9

PUMP_CONVENTIONS = ("frequency", "wavevector")


@dataclass(frozen=True)
class PumpDrive:
    """Pump frequency and pumping strength ``eps = |chi3 theta_p|``.

    The phase swing across a cell is related to the node amplitude either by
    ``theta_p = (omega_p/omega0) A_p`` (``"frequency"``) or by
    ``theta_p = 2 sin(kappa_p/2) A_p`` (``"wavevector"``). Both coincide on the
    uniform chain.
    """

    omega_p: float
    epsilon: float
    convention: str = "frequency"

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        if self.convention not in PUMP_CONVENTIONS:
            raise ValueError(f"convention must be one of {PUMP_CONVENTIONS}")

    def chi3_amplitude(self, model: DispersionModel, kappa_p: float | None = None) -> float:
        """``chi3 |A_p|`` for this drive on ``model``."""
        if self.convention == "frequency":
            return self.epsilon * model.reference / self.omega_p
        if kappa_p is None:
            kappa_p = kappa_of_omega(model, self.omega_p)
        return self.epsilon / (2 * math.sin(kappa_p / 2))


@dataclass(frozen=True)
class ThreeModeSolution:
    kappa_tilde: complex
    g: float
    exponential: bool
    residual: float
    kappa_p: float = math.nan
    kappa_s: float = math.nan
    kappa_i: float = math.nan
    roots: tuple = field(default=(), repr=False)

    @property
    def mismatch(self) -> float:
        return self.kappa_p - self.kappa_s - self.kappa_i

    def power_gain_db(self, n_cells: int) -> float:
        return power_gain_db(self.g, n_cells)


def power_gain_db(g: float, n_cells: int) -> float:
    """Asymptotic power gain ``20 g N log10(e)`` of an ``N``-cell chain."""
    return 20 * g * n_cells * LOG10E


def determinant(kt, kp, ks, ki, chi3_Ap):
    s = np.sin
    lhs = s((kp - 2 * ks + kt) / 4) * s((kp - 2 * ki - kt) / 4) * s((kp + 2 * ks + kt) / 4) * s((kp + 2 * ki - kt) / 4)
    rhs = chi3_Ap**2 * s(kp / 2) ** 2 * s((kp + kt) / 4) ** 2 * s((kp - kt) / 4) ** 2
    return lhs - rhs


def _sin_factor(a, sign):
    # sin((a + sign*kt)/4) as coefficients of w^-1, w^0, w^1 with w = exp(i kt/4)
    e = np.exp(0.5j * a / 2)
    if sign > 0:
        return np.array([-1 / e, 0.0, e]) / 2j
    return np.array([e, 0.0, -1 / e]) / 2j


def _determinant_polynomial(kp, ks, ki, chi3_Ap):
    lhs = np.array([1.0 + 0j])
    for a, sign in ((kp - 2 * ks, 1), (kp - 2 * ki, -1), (kp + 2 * ks, 1), (kp + 2 * ki, -1)):
        lhs = np.convolve(lhs, _sin_factor(a, sign))
    rhs = np.array([1.0 + 0j])
    for sign in (1, -1, 1, -1):
        rhs = np.convolve(rhs, _sin_factor(kp, sign))
    # coefficients of w^-4 .. w^4, i.e. ascending powers of w after multiplying by w^4
    return lhs - chi3_Ap**2 * math.sin(kp / 2) ** 2 * rhs


def _polish(z, kp, ks, ki, c, n_iter=30):
    for _ in range(n_iter):
        fz = determinant(z, kp, ks, ki, c)
        # the determinant scale shrinks as kappa^4 at low frequency: stop on the step only
        if fz == 0:
            break
        h = 1e-6 * (1 + abs(z))
        d = (determinant(z + h, kp, ks, ki, c) - determinant(z - h, kp, ks, ki, c)) / (2 * h)
        if d == 0:
            break
        step = fz / d
        z = z - step
        if abs(step) < 1e-15 * (1 + abs(z)):
            break
    return z


def _physical_roots(kp, ks, ki, c):
    coeffs = _determinant_polynomial(kp, ks, ki, c)
    ref = ks - ki
    roots = []
    for w in P.polyroots(coeffs):
        if w == 0:
            continue
        kt = -4j * np.log(w)
        # shift by whole periods of 8*pi so the root sits next to ks - ki
        kt -= 8 * math.pi * round((kt.real - ref) / (8 * math.pi))
        if abs(kt.real - ref) < math.pi:
            roots.append(complex(_polish(kt, kp, ks, ki, c)))
    return roots


def _degenerate_roots(kp, k, c):
    # ks = ki = k: the determinant is a quadratic in v = sin^2(kt/4)
    s1 = math.sin((kp - 2 * k) / 4) ** 2
    s2 = math.sin((kp + 2 * k) / 4) ** 2
    s3 = math.sin(kp / 4) ** 2
    cs = c * c * math.sin(kp / 2) ** 2
    a = 1 - cs
    b = -(s1 + s2 - 2 * cs * s3)
    d = s1 * s2 - cs * s3 * s3
    vs = np.roots([a, b, d]) if a != 0 else np.array([-d / b])
    out = []
    for v in vs:
        kt = 4 * np.arcsin(np.sqrt(complex(v)))
        kt = complex(kt.real, abs(kt.imag))
        out.extend([kt, -kt])
    return out


def _scan_roots(kp, ks, ki, c, n=200):
    ref = ks - ki
    re = np.linspace(ref - 0.5, ref + 0.5, n)
    im = np.linspace(1.0 / n, 1.0, n)
    Z = re[None, :] + 1j * im[:, None]
    F = np.abs(determinant(Z, kp, ks, ki, c))
    found = []
    for idx in np.argsort(F, axis=None)[:10]:
        i, j = np.unravel_index(idx, F.shape)
        found.append(complex(_polish(Z[i, j], kp, ks, ki, c)))
    return found


def solve_determinant(kappa_p: float, kappa_s: float, kappa_i: float, chi3_Ap: float) -> ThreeModeSolution:
    """Growing root of the three-mode determinant for given wavevectors."""
    for k in (kappa_p, kappa_s, kappa_i):
        if not 0 <= k <= math.pi:
            raise ValueError("wavevectors must lie in [0, pi]")
    if chi3_Ap < 0:
        raise ValueError("chi3_Ap must be non-negative")
    kp, ks, ki, c = float(kappa_p), float(kappa_s), float(kappa_i), float(chi3_Ap)

    if ks == ki:
        roots = _degenerate_roots(kp, ks, c)
    else:
        roots = _physical_roots(kp, ks, ki, c)
    good = [z for z in roots if abs(determinant(z, kp, ks, ki, c)) < RESIDUAL_TOL]
    if not good:
        good = [z for z in _scan_roots(kp, ks, ki, c) if abs(determinant(z, kp, ks, ki, c)) < RESIDUAL_TOL]
    if not good:
        raise NoConvergence(f"determinant root not found for kp={kp}, ks={ks}, ki={ki}, c={c}")
    best = max(good, key=lambda z: z.imag)
    if ks == ki and best.imag > IMAG_TOL:
        best = complex(0.0, best.imag)
    g = best.imag / 2 if best.imag > IMAG_TOL else 0.0
    return ThreeModeSolution(
        kappa_tilde=best,
        g=g,
        exponential=g > 0,
        residual=float(abs(determinant(best, kp, ks, ki, c))),
        kappa_p=kp,
        kappa_s=ks,
        kappa_i=ki,
        roots=tuple(good),
    )


def _wavevectors(model, omega_p, delta):
    kp = kappa_of_omega(model, omega_p)
    ks = kappa_of_omega(model, (1 + delta) * omega_p / 2)
    ki = kappa_of_omega(model, (1 - delta) * omega_p / 2)
    return kp, ks, ki


def gain_exact(model: DispersionModel, omega_p: float, delta: float, epsilon: float,
               convention: str = "frequency") -> ThreeModeSolution:
    """Numerical three-mode gain for a pump and detuned signal on ``model``."""
    if not -1 <= delta <= 1:
        raise ValueError("delta must lie in [-1, 1]")
    kp, ks, ki = _wavevectors(model, omega_p, delta)
    c = PumpDrive(omega_p, epsilon, convention).chi3_amplitude(model, kp)
    if ks == 0 or ki == 0:
        # a signal or idler at zero frequency does not couple
        return ThreeModeSolution(complex(ks - ki), 0.0, False, 0.0, kp, ks, ki)
    return solve_determinant(kp, ks, ki, c)


def gain_approx_from_kappas(kp, ks, ki, chi3_Ap) -> float:
    """Small-gain solution of the determinant; 0 when no exponential gain."""
    mismatch = kp - ks - ki
    coupling = (
        chi3_Ap**2 * math.sin(kp / 2) ** 2 / (math.sin(ks) * math.sin(ki))
        * (math.sin((ks + ki) / 4) ** 2 - math.sin((ks - ki) / 4) ** 2) ** 2
    )
    rhs = -math.sin(mismatch / 4) ** 2 + coupling
    if rhs <= 0:
        return 0.0
    return 2 * math.asinh(math.sqrt(rhs))


def gain_approx(model: DispersionModel, omega_p: float, delta: float, epsilon: float,
                convention: str = "frequency") -> float:
    kp, ks, ki = _wavevectors(model, omega_p, delta)
    if ks == 0 or ki == 0 or ks == math.pi or ki == math.pi:
        return 0.0
    c = PumpDrive(omega_p, epsilon, convention).chi3_amplitude(model, kp)
    return gain_approx_from_kappas(kp, ks, ki, c)


def boundary_power_gain(kappa_p, kappa_s, kappa_i, chi3_Ap, n_cells) -> float:
    """Linear signal power gain after ``n_cells`` for a signal-only input.

    Superposes the two physical modes so that the idler vanishes at the
    input cell. The ratio idler/signal of each mode follows from the signal
    row of the coupled amplitude equations.
    """
    kp, ks, ki, c = float(kappa_p), float(kappa_s), float(kappa_i), float(chi3_Ap)
    roots = _degenerate_roots(kp, ks, c) if ks == ki else _physical_roots(kp, ks, ki, c)
    roots = [z for z in roots if abs(determinant(z, kp, ks, ki, c)) < 1e-8]
    # the forward signal/idler pair lies next to ks - ki; farther roots belong to backward branches
    uniq = []
    for z in sorted(roots, key=lambda z: abs(z.real - (ks - ki))):
        if all(abs(z - u) > 1e-9 for u in uniq):
            uniq.append(z)
    if len(uniq) < 2:
        raise NoConvergence("need two distinct physical roots for the boundary solution")
    z1, z2 = uniq[0], uniq[1]

    def ratio(kt):
        qs = (kp + kt) / 2
        qi = (kp - kt) / 2
        d_s = 4 * np.sin((qs - ks) / 2) * np.sin((qs + ks) / 2)
        b = -(c / 2) * (1 - np.exp(-1j * kp)) * (1 - np.exp(1j * qi)) * (np.exp(1j * qs) - 1)
        return d_s / b

    r1, r2 = ratio(z1), ratio(z2)
    c1 = r2 / (r2 - r1)
    c2 = -r1 / (r2 - r1)
    n = n_cells
    amp = c1 * np.exp(1j * (kp + z1) * n / 2) + c2 * np.exp(1j * (kp + z2) * n / 2)
    return float(abs(amp) ** 2)


def gain_cutoff_frequency(epsilon: float, omega0: float = 1.0, n_grid: int = 400) -> float:
    """Upper edge of the gain region that extends down to low pump frequency.

    Uniform chain, zero detuning. Found on a pump-frequency grid and refined
    by bisection on the sign of ``g``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    model = Uniform(omega0)

    def has_gain(w):
        return gain_exact(model, w, 0.0, epsilon).g > 0

    grid = np.linspace(1e-3, 2.0, n_grid + 1)[:-1] * omega0
    last_pos = None
    for w in grid:
        if has_gain(w):
            last_pos = w
        elif last_pos is not None:
            lo, hi = last_pos, w
            break
    else:
        if last_pos is None:
            return 0.0
        lo, hi = last_pos, 2.0 * omega0 * (1 - 1e-12)
        if has_gain(hi):
            return 2.0 * omega0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if has_gain(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * omega0:
            break
    return 0.5 * (lo + hi)


def epsilon_at_cutoff(omega_target: float, omega0: float = 1.0, lo: float = 0.05, hi: float = 0.6) -> float:
    """Pumping strength whose gain cutoff equals ``omega_target``."""
    return brentq(lambda e: gain_cutoff_frequency(e, omega0) - omega_target, lo, hi, xtol=1e-6)


@dataclass(frozen=True)
class PumpStrengthEstimate:
    kappa_p: float
    kappa_s: float
    mismatch: float
    chi3_Ap: float
    epsilon: float


def min_pump_strength_estimate(omega0: float = 1.0) -> PumpStrengthEstimate:
    """Analytic lower bound on eps at the no-up-conversion threshold.

    Sets ``g = 0`` in the degenerate small-gain solution at
    ``omega_p = 4 omega0 / 3``, giving
    ``chi3 |A_p| > sin(Delta/4) / sin^2(kappa_p/4)``.
    """
    model = Uniform(omega0)
    wp = 4 * omega0 / 3
    kp = kappa_of_omega(model, wp)
    ks = kappa_of_omega(model, wp / 2)
    mismatch = kp - 2 * ks
    c = math.sin(mismatch / 4) / math.sin(kp / 4) ** 2
    eps = c * 2 * math.sin(kp / 2)
    return PumpStrengthEstimate(kp, ks, mismatch, c, eps)


@dataclass
class GainTrace:
    omega_p: float
    epsilon: float
    n_cells: int
    delta: np.ndarray
    omega_s: np.ndarray
    g: np.ndarray
    G_dB: np.ndarray
    flags: list[str]

    def gain_interval(self) -> tuple[float, float]:
        """Contiguous delta interval around the grid point nearest 0 with g > 0."""
        pos = self.g > 0
        i0 = int(np.argmin(np.abs(self.delta)))
        if not pos[i0]:
            return (math.nan, math.nan)
        lo = hi = i0
        while lo > 0 and pos[lo - 1]:
            lo -= 1
        while hi < len(pos) - 1 and pos[hi + 1]:
            hi += 1
        return float(self.delta[lo]), float(self.delta[hi])

    def bandwidth(self) -> float:
        """Upper edge ``delta_max`` of the gain window.

        The signal then spans ``(1 +/- delta_max) omega_p / 2``, a width of
        ``delta_max * omega_p``.
        """
        return self.gain_interval()[1]

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", "omega_s", "g", "G_dB"])
            for row in zip(self.delta, self.omega_s, self.g, self.G_dB):
                w.writerow([repr(float(v)) for v in row])
        return path


def gain_band(model: DispersionModel, omega_p: float, epsilon: float, n_cells: int,
              deltas=None, convention: str = "frequency") -> GainTrace:
    """Exact gain across detuning; points outside the bands are flagged, not raised."""
    if deltas is None:
        deltas = np.linspace(-0.99, 0.99, 199)
    deltas = np.asarray(deltas, dtype=float)
    g = np.zeros(len(deltas))
    flags = []
    for j, d in enumerate(deltas):
        try:
            g[j] = gain_exact(model, omega_p, d, epsilon, convention).g
            flags.append("ok")
        except InGap:
            flags.append("gap")
        except AboveCutoff:
            flags.append("above_cutoff")
    return GainTrace(
        omega_p=omega_p,
        epsilon=epsilon,
        n_cells=n_cells,
        delta=deltas,
        omega_s=(1 + deltas) * omega_p / 2,
        g=g,
        G_dB=np.array([power_gain_db(x, n_cells) for x in g]),
        flags=flags,
    )


def gain_vs_pump(model: DispersionModel, omega_p_grid, epsilon: float, delta: float = 0.0,
                 convention: str = "frequency") -> np.ndarray:
    """g(omega_p) at fixed detuning; 0 where any mode fails to propagate."""
    out = np.zeros(len(omega_p_grid))
    for j, w in enumerate(omega_p_grid):
        try:
            out[j] = gain_exact(model, float(w), delta, epsilon, convention).g
        except (InGap, AboveCutoff):
            out[j] = 0.0
    return out


def pump_window(model: DispersionModel, omega_center: float, epsilon: float,
                convention: str = "frequency", span: float = 0.2, tol: float = 1e-9) -> tuple[float, float]:
    """Edges of the contiguous pump-frequency window with gain around ``omega_center``."""

    def has_gain(w):
        try:
            return gain_exact(model, w, 0.0, epsilon, convention).g > 0
        except (InGap, AboveCutoff):
            return False

    if not has_gain(omega_center):
        raise ValueError("no gain at the window centre")
    ref = model.reference
    edges = []
    for sign in (-1, 1):
        inside = omega_center
        step = 1e-3 * ref
        outside = omega_center + sign * step
        while has_gain(outside):
            inside = outside
            step *= 2
            outside = omega_center + sign * step
            if step > span * ref:
                break
        for _ in range(80):
            mid = 0.5 * (inside + outside)
            if has_gain(mid):
                inside = mid
            else:
                outside = mid
            if abs(outside - inside) < tol * ref:
                break
        edges.append(0.5 * (inside + outside))
    return edges[0], edges[1]


def delta_max(model: DispersionModel, omega_p: float, epsilon: float,
              convention: str = "frequency", tol: float = 1e-10) -> float:
    """Largest detuning of the gain window containing ``delta = 0``, by bisection."""

    def has_gain(d):
        try:
            return gain_exact(model, omega_p, d, epsilon, convention).g > 0
        except (InGap, AboveCutoff):
            return False

    if not has_gain(0.0):
        return math.nan
    inside, outside = 0.0, None
    for d in np.linspace(0.01, 1.0, 100):
        if has_gain(float(d)):
            inside = float(d)
        else:
            outside = float(d)
            break
    if outside is None:
        return 1.0
    while outside - inside > tol:
        mid = 0.5 * (inside + outside)
        if has_gain(mid):
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)
