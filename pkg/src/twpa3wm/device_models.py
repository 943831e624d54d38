"""DC bias points and per-cell coefficients of junction, rf-SQUID and SNAIL chains.

Every cell reduces to the same universal lattice equation characterised by a
resonance frequency ``omega0`` and a three-wave-mixing coefficient ``chi3``.
This module computes those numbers from circuit parameters.

Units are SI throughout. Flux enters either as the normalised phase
``F = 2*pi*Phi/Phi0`` (radians) or, through :meth:`DeviceSpec.with_flux`, as
``Phi/Phi0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import BiasOutOfRange, DegenerateSnail, HystereticRegime, NoRoot

PHI0 = 2.067833848e-15  # Wb
PHI0_REDUCED = PHI0 / (2 * math.pi)

ROOT_RTOL = 1e-12


class DeviceKind(str, enum.Enum):
    JUNCTION = "junction"
    RF_SQUID = "rf_squid"
    SNAIL = "snail"


@dataclass(frozen=True)
class DeviceSpec:
    """One unit cell of the chain.

    ``LJ`` is used by junction and rf-SQUID cells; ``LJ1``/``LJ2`` by SNAILs
    (single junction and one of the ``N_arm`` series junctions). The bias is
    ``idc_over_ic`` for junction cells and ``F`` for flux-biased cells.
    """

    kind: DeviceKind
    C: float
    CJ: float = 0.0
    LJ: float | None = None
    LJ1: float | None = None
    LJ2: float | None = None
    L: float | None = None
    N_arm: int = 3
    idc_over_ic: float = 0.0
    F: float = 0.0
    chi4: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DeviceKind(self.kind))
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.CJ < 0:
            raise ValueError("CJ must be non-negative")
        need = {
            DeviceKind.JUNCTION: ("LJ",),
            DeviceKind.RF_SQUID: ("LJ", "L"),
            DeviceKind.SNAIL: ("LJ1", "LJ2"),
        }[self.kind]
        for name in need:
            value = getattr(self, name)
            if value is None or not value > 0:
                raise ValueError(f"{name} must be a positive inductance for {self.kind.value}")

    @property
    def flux_quanta(self) -> float:
        return self.F / (2 * math.pi)

    def with_flux(self, phi_over_phi0: float) -> "DeviceSpec":
        return replace(self, F=2 * math.pi * phi_over_phi0)

    @classmethod
    def snail_from_currents(cls, C, Ic1, Ic2, N_arm, phi_over_phi0=0.0, CJ=0.0, chi4=None):
        """Build a SNAIL cell from critical currents (A) instead of inductances."""
        return cls(
            kind=DeviceKind.SNAIL,
            C=C,
            CJ=CJ,
            LJ1=PHI0_REDUCED / Ic1,
            LJ2=PHI0_REDUCED / Ic2,
            N_arm=N_arm,
            F=2 * math.pi * phi_over_phi0,
            chi4=chi4,
        )


@dataclass(frozen=True)
class CellCoefficients:
    theta0: float
    omega0: float
    chi3: float
    chi4: float | None = None
    cj_over_c: float = 0.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")


def _newton_polish(f, df, x, tol, max_iter=8):
    for _ in range(max_iter):
        d = df(x)
        if d == 0:
            break
        step = f(x) / d
        x -= step
        if abs(step) < tol * max(1.0, abs(x)):
            break
    return x


def solve_bias_junction(idc_over_ic: float) -> float:
    """Phase drop across a current-biased junction, ``sin(theta0) = Idc/Ic``."""
    if not abs(idc_over_ic) < 1:
        raise BiasOutOfRange(f"|Idc/Ic| = {abs(idc_over_ic)} must be below 1")
    return math.asin(idc_over_ic)


def solve_bias_rf_squid(F: float, beta_L: float) -> float:
    """Solve ``beta_L*sin(theta0) + theta0 + F = 0`` with ``beta_L = L/LJ``."""
    if not beta_L < 1:
        raise HystereticRegime(f"beta_L = {beta_L} >= 1: bias point is not unique")
    if beta_L < 0:
        raise ValueError("beta_L must be non-negative")

    def h(t):
        return beta_L * math.sin(t) + t + F

    def dh(t):
        return beta_L * math.cos(t) + 1.0

    lo, hi = -F - beta_L, -F + beta_L
    if h(lo) == 0:
        return lo
    if h(hi) == 0:
        return hi
    if lo == hi:
        return lo
    t = brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return _newton_polish(h, dh, t, ROOT_RTOL)


def _snail_residual(theta, F, ratio, N):
    # ratio = LJ1/LJ2; residual normalised to 1/LJ1
    return np.sin(theta + F) + ratio * np.sin(theta / N)


def _snail_roots(F, ratio, N, center=0.0, half_width=None, n_grid=81):
    edge = N * math.pi
    if half_width is None:
        half_width = edge
    lo = max(-edge, center - half_width)
    hi = min(edge, center + half_width)
    ts = np.linspace(lo, hi, n_grid)
    vals = _snail_residual(ts, F, ratio, N)
    roots = [float(t) for t, v in zip(ts, vals) if v == 0.0]
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for i in idx:
        roots.append(brentq(_snail_residual, ts[i], ts[i + 1], args=(F, ratio, N), xtol=1e-15))
    return roots


def _nearest_root(F, ratio, N, theta):
    half_width = 0.25
    while True:
        roots = _snail_roots(F, ratio, N, center=theta, half_width=half_width)
        if roots:
            return min(roots, key=lambda r: abs(r - theta))
        if half_width >= 2 * N * math.pi:
            raise NoRoot(f"no bias root for F = {F:.6g}")
        half_width *= 2


def solve_bias_snail(F: float, LJ1: float, LJ2: float, N_arm: int, n_steps: int | None = None) -> float:
    """Dc phase across a SNAIL carrying no net current.

    The root is followed by continuation from ``theta0 = 0`` at ``F = 0`` so
    that a flux ramp never jumps between branches.
    """
    if N_arm == 1:
        raise DegenerateSnail("N_arm = 1 is an asymmetric dc-SQUID: the 3WM term cancels")
    if N_arm < 1:
        raise ValueError("N_arm must be a positive integer")
    ratio = LJ1 / LJ2
    N = int(N_arm)
    if n_steps is None:
        n_steps = max(1, int(math.ceil(abs(F) / 0.02)))
    theta = 0.0
    for f in np.linspace(0.0, F, n_steps + 1)[1:]:
        theta = _nearest_root(f, ratio, N, theta)

    def dh(t):
        return math.cos(t + F) + ratio * math.cos(t / N) / N

    theta = _newton_polish(lambda t: _snail_residual(t, F, ratio, N), dh, theta, ROOT_RTOL)
    if abs(_snail_residual(theta, F, ratio, N)) > 1e-10:
        raise NoRoot(f"bias root did not converge for F = {F:.6g}")
    return float(theta)


def cell_coefficients(spec: DeviceSpec) -> CellCoefficients:
    """Resonance frequency and mixing coefficients of one cell."""
    C = spec.C
    cj = spec.CJ / C
    if spec.kind is DeviceKind.JUNCTION:
        theta0 = solve_bias_junction(spec.idc_over_ic)
        omega0 = math.sqrt(math.cos(theta0) / (spec.LJ * C))
        chi3 = math.tan(theta0)
        chi4 = 0.5 if spec.chi4 is None else spec.chi4
    elif spec.kind is DeviceKind.RF_SQUID:
        theta0 = solve_bias_rf_squid(spec.F, spec.L / spec.LJ)
        w_bar_sq = math.cos(theta0) / (spec.LJ * C)
        w_rf_sq = w_bar_sq + 1.0 / (spec.L * C)
        omega0 = math.sqrt(w_rf_sq)
        # (w_bar/w_rf)^2 tan(theta0) written without the cosine so theta0 = pi/2 is fine
        chi3 = math.sin(theta0) / (spec.LJ * C * w_rf_sq)
        chi4 = spec.chi4
    else:
        N = spec.N_arm
        theta0 = solve_bias_snail(spec.F, spec.LJ1, spec.LJ2, N)
        w_sq = (
            math.cos(theta0 + spec.F) / (spec.LJ1 * C)
            + math.cos(theta0 / N) / (spec.LJ2 * C * N)
        )
        if not w_sq > 0:
            raise NoRoot("SNAIL bias point has negative inductive stiffness")
        omega0 = math.sqrt(w_sq)
        chi3 = (
            math.sin(theta0 + spec.F) / (spec.LJ1 * C)
            + math.sin(theta0 / N) / (spec.LJ2 * C * N**2)
        ) / w_sq
        chi4 = spec.chi4
    return CellCoefficients(theta0=theta0, omega0=omega0, chi3=chi3, chi4=chi4, cj_over_c=cj)


def flux_sweep(spec: DeviceSpec, phi_over_phi0) -> list[CellCoefficients]:
    """Coefficients along a flux ramp, following one bias branch."""
    return [cell_coefficients(spec.with_flux(float(p))) for p in phi_over_phi0]


@dataclass(frozen=True)
class DcPumpOptimum:
    epsilon_max: float
    idc_opt: float
    ip_opt: float


def dc_pump_strength(idc: float, ip: float) -> float:
    """Adiabatic pumping strength of a current-biased junction (currents in units of Ic).

    ``theta_p = Ip/(Ic cos theta0)`` is the small-signal phase swing and
    ``eps = tan(theta0) * theta_p``.
    """
    theta0 = math.asin(idc)
    return math.tan(theta0) * ip / math.cos(theta0)


def max_pump_strength_dc(switch_fraction: float = 0.9, n_grid: int = 2001) -> DcPumpOptimum:
    """Largest adiabatic pumping strength with ``Idc + Ip <= switch_fraction * Ic``.

    The switching fraction 0.9 is a quasi-classical estimate: the quantum
    limit of the tilted washboard (hbar*omega_pl/2 ~ depth of the well, with
    the chain impedance-matched to Z0 against R_q = h/2e^2) gives ~0.97 Ic,
    and escape from the lowest few levels lowers that to about 0.9 Ic.
    """
    if not 0 <= switch_fraction < 1:
        raise BiasOutOfRange("switch_fraction must lie in [0, 1)")
    if switch_fraction == 0:
        return DcPumpOptimum(0.0, 0.0, 0.0)

    def eps(idc):
        return dc_pump_strength(idc, switch_fraction - idc)

    grid = np.linspace(0.0, switch_fraction, n_grid)
    vals = np.array([eps(x) for x in grid])
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n_grid - 1)]
    res = minimize_scalar(lambda x: -eps(x), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    idc = float(res.x)
    return DcPumpOptimum(epsilon_max=eps(idc), idc_opt=idc, ip_opt=switch_fraction - idc)


def rf_squid_epsilon_bound(beta_L: float, theta_p_max: float = 0.1) -> float:
    """Upper bound on eps for a non-hysteretic rf-SQUID chain.

    The coupling peaks at ``theta0 = pi/2`` where ``chi3 = L/LJ``.
    """
    if not beta_L < 1:
        raise HystereticRegime(f"beta_L = {beta_L} >= 1")
    return beta_L * theta_p_max


__all__ = [
    "PHI0",
    "PHI0_REDUCED",
    "DeviceKind",
    "DeviceSpec",
    "CellCoefficients",
    "DcPumpOptimum",
    "solve_bias_junction",
    "solve_bias_rf_squid",
    "solve_bias_snail",
    "cell_coefficients",
    "flux_sweep",
    "dc_pump_strength",
    "max_pump_strength_dc",
    "rf_squid_epsilon_bound",
]
