"""Dispersion laws of uniform and two-band junction chains.

Four models map the quasi-wavevector ``kappa`` (radians per cell) to the
angular frequency ``omega``:

* :class:`Uniform` -- ``omega = 2*omega0*sin(kappa/2)``, cutoff ``2*omega0``.
* :class:`UniformWithCJ` -- same chain with junction capacitance ``CJ``.
* :class:`LcOscillator` -- each cell coupled to an LC resonator at ``omega1``;
  a gap opens between the top of the lower band and ``omega1/sqrt(nu)``.
* :class:`Modulated` -- alternating subcells with frequencies ``omega1`` and
  ``omega2``.

Wavevector convention for :class:`Modulated`: ``kappa`` is counted per
physical subcell. The two-subcell supercell has a reduced zone
``[0, pi/2]``; the lower band is returned in that interval and the upper band
in the extended zone ``[pi/2, pi]`` (``kappa_ext = pi - kappa_reduced``).
The closed form depends on ``sin(kappa)**2`` only, so both labels give the
same frequency, and with the extended-zone label a phase-matched pump and
degenerate signal satisfy ``kappa_s = kappa_p/2``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import AboveCutoff, BandUnavailable, InGap, NoSweetSpot

EDGE_RTOL = 1e-9


class Band(str, enum.Enum):
    LOWER = "lower"
    UPPER = "upper"


class UpConversionRegion(str, enum.Enum):
    ALL_BLOCKED = "all_blocked"
    ONE_OF_SIGNAL_IDLER_CONVERTIBLE = "one_of_signal_idler_convertible"
    SIGNAL_IDLER_CONVERTIBLE = "signal_idler_convertible"
    ALL_CONVERTIBLE = "all_convertible"


class DispersionModel:
    """Common behaviour of the dispersion laws; subclasses supply ``omega``."""

    bands: tuple[Band, ...] = (Band.LOWER,)

    @property
    def reference(self) -> float:
        raise NotImplementedError

    def kappa_range(self, band: Band) -> tuple[float, float]:
        self._check_band(band)
        return 0.0, math.pi

    def omega(self, kappa, band: Band = Band.LOWER):
        raise NotImplementedError

    def _check_band(self, band):
        band = Band(band)
        if band not in self.bands:
            raise BandUnavailable(f"{type(self).__name__} has no {band.value} band")
        return band

    def band_edges(self, band: Band = Band.LOWER) -> tuple[float, float]:
        band = self._check_band(band)
        lo, hi = self.kappa_range(band)
        return float(self.omega(lo, band)), float(self.omega(hi, band))

    @property
    def cutoff(self) -> float:
        return self.band_edges(self.bands[-1])[1]

    @property
    def gaps(self) -> list[tuple[float, float]]:
        if len(self.bands) < 2:
            return []
        return [(self.band_edges(Band.LOWER)[1], self.band_edges(Band.UPPER)[0])]

    def band_of(self, omega: float) -> Band:
        """Band containing ``omega``; edges are widened by ``EDGE_RTOL * reference``."""
        tol = EDGE_RTOL * self.reference
        if omega < -tol:
            raise ValueError("omega must be non-negative")
        for band in self.bands:
            lo, hi = self.band_edges(band)
            if lo - tol <= omega <= hi + tol:
                return band
        if omega > self.cutoff + tol:
            raise AboveCutoff(f"omega = {omega:.6g} above cutoff {self.cutoff:.6g}")
        raise InGap(f"omega = {omega:.6g} lies in a spectral gap")

    def propagates(self, omega: float) -> bool:
        try:
            self.band_of(omega)
        except (InGap, AboveCutoff):
            return False
        return True

    def kappa(self, omega: float) -> float:
        band = self.band_of(omega)
        lo, hi = self.kappa_range(band)
        w_lo, w_hi = self.band_edges(band)
        if omega <= w_lo:
            return lo
        if omega >= w_hi:
            return hi
        return brentq(lambda k: float(self.omega(k, band)) - omega, lo, hi,
                      xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass(frozen=True)
class Uniform(DispersionModel):
    omega0: float = 1.0

    @property
    def reference(self):
        return self.omega0

    def omega(self, kappa, band=Band.LOWER):
        self._check_band(band)
        return 2 * self.omega0 * np.sin(np.asarray(kappa) / 2)

    def kappa(self, omega):
        self.band_of(omega)
        x = min(omega / (2 * self.omega0), 1.0)
        return 2 * math.asin(max(x, 0.0))


@dataclass(frozen=True)
class UniformWithCJ(DispersionModel):
    omega0: float = 1.0
    cj_over_c: float = 0.0

    @property
    def reference(self):
        return self.omega0

    def omega(self, kappa, band=Band.LOWER):
        self._check_band(band)
        s = 2 * np.sin(np.asarray(kappa) / 2)
        return self.omega0 * s / np.sqrt(1 + self.cj_over_c * s**2)

    def kappa(self, omega):
        self.band_of(omega)
        x = omega / self.omega0
        arg = x / (2 * math.sqrt(1 - self.cj_over_c * x * x))
        return 2 * math.asin(min(max(arg, 0.0), 1.0))


@dataclass(frozen=True)
class LcOscillator(DispersionModel):
    """Chain with an LC resonator (``omega1``, coupling factor ``nu``) per cell."""

    omega0: float = 1.0
    omega1: float = 1.5
    nu: float = 0.95
    bands = (Band.LOWER, Band.UPPER)

    def __post_init__(self):
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")

    @property
    def reference(self):
        return self.omega0

    def omega(self, kappa, band=Band.LOWER):
        band = self._check_band(band)
        s = 4 * self.omega0**2 * np.sin(np.asarray(kappa) / 2) ** 2
        b = self.omega1**2 + s
        root = np.sqrt(np.maximum(b * b - 4 * self.nu * self.omega1**2 * s, 0.0))
        if band is Band.LOWER:
            # numerically stable form of (b - root)/(2 nu)
            w2 = np.where(b + root > 0, 2 * self.omega1**2 * s / np.where(b + root > 0, b + root, 1.0), 0.0)
        else:
            w2 = (b + root) / (2 * self.nu)
        return np.sqrt(w2)


@dataclass(frozen=True)
class Modulated(DispersionModel):
    """Chain whose subcells alternate between frequencies ``omega1`` and ``omega2``."""

    omega1: float = 1.0
    omega2: float = 1.25
    bands = (Band.LOWER, Band.UPPER)

    @property
    def reference(self):
        return min(self.omega1, self.omega2)

    def kappa_range(self, band):
        band = self._check_band(band)
        return (0.0, math.pi / 2) if band is Band.LOWER else (math.pi / 2, math.pi)

    def omega(self, kappa, band=Band.LOWER):
        band = self._check_band(band)
        a = self.omega1**2 + self.omega2**2
        p = 4 * self.omega1**2 * self.omega2**2 * np.sin(np.asarray(kappa)) ** 2
        root = np.sqrt(np.maximum(a * a - p, 0.0))
        if band is Band.LOWER:
            w2 = np.where(a + root > 0, p / np.where(a + root > 0, a + root, 1.0), 0.0)
        else:
            w2 = a + root
        return np.sqrt(w2)


def omega_of_kappa(model: DispersionModel, kappa, band: Band = Band.LOWER):
    """Frequency on ``band`` at wavevector ``kappa``."""
    band = model._check_band(band)
    lo, hi = model.kappa_range(band)
    k = np.asarray(kappa, dtype=float)
    if isinstance(model, Modulated):
        lo, hi = 0.0, math.pi
    if np.any(k < lo - 1e-12) or np.any(k > hi + 1e-12):
        raise ValueError(f"kappa outside [{lo:.6g}, {hi:.6g}]")
    out = model.omega(k, band)
    return float(out) if np.ndim(out) == 0 else out


def kappa_of_omega(model: DispersionModel, omega: float) -> float:
    """Wavevector of a propagating wave (extended zone for two-band models)."""
    return float(model.kappa(omega))


def phase_mismatch(model: DispersionModel, omega_p: float, delta: float) -> float:
    """``kappa_p - kappa_s - kappa_i`` for ``omega_s,i = (1 +- delta) omega_p / 2``."""
    ks = kappa_of_omega(model, (1 + delta) * omega_p / 2)
    ki = kappa_of_omega(model, (1 - delta) * omega_p / 2)
    return kappa_of_omega(model, omega_p) - ks - ki


def upconversion_threshold(omega0: float = 1.0) -> float:
    """Lowest pump frequency at which the degenerate signal cannot up-convert."""
    return 4 * omega0 / 3


def classify_up_conversion_model(model: DispersionModel, omega_p: float, delta: float) -> UpConversionRegion:
    """Which of pump, signal and idler can transfer power to ``omega + omega_p``.

    A process is allowed when the up-converted frequency propagates. For the
    uniform chain this reproduces the cutoff-based regions exactly; for
    two-band chains a frequency inside a gap also counts as blocked.
    """
    if model.propagates(2 * omega_p):
        return UpConversionRegion.ALL_CONVERTIBLE
    ws = (1 + delta) * omega_p / 2
    wi = (1 - delta) * omega_p / 2
    n_conv = int(model.propagates(ws + omega_p)) + int(model.propagates(wi + omega_p))
    return [
        UpConversionRegion.ALL_BLOCKED,
        UpConversionRegion.ONE_OF_SIGNAL_IDLER_CONVERTIBLE,
        UpConversionRegion.SIGNAL_IDLER_CONVERTIBLE,
    ][n_conv]


def classify_up_conversion(omega_p_over_omega0: float, delta: float) -> UpConversionRegion:
    """Up-conversion region of the uniform chain (frequencies in units of ``omega0``)."""
    wp = omega_p_over_omega0
    if not 0 < wp < 2:
        raise ValueError("pump must lie inside the band (0, 2 omega0)")
    if wp <= 1:
        return UpConversionRegion.ALL_CONVERTIBLE
    blocked_s = (1 + delta) * wp / 2 + wp > 2
    blocked_i = (1 - delta) * wp / 2 + wp > 2
    if blocked_s and blocked_i:
        return UpConversionRegion.ALL_BLOCKED
    if blocked_s or blocked_i:
        return UpConversionRegion.ONE_OF_SIGNAL_IDLER_CONVERTIBLE
    return UpConversionRegion.SIGNAL_IDLER_CONVERTIBLE


def no_upconversion_bandwidth(omega_p_over_omega0: float) -> float:
    """Half-width in ``delta`` of the band free of signal/idler up-conversion."""
    return max(0.0, 3 * (1 - upconversion_threshold() / omega_p_over_omega0))


def _lc_sweet_spot_residual(wp, omega1, nu, omega0):
    lhs = 3 * (1 - nu) / (wp**2 - omega1**2)
    rhs = (4 * omega1**2 - nu * wp**2) ** 2 / (16 * omega0**2 * omega1**2 * (4 * omega1**2 - wp**2))
    return lhs - rhs


def sweet_spot_lc(omega1: float, nu: float, omega0: float = 1.0, n_scan: int = 2000) -> float:
    """Pump frequency in the upper band phase matched to the degenerate signal.

    Solves ``omega_-(kappa_p/2) = omega_+(kappa_p)/2`` in its explicit
    frequency form, then keeps the root whose wavevectors satisfy
    ``kappa_s = kappa_p/2``.
    """
    if not 0 < nu < 1:
        raise NoSweetSpot("nu must lie strictly between 0 and 1")
    model = LcOscillator(omega0, omega1, nu)
    w_lo, w_hi = model.band_edges(Band.UPPER)
    w_hi = min(w_hi, 2 * omega1)
    if not w_hi > w_lo:
        raise NoSweetSpot("upper band lies above 2*omega1")
    eps = 1e-12 * omega0
    grid = np.linspace(w_lo + eps, w_hi - eps, n_scan)
    vals = _lc_sweet_spot_residual(grid, omega1, nu, omega0)
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for i in idx:
        wp = brentq(_lc_sweet_spot_residual, grid[i], grid[i + 1], args=(omega1, nu, omega0),
                    xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if not model.propagates(wp / 2) or model.band_of(wp / 2) is not Band.LOWER:
            continue
        kp = kappa_of_omega(model, wp)
        ks = kappa_of_omega(model, wp / 2)
        if abs(ks - kp / 2) < 1e-8:
            return float(wp)
    raise NoSweetSpot(f"no sweet spot for omega1 = {omega1}, nu = {nu}")


@dataclass(frozen=True)
class ModulatedSweetSpot:
    omega_p: float
    kappa_p: float
    sin2_half_kappa: float


def sweet_spot_modulated(omega1: float, omega2: float, verify: bool = True) -> ModulatedSweetSpot:
    """Closed-form sweet spot of the modulated chain.

    With ``verify`` the pump must sit in the upper band and the degenerate
    signal must satisfy ``kappa_s = kappa_p/2`` to 1e-10; the degenerate case
    ``omega1 == omega2`` has no gap and fails this check.
    """
    s = omega1**2 + omega2**2 - math.sqrt(3) * omega1 * omega2
    sin2 = math.sqrt(3) * s / (omega1 * omega2)
    if sin2 > 1:
        raise NoSweetSpot(f"sin^2(kappa_p/2) = {sin2:.6g} > 1")
    wp = math.sqrt(8 * s)
    kp = 2 * math.asin(math.sqrt(sin2))
    spot = ModulatedSweetSpot(omega_p=wp, kappa_p=kp, sin2_half_kappa=sin2)
    if verify:
        model = Modulated(omega1, omega2)
        try:
            band_p = model.band_of(wp)
            band_s = model.band_of(wp / 2)
        except (InGap, AboveCutoff) as exc:
            raise NoSweetSpot(str(exc)) from exc
        if band_p is not Band.UPPER or band_s is not Band.LOWER:
            raise NoSweetSpot("pump and signal are not on opposite sides of the gap")
        ks = kappa_of_omega(model, wp / 2)
        kp_model = kappa_of_omega(model, wp)
        if abs(ks - kp / 2) > 1e-10 or abs(kp_model - kp) > 1e-10:
            raise NoSweetSpot("closed form failed back-substitution")
    return spot


def band_structure(model: DispersionModel, n: int = 201) -> dict[str, np.ndarray]:
    """Band table on a uniform kappa grid; absent bands are NaN.

    :class:`Modulated` is tabulated on the reduced zone ``[0, pi/2]``.
    """
    hi = math.pi / 2 if isinstance(model, Modulated) else math.pi
    kappa = np.linspace(0.0, hi, n)
    lower = model.omega(kappa, Band.LOWER)
    if Band.UPPER in model.bands:
        upper = model.omega(kappa, Band.UPPER)
    else:
        upper = np.full(n, np.nan)
    return {"kappa": kappa, "omega_lower": lower, "omega_upper": upper}


def write_band_csv(model: DispersionModel, path, n: int = 201) -> Path:
    table = band_structure(model, n)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kappa", "omega_lower", "omega_upper"])
        for row in zip(table["kappa"], table["omega_lower"], table["omega_upper"]):
            writer.writerow([repr(float(v)) if np.isfinite(v) else "" for v in row])
    return path


def model_from_dict(cfg: dict) -> DispersionModel:
    kind = cfg.get("model", "uniform")
    params = {k: v for k, v in cfg.items() if k != "model"}
    cls = {
        "uniform": Uniform,
        "uniform_cj": UniformWithCJ,
        "lc_oscillator": LcOscillator,
        "modulated": Modulated,
    }.get(kind)
    if cls is None:
        raise ValueError(f"unknown dispersion model {kind!r}")
    return cls(**params)


def model_to_dict(model: DispersionModel) -> dict:
    name = {
        Uniform: "uniform",
        UniformWithCJ: "uniform_cj",
        LcOscillator: "lc_oscillator",
        Modulated: "modulated",
    }[type(model)]
    out = {"model": name}
    out.update({k: getattr(model, k) for k in model.__dataclass_fields__})
    return out
