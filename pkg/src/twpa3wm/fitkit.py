"""Fitting measured gain traces with the multimode ladder and converting fit parameters to pump units.

The forward model is the end-of-chain signal gain ``G(xi_max, delta; mu)``
from a pump ladder with ``M`` harmonics. One integration per ``mu`` covers
every detuning of the trace at once; ``xi_max`` is then read from the dense
solution, so the search is effectively one-dimensional in ``mu``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .device_models import PHI0
from .dispersion import UniformWithCJ, kappa_of_omega
from .errors import InsufficientData, NoSolution, NonMonotonicFrequency, ParseError
from .multimode import GainSurface, critical_harmonics

MIN_ROWS = 10
M_CAP = 12
MW = 1e-3


@dataclass
class MeasuredTrace:
    freq_hz: np.ndarray
    gain_db: np.ndarray
    pump_hz: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freq_hz = np.asarray(self.freq_hz, float)
        self.gain_db = np.asarray(self.gain_db, float)
        if self.freq_hz.shape != self.gain_db.shape or self.freq_hz.ndim != 1:
            raise ParseError("frequency and gain columns must be 1-D and equally long")
        if not np.all(np.isfinite(self.gain_db)) or not np.all(np.isfinite(self.freq_hz)):
            raise ParseError("trace contains non-finite values")
        bad = np.nonzero(np.diff(self.freq_hz) <= 0)[0]
        if len(bad):
            raise NonMonotonicFrequency(f"frequency not increasing at data row {bad[0] + 2}")
        if not self.pump_hz > 0:
            raise ParseError("pump frequency must be positive")

    @property
    def delta(self) -> np.ndarray:
        return 2 * self.freq_hz / self.pump_hz - 1

    def usable(self) -> np.ndarray:
        return np.abs(self.delta) < 1


def load_trace(path, pump_hz: float | None = None, fmt: str = "csv", metadata: dict | None = None) -> MeasuredTrace:
    """Read ``freq_hz,gain_db`` rows; a ``# pump_hz=<value>`` comment line may carry the pump.

    Row numbers in errors count physical lines of the file, starting at 1.
    """
    if fmt != "csv":
        raise ParseError(f"unsupported trace format {fmt!r}")
    path = Path(path)
    meta = dict(metadata or {})
    freqs, gains = [], []
    header_seen = False
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            first = row[0].strip()
            if first.startswith("#"):
                body = ",".join(row).lstrip("#").strip()
                for item in body.split(","):
                    if "=" in item:
                        k, v = item.split("=", 1)
                        meta[k.strip()] = v.strip()
                continue
            if len(row) < 2:
                raise ParseError(f"row {lineno}: expected two columns")
            try:
                f, g = float(row[0]), float(row[1])
            except ValueError:
                if not freqs and not header_seen:
                    header_seen = True
                    continue
                raise ParseError(f"row {lineno}: not numeric: {row[:2]}") from None
            if not (math.isfinite(f) and math.isfinite(g)):
                raise ParseError(f"row {lineno}: non-finite value")
            if freqs and f <= freqs[-1]:
                raise NonMonotonicFrequency(f"row {lineno}: frequency {f} not above {freqs[-1]}")
            freqs.append(f)
            gains.append(g)
    if pump_hz is None:
        if "pump_hz" not in meta:
            raise ParseError("pump frequency missing: pass pump_hz or add a '# pump_hz=' line")
        pump_hz = float(meta["pump_hz"])
    return MeasuredTrace(np.array(freqs), np.array(gains), float(pump_hz), meta)


def write_trace(trace: MeasuredTrace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# pump_hz={trace.pump_hz!r}\n")
        w = csv.writer(fh)
        w.writerow(["freq_hz", "gain_db"])
        for f, g in zip(trace.freq_hz, trace.gain_db):
            w.writerow([repr(float(f)), repr(float(g))])
    return path


def sample_trace_path(name: str) -> Path:
    """Path of a bundled sample trace (``"low_power"`` or ``"high_power"``)."""
    return Path(str(resources.files("twpa3wm") / "data" / f"snail_{name}.csv"))


@lru_cache(maxsize=256)
def _m_crit(mu_key: float) -> int:
    return min(critical_harmonics(mu_key), M_CAP)


def harmonics_for(mu: float) -> int:
    """``M_crit(mu)`` capped for runtime; ``mu`` is rounded to 3 significant digits for caching."""
    return _m_crit(float(f"{mu:.3g}"))


def model_gain_db(mu: float, xi_max: float, deltas, M: int | None = None) -> np.ndarray:
    M = harmonics_for(mu) if M is None else M
    surf = GainSurface(mu, deltas, M, xi_max)
    return surf.gain_db(xi_max)[0]


def synthetic_trace(mu: float, xi_max: float, pump_hz: float, freq_hz, M: int | None = None,
                    noise_db: float = 0.0, seed: int = 0) -> MeasuredTrace:
    """Model trace with optional Gaussian noise in dB."""
    freq_hz = np.asarray(freq_hz, float)
    deltas = 2 * freq_hz / pump_hz - 1
    g = model_gain_db(mu, xi_max, deltas, M)
    if noise_db:
        g = g + np.random.default_rng(seed).normal(0.0, noise_db, len(g))
    return MeasuredTrace(freq_hz, g, pump_hz, {"mu": mu, "xi_max": xi_max, "noise_db": noise_db})


@dataclass
class FitResult:
    mu: float
    xi_max: float
    residual: float
    M: int
    n_cells: int | None = None
    epsilon: float | None = None
    kpa: float | None = None
    theta_p: float | None = None
    I_p: float | None = None
    P_p: float | None = None
    omega_bar0: float | None = None
    freq_hz: np.ndarray | None = field(default=None, repr=False)
    measured_db: np.ndarray | None = field(default=None, repr=False)
    model_db: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("freq_hz", "measured_db", "model_db"):
            d.pop(k)
        return d

    def write_overlay_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_hz", "measured_db", "model_db"])
            for row in zip(self.freq_hz, self.measured_db, self.model_db):
                w.writerow([repr(float(v)) for v in row])
        return path


class _Objective:
    """Best ``xi`` and its mean squared dB error for a given ``mu``."""

    def __init__(self, deltas, gains, xi_lo, xi_hi, M):
        self.deltas, self.gains = deltas, gains
        self.xi_lo, self.xi_hi, self.M = xi_lo, xi_hi, M
        self.cache = {}

    def surface(self, mu):
        M = harmonics_for(mu) if self.M is None else self.M
        return GainSurface(mu, self.deltas, M, self.xi_hi), M

    def best_xi(self, mu, xi_grid):
        key = float(mu)
        if key in self.cache:
            return self.cache[key]
        surf, M = self.surface(mu)
        err = np.mean((surf.gain_db(xi_grid) - self.gains[None, :]) ** 2, axis=1)
        j = int(np.argmin(err))
        lo = xi_grid[max(j - 1, 0)]
        hi = xi_grid[min(j + 1, len(xi_grid) - 1)]
        f = lambda x: float(np.mean((surf.gain_db(x)[0] - self.gains) ** 2))
        if hi > lo:
            r = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-7 * hi})
            best = (r.x, r.fun) if r.fun < err[j] else (xi_grid[j], err[j])
        else:
            best = (xi_grid[j], err[j])
        out = (float(best[0]), float(best[1]), M)
        self.cache[key] = out
        return out


def fit_gain_curve(trace: MeasuredTrace, M: int | None = None, mu_grid=None, xi_grid=None,
                   max_points: int = 80) -> FitResult:
    """Least-squares (dB) fit of ``(mu, xi_max)``: grid over ``mu``, continuous ``xi``, then a bounded refine in ``log mu``.

    ``M=None`` uses ``M_crit(mu)`` capped at 12. Traces longer than
    ``max_points`` usable rows are thinned evenly for the search; the
    returned overlay covers every usable row.
    """
    use = trace.usable()
    if use.sum() < MIN_ROWS:
        raise InsufficientData(f"{int(use.sum())} usable rows, need {MIN_ROWS}")
    deltas_all = trace.delta[use]
    gains_all = trace.gain_db[use]
    idx = np.unique(np.linspace(0, len(deltas_all) - 1, min(max_points, len(deltas_all))).round().astype(int))
    deltas, gains = deltas_all[idx], gains_all[idx]

    mu_grid = np.geomspace(1.0, 20.0, 50) if mu_grid is None else np.asarray(mu_grid, float)
    xi_grid = np.geomspace(1.0, 10.0, 50) if xi_grid is None else np.asarray(xi_grid, float)
    xi_fine = np.linspace(xi_grid.min(), xi_grid.max(), 2000)
    obj = _Objective(deltas, gains, xi_grid.min(), xi_grid.max(), M)

    scores = [obj.best_xi(mu, xi_fine)[1] for mu in mu_grid]
    j = int(np.argmin(scores))
    lo = mu_grid[max(j - 1, 0)]
    hi = mu_grid[min(j + 1, len(mu_grid) - 1)]
    best_mu = float(mu_grid[j])
    if hi > lo:
        r = minimize_scalar(lambda lm: obj.best_xi(math.exp(lm), xi_fine)[1],
                            bounds=(math.log(lo), math.log(hi)), method="bounded",
                            options={"xatol": 1e-5})
        if r.fun <= scores[j]:
            best_mu = float(math.exp(r.x))
    xi, _, M_used = obj.best_xi(best_mu, xi_fine)
    model = GainSurface(best_mu, deltas_all, M_used, xi).gain_db(xi)[0]
    resid = float(np.mean((model - gains_all) ** 2))
    return FitResult(
        mu=best_mu, xi_max=xi, residual=resid, M=M_used,
        freq_hz=trace.freq_hz[use], measured_db=gains_all, model_db=model,
    )


# ---- physical units ----------------------------------------------------------


@dataclass(frozen=True)
class SnailDevice:
    """Nominal constants of a SNAIL chain used to convert fit parameters."""

    n_cells: int = 440
    chi3: float = 0.82
    omega_s: float = 2 * math.pi * 20.6e9
    C: float = 154e-15
    CJ: float = 17.9e-15
    Z0: float = 50.0
    pump_hz: float = 8.5e9

    @property
    def cj_over_c(self) -> float:
        return self.CJ / self.C


def mismatch_cj(kpa: float, cj_over_c: float) -> float:
    """``kappa_p - 2 kappa_s`` at degeneracy on the C_J-exact chain; independent of the frequency scale."""
    model = UniformWithCJ(1.0, cj_over_c)
    w = float(model.omega(kpa))
    return kpa - 2 * kappa_of_omega(model, w / 2)


def theoretical_kpa(omega_p: float, omega_s: float, cj_over_c: float) -> float:
    """Pump wavevector from the nominal dispersion, ``omega_s`` as the band parameter."""
    return kappa_of_omega(UniformWithCJ(omega_s, cj_over_c), omega_p)


def pump_current(theta_p: float, C: float, omega_s: float) -> float:
    return PHI0 / (2 * math.pi) * C * omega_s**2 * theta_p


def power_dbm(current: float, Z0: float = 50.0) -> float:
    return 10 * math.log10(current**2 * Z0 / 2 / MW)


@dataclass(frozen=True)
class PhysicalParams:
    epsilon: float
    kpa: float
    theta_p: float
    I_p: float
    P_p: float
    omega_bar0: float
    mu: float
    xi_max: float


def derive_physical_params(mu: float, xi_max: float, n_cells: int, omega_p: float, C: float, CJ: float,
                           omega_bar0_free: bool, chi3: float, omega_s: float | None = None,
                           Z0: float = 50.0) -> PhysicalParams:
    """Pumping strength, pump wavevector and pump current behind a fitted ``(mu, xi_max)``.

    With ``omega_bar0_free`` the band parameter is adjusted so that both
    ``xi_max = eps kpa N/4`` and ``mu = 32 Delta(kpa)/(eps kpa)`` hold. Otherwise
    ``kpa`` follows from ``omega_s`` and only ``xi_max`` is matched; the
    returned ``mu`` is then the implied value.
    """
    if not (mu > 0 and xi_max > 0 and n_cells > 0):
        raise ValueError("mu, xi_max and n_cells must be positive")
    r = CJ / C
    if omega_bar0_free:
        target = mu * xi_max / (8 * n_cells)

        def h(k):
            return mismatch_cj(k, r) - target

        k_hi = math.pi * (1 - 1e-9)
        ks = np.linspace(1e-3, k_hi, 400)
        vals = [h(k) for k in ks]
        root = None
        for a, b, fa, fb in zip(ks[:-1], ks[1:], vals[:-1], vals[1:]):
            if fa == 0:
                root = a
                break
            if fa * fb < 0:
                root = brentq(h, a, b, xtol=1e-14)
                break
        if root is None:
            raise NoSolution(f"no kpa in (0, pi) gives Delta = {target:.4g}")
        kpa = float(root)
        w_unit = float(UniformWithCJ(1.0, r).omega(kpa))
        omega_bar0 = omega_p / w_unit
    else:
        if omega_s is None:
            raise ValueError("omega_s is required when the band parameter is fixed")
        kpa = theoretical_kpa(omega_p, omega_s, r)
        omega_bar0 = omega_s
    eps = 4 * xi_max / (kpa * n_cells)
    mu_out = mu if omega_bar0_free else 32 * mismatch_cj(kpa, r) / (eps * kpa)
    theta = eps / abs(chi3)
    if omega_s is None:
        omega_s = omega_bar0
    ip = pump_current(theta, C, omega_s)
    return PhysicalParams(eps, kpa, theta, ip, power_dbm(ip, Z0), omega_bar0, mu_out, xi_max)


def scaled_from_physical(epsilon: float, kpa: float, n_cells: int, cj_over_c: float) -> tuple[float, float]:
    """Inverse map ``(eps, kpa) -> (mu, xi_max)``."""
    return 32 * mismatch_cj(kpa, cj_over_c) / (epsilon * kpa), epsilon * kpa * n_cells / 4


def fit_and_derive(trace: MeasuredTrace, device: SnailDevice = SnailDevice(), **fit_kw) -> FitResult:
    res = fit_gain_curve(trace, **fit_kw)
    p = derive_physical_params(res.mu, res.xi_max, device.n_cells, 2 * math.pi * trace.pump_hz,
                               device.C, device.CJ, True, device.chi3, device.omega_s, device.Z0)
    res.n_cells = device.n_cells
    res.epsilon, res.kpa, res.theta_p = p.epsilon, p.kpa, p.theta_p
    res.I_p, res.P_p, res.omega_bar0 = p.I_p, p.P_p, p.omega_bar0
    return res
