"""Time-domain integration of the discrete chain, used to cross-check the mode solvers.

Node equation, with link phase ``theta_n = phi_n - phi_{n-1}`` and link
current ``I(theta) = theta - (chi3/2) theta^2``::

    phi_n'' / omega0^2 = I(theta_{n+1}) - I(theta_n)

The nonlinear section holds nodes ``0 .. N``. With ``ABSORBING`` termination
it is embedded between linear buffers whose damping grows quadratically
towards the outer ends; tones are launched by a point force inside the left
buffer. ``MATCHED`` and ``OPEN`` terminate the nonlinear section directly.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .device_models import CellCoefficients
from .errors import ConfigError, InstabilityDetected


class Termination(str, enum.Enum):
    MATCHED = "matched"
    OPEN = "open"
    ABSORBING = "absorbing"


@dataclass(frozen=True)
class Tone:
    """Incident travelling wave ``Re(amplitude e^{i(kappa n - omega t + phase)})``."""

    omega: float
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class ChainSim:
    n_cells: int
    coeffs: CellCoefficients
    drive: tuple
    duration: float
    termination: Termination = Termination.ABSORBING
    sample_rate: int = 64
    ramp_periods: float = 10.0
    buffer_cells: int = 200
    min_transits: float = 50.0
    analysis_omegas: tuple = ()
    record_nodes: tuple = ()

    def __post_init__(self):
        if self.n_cells < 8:
            raise ConfigError("n_cells must be at least 8")
        object.__setattr__(self, "drive", tuple(self.drive))
        object.__setattr__(self, "termination", Termination(self.termination))
        w0 = self.coeffs.omega0
        for t in self.drive:
            if not 0 < t.omega < 2 * w0:
                raise ConfigError("drive frequencies must lie inside the band (0, 2 omega0)")
        if self.drive and self.transits() < self.min_transits:
            raise ConfigError(
                f"duration covers {self.transits():.1f} transits, need {self.min_transits}"
            )

    @property
    def lowest_omega(self) -> float:
        return min(t.omega for t in self.drive)

    @property
    def highest_omega(self) -> float:
        return max(t.omega for t in self.drive) if self.drive else self.coeffs.omega0

    def duration_time(self) -> float:
        """Run length in time units; ``duration`` counts periods of the lowest tone."""
        if not self.drive:
            return self.duration * 2 * math.pi / self.coeffs.omega0
        return self.duration * 2 * math.pi / self.lowest_omega

    def transits(self) -> float:
        w0 = self.coeffs.omega0
        vg = w0 * math.sqrt(1 - (self.lowest_omega / (2 * w0)) ** 2)
        return self.duration_time() * vg / self.n_cells

    def dt(self) -> float:
        return 2 * math.pi / (self.sample_rate * self.highest_omega)


@dataclass
class ChainResult:
    sim: ChainSim
    omegas: np.ndarray
    amplitudes: np.ndarray
    """Complex amplitudes, shape ``(len(omegas), N+1)``, for nodes ``0 .. N``."""
    flux: np.ndarray
    """Time-averaged energy flux through links ``1 .. N`` (rightward positive)."""
    max_theta: float
    times: np.ndarray
    records: np.ndarray
    window: tuple

    def amplitude(self, omega: float, node: int | None = None):
        j = int(np.argmin(np.abs(self.omegas - omega)))
        if abs(self.omegas[j] - omega) > 1e-12 * max(1.0, omega):
            raise KeyError(f"omega {omega} was not analysed")
        a = self.amplitudes[j]
        return a if node is None else a[node]

    def summary(self) -> dict:
        out = {
            "n_cells": self.sim.n_cells,
            "termination": self.sim.termination.value,
            "max_theta": self.max_theta,
            "window": list(self.window),
            "tones": [],
        }
        for w, a in zip(self.omegas, self.amplitudes):
            out["tones"].append({
                "omega": float(w),
                "abs_in": float(abs(a[0])),
                "abs_out": float(abs(a[-1])),
            })
        return out

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def _layout(sim: ChainSim):
    n = sim.n_cells
    if sim.termination is Termination.ABSORBING:
        b = sim.buffer_cells
        n_nodes = n + 1 + 2 * b
        first = b
    else:
        n_nodes = n + 1
        first = 0
    return n_nodes, first


def simulate_chain(sim: ChainSim) -> ChainResult:
    """Fixed-step RK4 run with on-the-fly windowed projections over the last quarter."""
    w0 = sim.coeffs.omega0
    w02 = w0 * w0
    c3 = sim.coeffs.chi3 / 2
    n_nodes, first = _layout(sim)
    last = first + sim.n_cells
    dt = sim.dt()
    t_end = sim.duration_time()
    n_steps = int(math.ceil(t_end / dt))
    t_ramp = sim.ramp_periods * 2 * math.pi / (sim.lowest_omega if sim.drive else w0)

    # nonlinearity lives on links inside the chain: link j joins node j-1 and j
    nl = np.zeros(n_nodes + 1)
    nl[first + 1:last + 1] = c3

    gamma = np.zeros(n_nodes)
    if sim.termination is Termination.ABSORBING:
        b = sim.buffer_cells
        ramp = (np.arange(1, b + 1) / b) ** 2 * w0
        gamma[:b] = ramp[::-1]
        gamma[last + 1:] = ramp

    tone_w = np.array([t.omega for t in sim.drive])
    tone_a = np.array([t.amplitude * np.exp(1j * t.phase) for t in sim.drive], dtype=complex)
    kap = 2 * np.arcsin(tone_w / (2 * w0)) if len(tone_w) else np.zeros(0)

    if sim.termination is Termination.ABSORBING:
        src = first - 10
        # point force launching amplitude A at the source node; shift phase so it is A at node `first`
        force_c = -2j * np.sin(kap) * tone_a * np.exp(-1j * kap * (first - src)) * w02
    else:
        src = first

    def envelope(t):
        if t >= t_ramp:
            return 1.0
        return 0.5 * (1 - math.cos(math.pi * t / t_ramp))

    def incident_velocity(t):
        # d/dt of Re(A e^{-i w t}) at node 0
        return float(np.sum((tone_a * (-1j * tone_w) * np.exp(-1j * tone_w * t)).real)) * envelope(t)

    def accel(t, phi, vel):
        theta = np.empty(n_nodes + 1)
        theta[1:-1] = phi[1:] - phi[:-1]
        theta[0] = 0.0
        theta[-1] = 0.0
        cur = theta - nl * theta * theta
        a = w02 * (cur[1:] - cur[:-1]) - gamma * vel
        if sim.termination is Termination.ABSORBING:
            if len(tone_w):
                a[src] += float(np.sum((force_c * np.exp(-1j * tone_w * t)).real)) * envelope(t)
        else:
            # links outside the section carry no current; ends are resistive when matched
            if sim.termination is Termination.MATCHED:
                a[first] += w0 * (2 * incident_velocity(t) - vel[first])
                a[last] += -w0 * vel[last]
            else:
                a[first] += w0 * 2 * incident_velocity(t)
        return a

    omegas = np.array(sorted(set([float(w) for w in tone_w] + [float(w) for w in sim.analysis_omegas])))
    t_win0 = 0.75 * n_steps * dt
    i_win0 = int(math.ceil(t_win0 / dt))
    n_win = n_steps - i_win0 + 1
    hann = np.hanning(n_win + 2)[1:-1]
    acc = np.zeros((len(omegas), sim.n_cells + 1), dtype=complex)
    flux_acc = np.zeros(sim.n_cells)
    wsum = 0.0

    rec_nodes = np.array([first + int(k) for k in sim.record_nodes], dtype=int)
    rec_t, rec_v = [], []

    phi = np.zeros(n_nodes)
    vel = np.zeros(n_nodes)
    max_theta = 0.0
    t = 0.0
    h = dt
    for step in range(n_steps + 1):
        if step >= i_win0:
            k = step - i_win0
            w = hann[k]
            seg = phi[first:last + 1]
            acc += w * np.exp(1j * omegas * t)[:, None] * seg[None, :]
            wsum += w
            th = seg[1:] - seg[:-1]
            vv = vel[first:last + 1]
            flux_acc += -th * 0.5 * (vv[1:] + vv[:-1])
        if len(rec_nodes):
            rec_t.append(t)
            rec_v.append(phi[rec_nodes].copy())
        if step == n_steps:
            break
        k1v = accel(t, phi, vel)
        k1x = vel
        k2x = vel + 0.5 * h * k1v
        k2v = accel(t + 0.5 * h, phi + 0.5 * h * k1x, k2x)
        k3x = vel + 0.5 * h * k2v
        k3v = accel(t + 0.5 * h, phi + 0.5 * h * k2x, k3x)
        k4x = vel + h * k3v
        k4v = accel(t + h, phi + h * k3x, k4x)
        phi = phi + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vel = vel + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        t = (step + 1) * h
        if step % 64 == 0:
            seg = phi[first:last + 1]
            mt = float(np.max(np.abs(np.diff(seg)))) if np.all(np.isfinite(seg)) else math.inf
            max_theta = max(max_theta, mt)
            if mt > 1:
                raise InstabilityDetected(f"|theta| reached {mt:.3g} at t={t:.1f}")

    amps = 2 * acc / wsum if wsum else acc
    return ChainResult(
        sim=sim,
        omegas=omegas,
        amplitudes=amps,
        flux=flux_acc / n_win,
        max_theta=max_theta,
        times=np.array(rec_t),
        records=np.array(rec_v).T if rec_v else np.zeros((0, 0)),
        window=(t_win0, n_steps * dt),
    )


def measured_wavenumber(result: ChainResult, omega: float, skip: int = 4) -> float:
    """Phase slope of the steady-state amplitude along the chain, in rad/cell."""
    a = result.amplitude(omega)[skip:len(result.amplitude(omega)) - skip]
    ph = np.unwrap(np.angle(a))
    n = np.arange(len(a))
    return float(np.polyfit(n, ph, 1)[0])


@dataclass(frozen=True)
class ReflectionReport:
    omega: float
    forward: complex
    backward: complex

    @property
    def ratio(self) -> float:
        return abs(self.backward) / abs(self.forward)


def reflection_report(result: ChainResult, omega: float, skip: int = 4) -> ReflectionReport:
    """Least-squares split of the amplitude profile into forward and backward waves."""
    w0 = result.sim.coeffs.omega0
    kap = 2 * math.asin(omega / (2 * w0))
    a = result.amplitude(omega)
    n = np.arange(len(a))[skip:len(a) - skip]
    basis = np.stack([np.exp(1j * kap * n), np.exp(-1j * kap * n)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, a[n], rcond=None)
    return ReflectionReport(omega, complex(coef[0]), complex(coef[1]))


@dataclass(frozen=True)
class GainMeasurement:
    G_dB: float
    on: ChainResult = field(repr=False)
    off: ChainResult = field(repr=False)


def extract_gain(sim_on: ChainSim, omega_s: float, sim_off: ChainSim | None = None) -> GainMeasurement:
    """Signal power gain at the last chain node, pump on over pump off.

    The pump-off run keeps every tone whose frequency differs from the
    strongest one; it is derived from ``sim_on`` unless given.
    """
    if sim_off is None:
        pump = max(sim_on.drive, key=lambda t: t.amplitude)
        rest = tuple(t for t in sim_on.drive if t is not pump)
        sim_off = ChainSim(**{**sim_on.__dict__, "drive": rest})
    extra = tuple(sorted(set(sim_on.analysis_omegas) | {omega_s}))
    on = simulate_chain(ChainSim(**{**sim_on.__dict__, "analysis_omegas": extra}))
    off = simulate_chain(ChainSim(**{**sim_off.__dict__, "analysis_omegas": extra}))
    g = abs(on.amplitude(omega_s, -1)) ** 2 / abs(off.amplitude(omega_s, -1)) ** 2
    return GainMeasurement(10 * math.log10(g), on, off)
