"""Command-line entry point: ``twpa3wm <command> [--config FILE | --recipe NAME] [--out DIR]``.

Every command reads one JSON document, validates it against a schema
(unknown keys are rejected) and writes tabular results plus a
``manifest.json`` that echoes the validated input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .device_models import PHI0_REDUCED, DeviceSpec, cell_coefficients
from .dispersion import (
    LcOscillator,
    Modulated,
    Uniform,
    kappa_of_omega,
    model_from_dict,
    sweet_spot_lc,
    sweet_spot_modulated,
    band_structure,
)
from .errors import AboveCutoff, ConfigError, InGap, NoConvergence, TwpaError
from .fitkit import (
    SnailDevice,
    derive_physical_params,
    fit_and_derive,
    load_trace,
    sample_trace_path,
    theoretical_kpa,
)
from .multimode import (
    ScaledPumpSystem,
    critical_harmonics,
    integrate_4wm_third_harmonic,
    integrate_pump_harmonics,
    integrate_signal_idler,
)
from .threemode import gain_approx, gain_band, gain_cutoff_frequency, gain_exact, power_gain_db

COMMANDS = ("device", "gain3", "band", "multimode", "fit", "oracle")

# ---- schemas -----------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_RANGE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["start", "stop", "num"],
    "properties": {"start": _NUM, "stop": _NUM, "num": {"type": "integer", "minimum": 1}},
}
_NUM_OR_RANGE = {"oneOf": [_NUM, _RANGE]}
_DISPERSION = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "model": {"enum": ["uniform", "uniform_cj", "lc_oscillator", "modulated"]},
        "omega0": _POS,
        "cj_over_c": {"type": "number", "minimum": 0},
        "omega1": _POS,
        "omega2": _POS,
        "nu": _POS,
    },
}
_COMMON = {"command": {"enum": list(COMMANDS)}, "description": {"type": "string"}}

SCHEMAS = {
    "device": {
        "type": "object",
        "additionalProperties": False,
        "required": ["command", "device"],
        "properties": {
            **_COMMON,
            "device": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind", "C"],
                "properties": {
                    "kind": {"enum": ["junction", "rf_squid", "snail"]},
                    "C": _POS, "CJ": {"type": "number", "minimum": 0},
                    "LJ": _POS, "LJ1": _POS, "LJ2": _POS, "L": _POS,
                    "Ic": _POS, "Ic1": _POS, "Ic2": _POS,
                    "N_arm": {"type": "integer", "minimum": 1},
                    "idc_over_ic": _NUM, "phi_over_phi0": _NUM, "chi4": _NUM,
                },
            },
            "sweep": {
                "type": "object",
                "additionalProperties": False,
                "required": ["variable", "start", "stop", "num"],
                "properties": {
                    "variable": {"enum": ["phi_over_phi0", "idc_over_ic"]},
                    "start": _NUM, "stop": _NUM, "num": {"type": "integer", "minimum": 1},
                },
            },
        },
    },
    "gain3": {
        "type": "object",
        "additionalProperties": False,
        "required": ["command", "dispersion", "epsilons", "sweep"],
        "properties": {
            **_COMMON,
            "dispersion": _DISPERSION,
            "epsilons": {"type": "array", "minItems": 1, "items": _POS},
            "n_cells": {"type": "integer", "minimum": 1},
            "convention": {"enum": ["frequency", "wavevector"]},
            "approx": {"type": "boolean"},
            "sweep": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["pump", "detuning", "cutoff"]},
                    "omega_p": {"oneOf": [_NUM, _RANGE, {"const": "sweet_spot"}]},
                    "delta": _NUM_OR_RANGE,
                },
            },
        },
    },
    "band": {
        "type": "object",
        "additionalProperties": False,
        "required": ["command", "dispersion"],
        "properties": {
            **_COMMON,
            "dispersion": _DISPERSION,
            "n": {"type": "integer", "minimum": 2},
            "sweet_spot": {"type": "boolean"},
        },
    },
    "multimode": {
        "type": "object",
        "additionalProperties": False,
        "required": ["command", "task", "mu"],
        "properties": {
            **_COMMON,
            "task": {"enum": ["pump", "4wm", "signal", "mcrit"]},
            "mu": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
            "M": {"oneOf": [{"type": "integer", "minimum": 1}, {"const": "auto"},
                            {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}}]},
            "delta": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
            "xi_max": _POS,
            "xi_ref": _POS,
            "tol": _POS,
            "seed": _POS,
            "samples": {"type": "integer", "minimum": 2},
        },
    },
    "fit": {
        "type": "object",
        "additionalProperties": False,
        "required": ["command"],
        "properties": {
            **_COMMON,
            "traces": {
                "type": "array",
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "path": {"type": "string"},
                        "sample": {"enum": ["low_power", "high_power"]},
                        "pump_hz": _POS,
                        "label": {"type": "string"},
                    },
                },
            },
            "derive": {
                "type": "array",
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["mu", "xi_max"],
                    "properties": {"mu": _POS, "xi_max": _POS, "label": {"type": "string"},
                                   "nominal_pump_dbm": _NUM},
                },
            },
            "M": {"type": ["integer", "null"], "minimum": 1},
            "mu_grid": _RANGE,
            "xi_grid": _RANGE,
            "omega_bar0_free": {"type": "boolean"},
            "device": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "n_cells": {"type": "integer", "minimum": 1}, "chi3": _NUM, "f_s_hz": _POS,
                    "C": _POS, "CJ": {"type": "number", "minimum": 0}, "Z0": _POS, "pump_hz": _POS,
                },
            },
        },
    },
    "oracle": {
        "type": "object",
        "additionalProperties": False,
        "required": ["command", "checks"],
        "properties": {
            **_COMMON,
            "n_cells": {"type": "integer", "minimum": 8},
            "omega0": _POS,
            "chi3": _NUM,
            "coupled_mode_chi3": _NUM,
            "checks": {"type": "array", "minItems": 1,
                       "items": {"enum": ["wavenumber", "shg", "gain"]}},
            "wavenumber_omegas": {"type": "array", "items": _POS},
            "shg": {"type": "object", "additionalProperties": False,
                    "properties": {"omega_p": _POS, "theta_p": _POS}},
            "gain": {"type": "object", "additionalProperties": False,
                     "properties": {"omega_p": _POS, "epsilon": _POS, "delta": _NUM}},
            "transits": _POS,
        },
    },
}


# ---- helpers -----------------------------------------------------------------


def grid(spec) -> np.ndarray:
    if isinstance(spec, dict):
        return np.linspace(spec["start"], spec["stop"], spec["num"])
    return np.array([float(spec)])


def recipe_names() -> list[str]:
    root = resources.files("twpa3wm") / "recipes"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(path=None, recipe=None) -> dict:
    if (path is None) == (recipe is None):
        raise ConfigError("give exactly one of --config or --recipe")
    if recipe is not None:
        if recipe not in recipe_names():
            raise ConfigError(f"unknown recipe {recipe!r}; available: {', '.join(recipe_names())}")
        text = (resources.files("twpa3wm") / "recipes" / f"{recipe}.json").read_text()
        source = f"recipe {recipe}"
    else:
        text = Path(path).read_text()
        source = str(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def validate(cfg: dict, command: str) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object")
    if cfg.get("command", command) != command:
        raise ConfigError(f"configuration is for {cfg['command']!r}, not {command!r}")
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    return cfg


class Writer:
    """Serialised output of tables (CSV or JSON records) and JSON documents."""

    def __init__(self, out: Path, fmt: str):
        self.out = Path(out)
        self.fmt = fmt
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def table(self, name: str, header: list[str], rows) -> Path:
        rows = [[_cell(v) for v in r] for r in rows]
        if self.fmt == "json":
            path = self.out / f"{name}.json"
            path.write_text(json.dumps([dict(zip(header, r)) for r in rows], indent=1) + "\n")
        else:
            path = self.out / f"{name}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
        self.files.append(path.name)
        return path

    def document(self, name: str, obj) -> Path:
        path = self.out / f"{name}.json"
        path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_cell) + "\n")
        self.files.append(path.name)
        return path

    def manifest(self, command: str, cfg: dict, extra: dict | None = None) -> Path:
        doc = {"command": command, "version": __version__, "config": cfg, "outputs": sorted(self.files)}
        if extra:
            doc.update(extra)
        return self.document("manifest", doc)


def _cell(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("" if math.isnan(v) else repr(v))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _report_failures(failures):
    for f in failures:
        print("failed: " + ", ".join(f"{k}={v}" for k, v in f.items()), file=sys.stderr)


def _pmap(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ---- device ------------------------------------------------------------------


def _device_spec(d: dict, variable=None, value=None) -> DeviceSpec:
    d = dict(d)
    if variable is not None:
        d[variable] = value
    kind = d["kind"]
    if "Ic" in d:
        d.setdefault("LJ", PHI0_REDUCED / d.pop("Ic"))
    if "Ic1" in d:
        d.setdefault("LJ1", PHI0_REDUCED / d.pop("Ic1"))
    if "Ic2" in d:
        d.setdefault("LJ2", PHI0_REDUCED / d.pop("Ic2"))
    phi = d.pop("phi_over_phi0", 0.0)
    if kind == "junction" and phi:
        raise ConfigError("junction cells are current biased; use idc_over_ic")
    return DeviceSpec(F=2 * math.pi * phi, **d)


def cmd_device(cfg, w: Writer, threads: int) -> int:
    dev = cfg["device"]
    sweep = cfg.get("sweep")
    if sweep is None:
        variable, values = None, [None]
    else:
        variable, values = sweep["variable"], list(grid(sweep))
    rows, failures = [], []
    for v in values:
        try:
            c = cell_coefficients(_device_spec(dev, variable, v))
            rows.append([v if v is not None else "", c.theta0, c.omega0, c.omega0 / (2 * math.pi), c.chi3])
        except (TwpaError, ValueError) as exc:
            failures.append({"value": v, "error": str(exc)})
    w.table("device", [variable or "point", "theta0", "omega0_rad_s", "f0_hz", "chi3"], rows)
    w.manifest("device", cfg, {"failures": failures})
    for r in rows:
        print(" ".join(str(_cell(x)) for x in r))
    _report_failures(failures)
    return 1 if failures else 0


# ---- gain3 -------------------------------------------------------------------


def _resolve_pump(model, spec):
    if spec == "sweet_spot":
        if isinstance(model, LcOscillator):
            return np.array([sweet_spot_lc(model.omega1, model.nu, model.omega0)])
        if isinstance(model, Modulated):
            return np.array([sweet_spot_modulated(model.omega1, model.omega2, verify=False).omega_p])
        raise ConfigError("sweet_spot needs a two-band dispersion model")
    return grid(spec)


def _pump_sweep_job(args):
    model_cfg, eps, wp, delta, conv, approx = args
    model = model_from_dict(model_cfg)
    try:
        g = gain_exact(model, wp, delta, eps, conv).g
        flag = "ok"
    except InGap:
        g, flag = 0.0, "gap"
    except AboveCutoff:
        g, flag = 0.0, "above_cutoff"
    except NoConvergence:
        g, flag = math.nan, "no_convergence"
    ga = math.nan
    if approx and flag == "ok":
        ga = gain_approx(model, wp, delta, eps, conv)
    return g, ga, flag


def cmd_gain3(cfg, w: Writer, threads: int) -> int:
    model = model_from_dict(cfg["dispersion"])
    n_cells = cfg.get("n_cells", 50)
    conv = cfg.get("convention", "frequency")
    sweep = cfg["sweep"]
    kind = sweep["kind"]
    failures = []
    if kind == "cutoff":
        if not isinstance(model, Uniform):
            raise ConfigError("cutoff sweeps use the uniform model")
        rows = [[e, gain_cutoff_frequency(e, model.omega0)] for e in cfg["epsilons"]]
        w.table("cutoff", ["epsilon", "omega_crit"], rows)
    elif kind == "pump":
        pumps = _resolve_pump(model, sweep.get("omega_p", {"start": 0.02, "stop": 1.98, "num": 99}))
        delta = float(sweep.get("delta", 0.0))
        jobs = [(cfg["dispersion"], e, float(wp), delta, conv, cfg.get("approx", False))
                for e in cfg["epsilons"] for wp in pumps]
        res = _pmap(_pump_sweep_job, jobs, threads)
        rows = []
        for (_, e, wp, d, _, _), (g, ga, flag) in zip(jobs, res):
            rows.append([e, wp, d, g, ga, power_gain_db(g, n_cells) if g == g else math.nan, flag])
            if flag == "no_convergence":
                failures.append({"epsilon": e, "omega_p": wp, "flag": flag})
        w.table("gain_vs_pump", ["epsilon", "omega_p", "delta", "g", "g_approx", "G_dB", "flag"], rows)
    else:
        pumps = _resolve_pump(model, sweep.get("omega_p", "sweet_spot"))
        deltas = grid(sweep.get("delta", {"start": -0.99, "stop": 0.99, "num": 199}))
        rows, summary = [], []
        for e in cfg["epsilons"]:
            for wp in pumps:
                tr = gain_band(model, float(wp), e, n_cells, deltas, conv)
                lo, hi = tr.gain_interval()
                summary.append({"epsilon": e, "omega_p": float(wp), "delta_lo": lo, "delta_hi": hi,
                                "g_max": float(np.max(tr.g))})
                for d, ws, g, gdb, fl in zip(tr.delta, tr.omega_s, tr.g, tr.G_dB, tr.flags):
                    rows.append([e, float(wp), d, ws, g, gdb, fl])
        w.table("gain_vs_detuning", ["epsilon", "omega_p", "delta", "omega_s", "g", "G_dB", "flag"], rows)
        w.document("bandwidth", summary)
    w.manifest("gain3", cfg, {"failures": failures})
    _report_failures(failures)
    return 1 if failures else 0


# ---- band --------------------------------------------------------------------


def cmd_band(cfg, w: Writer, threads: int) -> int:
    model = model_from_dict(cfg["dispersion"])
    table = band_structure(model, cfg.get("n", 201))
    w.table("band", ["kappa", "omega_lower", "omega_upper"],
            zip(table["kappa"], table["omega_lower"], table["omega_upper"]))
    info = {"bands": {b.value: list(model.band_edges(b)) for b in model.bands}, "gaps": [list(g) for g in model.gaps]}
    if cfg.get("sweet_spot", False):
        if isinstance(model, LcOscillator):
            info["sweet_spot"] = {"omega_p": sweet_spot_lc(model.omega1, model.nu, model.omega0)}
        elif isinstance(model, Modulated):
            s = sweet_spot_modulated(model.omega1, model.omega2, verify=model.omega1 != model.omega2)
            info["sweet_spot"] = {"omega_p": s.omega_p, "kappa_p": s.kappa_p}
        else:
            raise ConfigError("sweet_spot needs a two-band dispersion model")
        print(f"sweet spot omega_p = {info['sweet_spot']['omega_p']:.6f}")
    w.document("band_summary", info)
    w.manifest("band", cfg)
    return 0


# ---- multimode ---------------------------------------------------------------


def _ms_for(cfg, mu):
    M = cfg.get("M", "auto")
    if M == "auto":
        return [critical_harmonics(mu)]
    return M if isinstance(M, list) else [M]


def _mm_job(args):
    task, mu, M, cfg = args
    xi_max = cfg.get("xi_max", 10.0)
    n = cfg.get("samples", 1000)
    if task == "pump":
        lad = integrate_pump_harmonics(ScaledPumpSystem(mu, M, xi_max), n_samples=n)
        cols = [np.abs(lad.pump[j]) ** 2 for j in range(M)]
        return lad.xi, cols, [f"abs2_a{j + 1}" for j in range(M)]
    if task == "4wm":
        lad = integrate_4wm_third_harmonic(mu, xi_max, n_samples=n)
        return lad.xi, [np.abs(lad.pump[0]) ** 2, np.abs(lad.pump[1]) ** 2], ["abs2_a1", "abs2_a3"]
    lad = integrate_signal_idler(mu, cfg.get("delta", 0.0), M, xi_max, cfg.get("seed", 1e-6), n_samples=n)
    return lad.xi, [lad.gain_db()], ["G_dB"]


def cmd_multimode(cfg, w: Writer, threads: int) -> int:
    task = cfg["task"]
    if task == "mcrit":
        xi_ref, tol = cfg.get("xi_ref", 10.0), cfg.get("tol", 0.01)
        ms = _pmap(_mcrit_job, [(mu, xi_ref, tol) for mu in cfg["mu"]], threads)
        w.table("mcrit", ["mu", "M_crit"], zip(cfg["mu"], ms))
        for mu, m in zip(cfg["mu"], ms):
            print(f"mu={mu:g} M_crit={m}")
    else:
        jobs = [(task, float(mu), int(M), cfg) for mu in cfg["mu"] for M in (_ms_for(cfg, mu) if task != "4wm" else [2])]
        for (t, mu, M, _), (xi, cols, names) in zip(jobs, _pmap(_mm_job, jobs, threads)):
            tag = f"{t}_mu{mu:g}" + (f"_M{M}" if t != "4wm" else "")
            w.table(tag, ["xi"] + names, zip(xi, *cols))
    w.manifest("multimode", cfg)
    return 0


def _mcrit_job(args):
    mu, xi_ref, tol = args
    return critical_harmonics(mu, xi_ref, tol)


# ---- fit ---------------------------------------------------------------------


def _device_from_cfg(d: dict) -> SnailDevice:
    kw = dict(d)
    if "f_s_hz" in kw:
        kw["omega_s"] = 2 * math.pi * kw.pop("f_s_hz")
    return SnailDevice(**kw)


def cmd_fit(cfg, w: Writer, threads: int) -> int:
    dev = _device_from_cfg(cfg.get("device", {}))
    free = cfg.get("omega_bar0_free", True)
    wp = 2 * math.pi * dev.pump_hz
    kpa_th = theoretical_kpa(wp, dev.omega_s, dev.cj_over_c)
    rows = []
    header = ["label", "mu", "xi_max", "epsilon", "kpa", "theta_p", "I_p_nA", "P_p_dBm", "kpa_theory", "residual_db2"]
    for item in cfg.get("derive", []):
        p = derive_physical_params(item["mu"], item["xi_max"], dev.n_cells, wp, dev.C, dev.CJ, free,
                                   dev.chi3, dev.omega_s, dev.Z0)
        rows.append([item.get("label", ""), p.mu, p.xi_max, p.epsilon, p.kpa, p.theta_p, p.I_p * 1e9,
                     p.P_p, kpa_th, ""])
    fit_kw = {}
    if "M" in cfg:
        fit_kw["M"] = cfg["M"]
    if "mu_grid" in cfg:
        g = cfg["mu_grid"]
        fit_kw["mu_grid"] = np.geomspace(g["start"], g["stop"], g["num"])
    if "xi_grid" in cfg:
        g = cfg["xi_grid"]
        fit_kw["xi_grid"] = np.geomspace(g["start"], g["stop"], g["num"])
    for k, item in enumerate(cfg.get("traces", [])):
        if ("path" in item) == ("sample" in item):
            raise ConfigError("each trace needs exactly one of path or sample")
        path = item["path"] if "path" in item else sample_trace_path(item["sample"])
        trace = load_trace(path, item.get("pump_hz"))
        res = fit_and_derive(trace, dev, **fit_kw)
        label = item.get("label", item.get("sample", f"trace{k}"))
        rows.append([label, res.mu, res.xi_max, res.epsilon, res.kpa, res.theta_p, res.I_p * 1e9,
                     res.P_p, kpa_th, res.residual])
        res.write_overlay_csv(w.out / f"overlay_{label}.csv")
        w.files.append(f"overlay_{label}.csv")
        w.document(f"fit_{label}", res.to_dict())
    if not rows:
        raise ConfigError("fit needs at least one entry in traces or derive")
    w.table("fit_params", header, rows)
    for r in rows:
        print(", ".join(f"{h}={_cell(v)}" for h, v in zip(header, r)))
    w.manifest("fit", cfg)
    return 0


# ---- oracle ------------------------------------------------------------------


def cmd_oracle(cfg, w: Writer, threads: int) -> int:
    from .device_models import CellCoefficients
    from .lattice_oracle import ChainSim, Tone, extract_gain, measured_wavenumber, simulate_chain
    from .multimode import integrate_pump_harmonics_physical
    from .threemode import boundary_power_gain

    n = cfg.get("n_cells", 64)
    w0 = cfg.get("omega0", 1.0)
    chi3 = cfg.get("chi3", 1.0)
    cm_chi3 = cfg.get("coupled_mode_chi3", chi3)
    if cm_chi3 != chi3:
        warnings.warn(f"chain chi3={chi3} differs from coupled-mode chi3={cm_chi3}; comparison is inconsistent",
                      stacklevel=2)
        print(f"warning: chain chi3={chi3} differs from coupled-mode chi3={cm_chi3}", file=sys.stderr)
    transits = cfg.get("transits", 52.0)
    coeffs = CellCoefficients(theta0=0.0, omega0=w0, chi3=chi3)
    lin = CellCoefficients(theta0=0.0, omega0=w0, chi3=0.0)
    model = Uniform(w0)

    def periods(w_low):
        vg = w0 * math.sqrt(1 - (w_low / (2 * w0)) ** 2)
        return transits * n / vg * w_low / (2 * math.pi)

    report = {}
    if "wavenumber" in cfg["checks"]:
        rows = []
        for w_ in cfg.get("wavenumber_omegas", [0.2, 0.6, 1.0, 1.4, 1.8]):
            r = simulate_chain(ChainSim(n, lin, [Tone(w_, 1e-3)], periods(w_)))
            k_m, k_t = measured_wavenumber(r, w_), kappa_of_omega(model, w_)
            rows.append([w_, k_m, k_t, abs(k_m / k_t - 1)])
        w.table("oracle_wavenumber", ["omega", "kappa_measured", "kappa_dispersion", "rel_err"], rows)
        report["wavenumber_max_rel_err"] = max(r[3] for r in rows)
    if "shg" in cfg["checks"]:
        s = cfg.get("shg", {})
        wp, th = s.get("omega_p", 0.2 * w0), s.get("theta_p", 0.05)
        A = th / (2 * math.sin(kappa_of_omega(model, wp) / 2))
        r = simulate_chain(ChainSim(n, coeffs, [Tone(wp, A)], periods(wp), analysis_omegas=(2 * wp,)))
        lad = integrate_pump_harmonics_physical(CellCoefficients(0.0, w0, cm_chi3), model, wp, A, 4, n)
        a2_o, a2_c = abs(r.amplitude(2 * wp, -1)), abs(lad.pump[1, -1])
        report["shg"] = {"oracle": a2_o, "coupled_mode": a2_c, "rel_err": abs(a2_o / a2_c - 1)}
    if "gain" in cfg["checks"]:
        s = cfg.get("gain", {})
        wp, eps, d = s.get("omega_p", 1.38 * w0), s.get("epsilon", 0.3), s.get("delta", 0.05)
        ws, wi = wp * (1 + d) / 2, wp * (1 - d) / 2
        A = eps * w0 / (wp * chi3)
        m = extract_gain(ChainSim(n, coeffs, [Tone(wp, A), Tone(ws, 1e-5)], periods(ws)), ws)
        kp, ks, ki = (kappa_of_omega(model, x) for x in (wp, ws, wi))
        pred = 10 * math.log10(boundary_power_gain(kp, ks, ki, eps * w0 / wp * cm_chi3 / chi3, n))
        report["gain"] = {"oracle_dB": m.G_dB, "three_mode_dB": pred, "diff_dB": m.G_dB - pred}
    w.document("oracle_report", report)
    w.manifest("oracle", cfg)
    print(json.dumps(report, indent=2, default=float))
    return 0


HANDLERS = {
    "device": cmd_device,
    "gain3": cmd_gain3,
    "band": cmd_band,
    "multimode": cmd_multimode,
    "fit": cmd_fit,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twpa3wm", description="3WM travelling-wave amplifier models")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path)
        s.add_argument("--recipe")
        s.add_argument("--out", type=Path, default=Path("out"))
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--format", choices=["csv", "json"], default="csv")
    sub.add_parser("recipes", help="list bundled recipes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "recipes":
        for name in recipe_names():
            cfg = json.loads((resources.files("twpa3wm") / "recipes" / f"{name}.json").read_text())
            print(f"{name}\t{cfg.get('command')}\t{cfg.get('description', '')}")
        return 0
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = validate(load_config(args.config, args.recipe), args.command)
        out = args.out / args.recipe if args.recipe else args.out
        return HANDLERS[args.command](cfg, Writer(out, args.format), args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TwpaError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
