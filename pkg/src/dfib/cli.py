"""Batch runner for the benchmark scenarios.

Usage::

    dfib run CONFIG [--key value ...]
    dfib compare CONFIG [--key value ...]
    dfib --print-config SCENARIO
    dfib --list-kernels

Configs are flat ``key = value`` files with ``#`` comments. Lengths such as
``dt`` and ``h_s`` accept grid-relative forms like ``h/4`` or ``2h``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .coupling import DFIB, IBMAC, METHODS
from .errors import ConfigError, DFIBError
from .fluid import FluidState
from .grid import GridGeometry, StaggeredField, Subgrid
from .kernels import available_kernels, get_kernel
from .poisson import CostCounter
from .stepper import SimState, advance
from .structures import (ForceModel, ellipse_perimeter, level_for_spacing, make_circle,
                         make_ellipse, make_icosphere, make_perturbed_circle,
                         make_tracers, markers_for_spacing)

log = logging.getLogger("dfib")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

SCENARIOS = ("surface_tension_2d", "quasi_static_circle", "parametric_membrane", "sphere_3d", "custom")

# key -> parser; "length" values may be written relative to h
SCHEMA = {
    "scenario": str, "dim": int, "N": int, "L": float, "rho": float, "mu": float,
    "method": str, "kernel": str, "structure": str, "force": str,
    "gamma": float, "kappa": float, "K_c": float, "tau": float, "omega0": float,
    "p": int, "eps0": float, "R": float, "a_frac": float, "b_frac": float,
    "level": int, "h_s": "length", "M": int, "dt": "length", "t_end": float,
    "tracer_multiplier": int, "init_flow": str, "output_dir": str, "run_id": str,
    "sample_every": int,
}

PRESETS = {
    "surface_tension_2d": {
        "scenario": "surface_tension_2d", "dim": "2", "N": "64", "L": "5", "rho": "1",
        "gamma": "1", "mu": "0.1", "structure": "ellipse", "force": "surface_tension",
        "a_frac": "0.17857142857142858", "b_frac": "0.35", "M": "ceil(pi*N)",
        "dt": "h/2", "t_end": "20", "method": DFIB, "kernel": "bspline6",
    },
    "quasi_static_circle": {
        "scenario": "quasi_static_circle", "dim": "2", "N": "128", "L": "1", "rho": "1",
        "mu": "0.1", "kappa": "1", "structure": "circle", "force": "springs", "R": "0.25",
        "h_s": "h/2", "dt": "h/4", "t_end": "1", "tracer_multiplier": "20",
        "method": DFIB, "kernel": "bspline6",
    },
    "parametric_membrane": {
        "scenario": "parametric_membrane", "dim": "2", "N": "128", "rho": "1", "mu": "0.15",
        "L": "5", "R": "1", "K_c": "10", "omega0": "10", "p": "2", "eps0": "0.05",
        "tau": "0.4", "structure": "perturbed_circle", "force": "springs", "h_s": "h/2",
        "dt": "h/10", "t_end": "10", "tracer_multiplier": "4", "method": DFIB,
        "kernel": "bspline6",
    },
    "sphere_3d": {
        "scenario": "sphere_3d", "dim": "3", "N": "64", "L": "1", "rho": "1", "mu": "0.05",
        "gamma": "1", "structure": "sphere", "force": "surface_tension", "R": "0.1",
        "h_s": "h/2", "dt": "h/4", "t_end": "0.25", "init_flow": "zero", "method": DFIB,
        "kernel": "bspline6",
    },
    "custom": {
        "scenario": "custom", "dim": "2", "N": "32", "L": "1", "rho": "1", "mu": "0.1",
        "structure": "circle", "force": "none", "R": "0.25", "M": "64", "dt": "h/4",
        "t_end": "0.25", "method": DFIB, "kernel": "bspline6",
    },
}

DEFAULTS = {"sample_every": "1", "output_dir": "out", "init_flow": "zero",
            "tracer_multiplier": "0", "run_id": ""}


# -- configuration -----------------------------------------------------------


def parse_config_text(text: str, source: str = "<config>") -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        raw[key] = value
    return raw


_REL = re.compile(r"^\s*([0-9.eE+-]*)\s*\*?\s*h\s*(?:/\s*([0-9.eE+-]+))?\s*$")


def parse_length(value: str, h: float, key: str = "value") -> float:
    """Number, or a multiple/fraction of h such as 'h/4', '2h', '0.5*h'."""
    try:
        return float(value)
    except ValueError:
        pass
    m = _REL.match(value)
    if not m:
        raise ConfigError(f"{key}: cannot parse length {value!r}")
    num = float(m.group(1)) if m.group(1) else 1.0
    den = float(m.group(2)) if m.group(2) else 1.0
    return num * h / den


@dataclass
class ScenarioConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def h(self) -> float:
        return self["L"] / self["N"]


def _preset_for(raw: dict) -> dict:
    scenario = raw.get("scenario", "custom")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: unknown {scenario!r}; choose from {SCENARIOS}")
    return {**DEFAULTS, **PRESETS[scenario]}


def resolve_config(raw: dict, overrides: dict | None = None) -> ScenarioConfig:
    """Merge preset, file values and overrides, then type-check every key."""
    merged = {**_preset_for({**raw, **(overrides or {})}), **raw, **(overrides or {})}
    out = {}
    for key, value in merged.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        kind = SCHEMA[key]
        if kind in ("length",) or key == "M":
            continue
        try:
            out[key] = kind(value)
        except ValueError:
            raise ConfigError(f"{key}: invalid value {value!r}") from None
    cfg = ScenarioConfig(out)
    h = cfg.h
    for key in ("dt", "h_s"):
        if key in merged:
            out[key] = parse_length(str(merged[key]), h, key)
    if "M" in merged:
        m = str(merged["M"]).replace(" ", "")
        if m == "ceil(pi*N)":
            out["M"] = math.ceil(math.pi * out["N"])
        else:
            try:
                out["M"] = int(m)
            except ValueError:
                raise ConfigError(f"M: invalid value {m!r}") from None
    _validate(cfg)
    return cfg


def _validate(cfg: ScenarioConfig):
    v = cfg.values
    if v["dim"] not in (2, 3):
        raise ConfigError("dim: must be 2 or 3")
    n = v["N"]
    if n < 4 or n & (n - 1):
        raise ConfigError("N: must be a power of two >= 4")
    for key in ("L", "rho", "mu", "dt", "t_end", "gamma", "kappa", "K_c", "R", "h_s"):
        if key in v and not v[key] > 0:
            raise ConfigError(f"{key}: must be positive")
    if "tau" in v and not abs(v["tau"]) < 1:
        raise ConfigError("tau: must satisfy |tau| < 1")
    if v["method"] not in METHODS:
        raise ConfigError(f"method: choose from {METHODS}")
    try:
        get_kernel(v["kernel"])
    except KeyError as exc:
        raise ConfigError(f"kernel: {exc.args[0]}") from None
    if v["sample_every"] < 1:
        raise ConfigError("sample_every: must be >= 1")
    if v.get("init_flow", "zero") not in ("zero", "shear"):
        raise ConfigError("init_flow: 'zero' or 'shear'")


def format_config(values: dict) -> str:
    return "\n".join(f"{k} = {v}" for k, v in values.items()) + "\n"


# -- scenario construction ---------------------------------------------------


def _curve_and_shape(cfg: ScenarioConfig, geom: GridGeometry):
    """Initial structure and a sampler of its analytic shape (for tracers)."""
    s = cfg["structure"]
    L = cfg["L"]
    if s != "sphere" and cfg.get("M") is None and cfg.get("h_s") is None:
        raise ConfigError("structure: set either M or h_s")
    if s == "circle":
        R = cfg["R"]
        M = cfg.get("M") or markers_for_spacing(2 * math.pi * R, cfg["h_s"])
        shape = lambda K: make_circle(geom, R, M=K)  # noqa: E731
    elif s == "ellipse":
        a, b = cfg["a_frac"], cfg["b_frac"]
        M = cfg.get("M") or markers_for_spacing(ellipse_perimeter(a * L, b * L), cfg["h_s"])
        shape = lambda K: make_ellipse(geom, a, b, K)  # noqa: E731
    elif s == "perturbed_circle":
        R, eps, p = cfg["R"], cfg["eps0"], cfg["p"]
        M = cfg.get("M") or markers_for_spacing(2 * math.pi * R, cfg["h_s"])
        shape = lambda K: make_perturbed_circle(geom, R, eps, p, K)  # noqa: E731
    elif s == "sphere":
        R = cfg["R"]
        level = cfg.get("level")
        if level is None:
            level = level_for_spacing(R, cfg["h_s"])
        center = (L / 2,) * 3
        return make_icosphere(level, R, center), None
    else:
        raise ConfigError(f"structure: unknown {s!r}")
    return shape(M), shape


def _force_model(cfg: ScenarioConfig) -> ForceModel:
    kind = cfg["force"]
    if kind == "none":
        return ForceModel("none")
    if kind == "surface_tension":
        return ForceModel("surface_tension_3d" if cfg["dim"] == 3 else "surface_tension_2d",
                          {"gamma": cfg["gamma"]})
    if kind == "springs":
        if "K_c" in cfg.values:
            return ForceModel("springs", {k: cfg[k] for k in ("K_c", "tau", "omega0")})
        return ForceModel("springs", {"kappa": cfg["kappa"]})
    raise ConfigError(f"force: unknown {kind!r}")


def initial_velocity(cfg: ScenarioConfig, geom: GridGeometry) -> StaggeredField:
    if cfg.get("init_flow", "zero") == "zero":
        return StaggeredField.zeros(geom, Subgrid.FACE)
    # shear flow (0, sin(4 pi x / L), 0); depends on x only, so discretely div-free
    def fn(c, *x):
        return np.sin(4 * np.pi * x[0] / geom.box_length) if c == 1 else 0.0 * x[0]
    return StaggeredField.from_function(geom, Subgrid.FACE, fn)


def build_state(cfg: ScenarioConfig):
    """Initial SimState plus the analytic reference area/volume for tracers."""
    if cfg["structure"] == "sphere" and cfg["dim"] != 3:
        raise ConfigError("structure: sphere requires dim = 3")
    if cfg["structure"] != "sphere" and cfg["dim"] != 2:
        raise ConfigError(f"structure: {cfg['structure']} requires dim = 2")
    geom = GridGeometry(cfg["dim"], cfg["N"], cfg["L"])
    structure, shape = _curve_and_shape(cfg, geom)
    tracers = None
    mult = cfg.get("tracer_multiplier", 0)
    if mult and shape is not None:
        tracers = make_tracers(shape, len(structure.positions), mult)
    fluid = FluidState(initial_velocity(cfg, geom), cfg["rho"], cfg["mu"])
    state = SimState(fluid, structure, cfg["method"], cfg["kernel"], _force_model(cfg), tracers)
    return state, _true_measure(cfg)


def _true_measure(cfg: ScenarioConfig):
    s = cfg["structure"]
    if s == "circle":
        return math.pi * cfg["R"] ** 2
    if s == "perturbed_circle":
        return dg.perturbed_circle_area(cfg["R"], cfg["eps0"])
    if s == "ellipse":
        return math.pi * cfg["a_frac"] * cfg["b_frac"] * cfg["L"] ** 2
    return 4 / 3 * math.pi * cfg["R"] ** 3


# -- running -----------------------------------------------------------------


class Sampler:
    """Collects the diagnostic channels for one run."""

    def __init__(self, state: SimState, truth: float, cfg: ScenarioConfig):
        self.cfg = cfg
        self.truth = truth
        self.dim = state.fluid.geometry.dim
        self.series = dg.TimeSeries()
        self.base = self._measures(state)

    def _measures(self, state):
        if self.dim == 3:
            return {"volume": dg.mesh_volume(state.structure)}
        out = {"area": dg.polygon_area(state.structure),
               "area_spline": dg.spline_area(state.structure)}
        if state.tracers is not None:
            out["tracer_area"] = dg.polygon_area(state.tracers)
            out["tracer_area_spline"] = dg.spline_area(state.tracers)
        return out

    def sample(self, state: SimState):
        m = self._measures(state)
        ch = {}
        if self.dim == 3:
            ch["volume_error"] = dg.relative_error(m["volume"], self.base["volume"])
        else:
            ch["area_error"] = dg.relative_error(m["area"], self.base["area"])
            ch["area_error_spline"] = dg.relative_error(m["area_spline"], self.base["area_spline"])
            if "tracer_area" in m:
                ch["tracer_area_error"] = dg.relative_error(m["tracer_area"], self.truth)
                ch["tracer_area_error_spline"] = dg.relative_error(m["tracer_area_spline"], self.truth)
            if self.cfg["structure"] == "perturbed_circle":
                ch["amplitude"] = dg.mode_amplitude(state.structure, self.cfg["p"], self.cfg["R"])
        ch["max_velocity"] = dg.max_spurious_velocity(state.fluid.u)
        self.series.append(state.t, **ch)


@dataclass
class RunResult:
    state: SimState
    series: dg.TimeSeries
    counters: list
    wall_time: float
    status: str = "ok"
    message: str = ""


def simulate(cfg: ScenarioConfig, callback=None) -> RunResult:
    """Bootstrap with RK2, then step to t_end; ``callback(state)`` after every step."""
    state, truth = build_state(cfg)
    sampler = Sampler(state, truth, cfg)
    sampler.sample(state)
    dt = cfg["dt"]
    n_steps = max(1, math.ceil(cfg["t_end"] / dt - 1e-9))
    per_step = []
    t0 = time.perf_counter()
    status, message = "ok", ""
    for i in range(n_steps):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                state = advance(state, dt)
        except (DFIBError, ValueError, FloatingPointError) as exc:
            status, message = "failed", f"step {i + 1}: {type(exc).__name__}: {exc}"
            break
        per_step.append(state.counters.as_dict())
        if not np.all(np.isfinite(state.fluid.u.data)) or not np.all(np.isfinite(state.structure.positions)):
            status, message = "failed", f"step {i + 1}: non-finite solution at t = {state.t:.6g}"
            break
        if (i + 1) % cfg["sample_every"] == 0 or i + 1 == n_steps:
            with np.errstate(over="ignore", invalid="ignore"):
                sampler.sample(state)
        if callback is not None:
            callback(state)
    return RunResult(state, sampler.series, per_step, time.perf_counter() - t0, status, message)


def _totals(per_step) -> dict:
    tot = CostCounter()
    for c in per_step:
        tot.poisson_solves += c["poisson_solves"]
        tot.transfers += c["transfers"]
        tot.tracer_transfers += c["tracer_transfers"]
    return tot.as_dict()


def _final(series: dg.TimeSeries, name: str):
    return series.channels[name][-1] if name in series.channels and series.times else None


def summarize(cfg: ScenarioConfig, res: RunResult) -> dict:
    s = res.series
    out = {
        "scenario": cfg["scenario"], "method": cfg["method"], "kernel": cfg["kernel"],
        "status": res.status, "message": res.message,
        "steps": len(res.counters), "t_final": res.state.t, "wall_time_s": res.wall_time,
        "n_markers": int(len(res.state.structure.positions)),
        "final_area_error": _final(s, "area_error"),
        "final_area_error_spline": _final(s, "area_error_spline"),
        "final_volume_error": _final(s, "volume_error"),
        "final_tracer_area_error_spline": _final(s, "tracer_area_error_spline"),
        "max_spurious_velocity": max(s.channels["max_velocity"]) if s.times else None,
        "final_max_velocity": _final(s, "max_velocity"),
        "counter_totals": _totals(res.counters),
        "counters_last_step": res.counters[-1] if res.counters else None,
    }
    if cfg["structure"] == "sphere":
        out["sphere_level"] = int(res.state.structure.level)
        out["achieved_h_s"] = float(res.state.structure.edge_lengths().mean())
    return out


def _out_dir(cfg: ScenarioConfig) -> Path:
    d = Path(cfg["output_dir"])
    if cfg.get("run_id"):
        d = d / cfg["run_id"]
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_outputs(cfg: ScenarioConfig, res: RunResult, out: Path):
    res.series.to_csv(out / "timeseries.csv")
    with open(out / "summary.json", "w") as fh:
        json.dump(summarize(cfg, res), fh, indent=2)
    with open(out / "counters.csv", "w") as fh:
        fh.write("step,poisson_solves,transfers,tracer_transfers\n")
        for i, c in enumerate(res.counters, 1):
            fh.write(f"{i},{c['poisson_solves']},{c['transfers']},{c['tracer_transfers']}\n")


def run(cfg: ScenarioConfig) -> int:
    res = simulate(cfg)
    write_outputs(cfg, res, _out_dir(cfg))
    if res.status != "ok":
        log.error("numerical failure: %s", res.message)
        return EXIT_NUMERICAL
    return EXIT_OK


def compare(cfg: ScenarioConfig, methods=(DFIB, IBMAC)) -> int:
    """Run each method on the same inputs; write per-method outputs and comparison.csv."""
    base = _out_dir(cfg)
    results = {}
    code = EXIT_OK
    for m in methods:
        mcfg = ScenarioConfig({**cfg.values, "method": m})
        res = simulate(mcfg)
        sub = base / m
        sub.mkdir(exist_ok=True)
        write_outputs(mcfg, res, sub)
        results[m] = res
        if res.status != "ok":
            code = EXIT_NUMERICAL
    n = min(len(r.series) for r in results.values())
    first = results[methods[0]].series
    cmp = dg.TimeSeries()
    for i in range(n):
        row = {}
        for name in first.channels:
            vals = {m: results[m].series.channels[name][i] for m in methods}
            for m in methods:
                row[f"{name}_{m}"] = vals[m]
            if len(methods) == 2:
                a, b = vals[methods[1]], vals[methods[0]]
                row[f"{name}_ratio"] = a / b if b != 0 else (math.inf if a else 1.0)
        cmp.append(first.times[i], **row)
    cmp.to_csv(base / "comparison.csv")
    return code


# -- entry point -------------------------------------------------------------


def _split_overrides(tokens) -> dict:
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"--{key} needs a value") from None
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        out[key] = value
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dfib", description=__doc__.splitlines()[0])
    parser.add_argument("--print-config", metavar="SCENARIO")
    parser.add_argument("--list-kernels", action="store_true")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("command", nargs="?", choices=("run", "compare"))
    parser.add_argument("config", nargs="?")
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.list_kernels:
            print("\n".join(available_kernels()))
            return EXIT_OK
        if args.print_config:
            if args.print_config not in PRESETS:
                raise ConfigError(f"unknown scenario {args.print_config!r}; choose from {SCENARIOS}")
            sys.stdout.write(format_config({**DEFAULTS, **PRESETS[args.print_config]}))
            return EXIT_OK
        if not args.command or not args.config:
            parser.print_usage(sys.stderr)
            return EXIT_CONFIG
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        cfg = resolve_config(parse_config_text(path.read_text(), str(path)), _split_overrides(rest))
        return run(cfg) if args.command == "run" else compare(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
