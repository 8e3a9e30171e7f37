"""Scenario presets, sweeps and on-disk output for flow runs.

A run directory holds

``timeseries.csv``  t, a_t, b_t, mass_error, sup_v2, H_max, fiber_len, base_diam, dt
``monitors.csv``    t, name, observed, bound, pass
``gh.csv``          t, fiber_radial_length, base_diameter_proxy, one column per delta
``summary.json``    observed against predicted quantities and check pass rates
``profiles/*.dat``  whitespace columns rho, v, v', v'', v''' for selected snapshots

Floats are written with ``repr`` (shortest round-trip decimal) so identical
configurations give byte-identical files.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import gh
from .cohomology import (Regime, SurfaceParams, class_at, classify_regime, limit_lambda,
                         logfano_time_alternative, singularity_time)
from .profile import Grid, Regularization
from .solver import SolverConfig, Termination, Trajectory, run

log = logging.getLogger(__name__)

__all__ = [
    "SCHEMA_VERSION",
    "PRESETS",
    "WORKERS_ENV",
    "ConfigError",
    "FlowConfig",
    "RunSpec",
    "load_config",
    "parse_config",
    "run_scenario",
    "run_flow",
    "summarize",
]

SCHEMA_VERSION = 1
WORKERS_ENV = "CONEKRF_WORKERS"
EMIT_ALL = frozenset({"profiles", "monitors", "gh", "summary"})
PROFILE_EVERY = 10

_BASE = {"k": 2, "a": "1", "b": "4", "epsilon": 1e-2, "delta": 1e-2, "N": 2049, "R": 15.0}
PRESETS = {
    "contracting-k2": {**_BASE, "alpha": "1/4"},
    "collapsing-k2": {**_BASE, "alpha": "3/4"},
    "logfano-k2": {**_BASE, "alpha": "1/2"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FlowConfig:
    k: int
    a: Fraction
    b: Fraction
    alpha: Fraction
    epsilon: float
    delta: float
    N: int
    R: float
    name: str = "custom"

    @property
    def params(self) -> SurfaceParams:
        return SurfaceParams(self.k, self.a, self.b, self.alpha)

    @property
    def reg(self) -> Regularization:
        return Regularization(self.epsilon, self.delta)

    @property
    def grid(self) -> Grid:
        return Grid(self.R, self.N)

    def label(self) -> str:
        return f"eps={self.epsilon!r}_alpha={_q(self.alpha)}_N={self.N}".replace("/", "-")


@dataclass
class RunSpec:
    scenario: FlowConfig
    sweeps: dict = field(default_factory=dict)
    outputs: str = "out"
    emit: frozenset = EMIT_ALL
    solver: SolverConfig = SolverConfig()

    def expand(self) -> list:
        """One FlowConfig per point of the sweep grid (epsilon, alpha, N order)."""
        configs = [self.scenario]
        for key in ("epsilon", "alpha", "N"):
            values = self.sweeps.get(key)
            if not values:
                continue
            configs = [_replace(c, key, v) for c in configs for v in values]
        return configs


def _replace(cfg: FlowConfig, key, value) -> FlowConfig:
    d = dict(cfg.__dict__)
    d[key] = value
    return _flow_config(d, cfg.name)


def _q(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _flow_config(d: dict, name: str) -> FlowConfig:
    try:
        cfg = FlowConfig(k=int(d["k"]), a=Fraction(str(d["a"])), b=Fraction(str(d["b"])),
                         alpha=Fraction(str(d["alpha"])), epsilon=float(d["epsilon"]),
                         delta=float(d["delta"]), N=int(d["N"]), R=float(d["R"]), name=name)
        cfg.params, cfg.reg, cfg.grid  # validate eagerly
    except KeyError as exc:
        raise ConfigError(f"scenario: missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError, ZeroDivisionError, NotImplementedError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc
    return cfg


_SOLVER_FIELDS = {"cfl_factor", "stop_time", "stop_margin", "max_steps", "derivative_stencil",
                  "monitor_stride", "method", "rtol", "atol", "n_snapshots", "boundary"}


def parse_config(obj: dict) -> RunSpec:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    if obj.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"schema: expected {SCHEMA_VERSION}, got {obj.get('schema')!r}")
    sc = obj.get("scenario")
    if isinstance(sc, str):
        if sc not in PRESETS:
            raise ConfigError(f"scenario: unknown preset {sc!r} (known: {', '.join(PRESETS)})")
        flow = _flow_config(PRESETS[sc], sc)
    elif isinstance(sc, dict):
        base = PRESETS.get(sc.get("preset", ""), {})
        flow = _flow_config({**base, **{k: v for k, v in sc.items() if k != "preset"}},
                            sc.get("preset", "custom"))
    else:
        raise ConfigError("scenario: expected a preset name or an object")
    sweeps = obj.get("sweeps", {}) or {}
    if not isinstance(sweeps, dict) or any(k not in ("epsilon", "alpha", "N") for k in sweeps):
        raise ConfigError("sweeps: only epsilon, alpha and N can be swept")
    emit = obj.get("emit", sorted(EMIT_ALL))
    if not set(emit) <= EMIT_ALL:
        raise ConfigError(f"emit: unknown item(s) {sorted(set(emit) - EMIT_ALL)}")
    solver_kw = obj.get("solver", {}) or {}
    unknown = set(solver_kw) - _SOLVER_FIELDS
    if unknown:
        raise ConfigError(f"solver: unknown field(s) {sorted(unknown)}")
    try:
        solver = SolverConfig(**solver_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from exc
    return RunSpec(flow, {k: list(v) for k, v in sweeps.items()}, str(obj.get("outputs", "out")),
                   frozenset(emit), solver)


def load_config(path) -> RunSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(obj)


# -- running -----------------------------------------------------------------

def run_flow(cfg: FlowConfig, solver: SolverConfig = SolverConfig()) -> Trajectory:
    p = cfg.params
    if classify_regime(p) is Regime.LOGFANO:
        log.info("log Fano scenario: both roots a_t = 0 and b_t - a_t = 0 at T=%s; "
                 "closed form 2k/(2 - alpha k) = %s", singularity_time(p), logfano_time_alternative(p))
    return run(p, cfg.reg, cfg.grid, solver)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else _fmt(c) for c in row])


def _zero_section_series(traj: Trajectory):
    # k v'(-R): zero-section volume in units of 2 pi
    k = traj.params.k
    return [(s.t, k * float(s.profile.d1[0])) for s in traj.snapshots]


def _mass_series(traj: Trajectory):
    h = traj.grid.h
    out = []
    for s in traj.snapshots:
        d2 = s.profile.d2
        out.append((s.t, float(h * (np.sum(d2) - 0.5 * (d2[0] + d2[-1])))))
    return out


def _safe_extrapolate(series, model, T):
    try:
        return gh.extrapolate_to_T(series, model, T)
    except (gh.InsufficientData, ValueError) as exc:
        log.warning("extrapolation skipped: %s", exc)
        return None


def _ext_json(e: Optional[gh.Extrapolation]):
    if e is None:
        return None
    return {"model": e.model.value, "value_at_T": e.value_at_T, "exponent": e.exponent,
            "quality": e.quality, "root": None if math.isnan(e.root) else e.root, "n": e.n}


def _stabilization(traj: Trajectory, lo=2.0, hi=5.0) -> float:
    """sup |v'| difference on [lo, hi] between the last two snapshots; logged, not asserted."""
    if len(traj.snapshots) < 2:
        return float("nan")
    a, b = traj.snapshots[-2].profile, traj.snapshots[-1].profile
    band = (b.rho >= lo) & (b.rho <= hi)
    if not band.any():
        return float("nan")
    return float(np.max(np.abs(b.d1[band] - a.d1[band])))


def summarize(traj: Trajectory, cfg: FlowConfig) -> dict:
    """Observed against predicted quantities plus scenario acceptance flags."""
    p = traj.params
    regime = classify_regime(p)
    T = singularity_time(p)
    k = p.k
    last = traj.snapshots[-1].profile
    checks = {}
    for s in traj.snapshots:
        if s.report is None:
            continue
        for c in s.report.checks:
            n_pass, n = checks.get(c.name, (0, 0))
            checks[c.name] = (n_pass + int(c.passed), n + 1)
    pass_rates = {name: n_pass / n for name, (n_pass, n) in sorted(checks.items())}
    reached = traj.terminated_reason is Termination.REACHED_STOP_TIME
    acceptance = {"reached_stop_time": reached,
                  "monitors_pass": all(r == 1.0 for r in pass_rates.values())}
    out = {
        "schema": SCHEMA_VERSION,
        "scenario": cfg.name,
        "params": {"k": k, "a": _q(p.a), "b": _q(p.b), "alpha": _q(p.alpha),
                   "epsilon": cfg.epsilon, "delta": cfg.delta, "N": cfg.N, "R": cfg.R},
        "regime": regime.value,
        "T_predicted": _q(T),
        "T_predicted_float": float(T),
        "stop_time": traj.stop_time,
        "final_time": traj.snapshots[-1].t,
        "terminated_reason": traj.terminated_reason.value,
        "n_steps": traj.n_steps,
        "n_snapshots": len(traj.snapshots),
        "check_pass_rates": pass_rates,
        "stabilization_v1_sup": _stabilization(traj),
    }
    if regime is Regime.LOGFANO:
        out["T_alternative_closed_form"] = _q(logfano_time_alternative(p))
    zs = _safe_extrapolate(_zero_section_series(traj), gh.Model.LINEAR, float(T))
    out["zero_section_extrapolation"] = _ext_json(zs)
    if regime is Regime.CONTRACTING:
        T_ext = zs.root if zs is not None else float("nan")
        out["T_extrapolated"] = T_ext
        acceptance["T_extrapolated_within_1pct"] = bool(abs(T_ext / float(T) - 1) <= 0.01)
        deltas = gh.DEFAULT_DELTAS
        W = [gh.wdelta_diameter(last, d, k) for d in deltas]
        out["wdelta_slope"] = float(np.polyfit(np.log(deltas), np.log(W), 1)[0])
        out["wdelta_slope_target"] = float(p.alpha) * k / 2
    else:
        ms = _safe_extrapolate(_mass_series(traj), gh.Model.LINEAR, float(T))
        out["mass_extrapolation"] = _ext_json(ms)
        out["T_extrapolated"] = ms.root if ms is not None else float("nan")
    if regime is Regime.COLLAPSING:
        lam = limit_lambda(p)
        lam_obs = zs.value_at_T if zs is not None else float("nan")
        out["lambda_predicted"] = _q(lam)
        out["lambda_observed"] = lam_obs
        acceptance["lambda_within_2pct"] = bool(abs(lam_obs / float(lam) - 1) <= 0.02)
        fl = _safe_extrapolate([(s.t, gh.fiber_radial_length(s.profile)) for s in traj.snapshots],
                               gh.Model.POWER_LAW, float(T))
        out["fiber_length_extrapolation"] = _ext_json(fl)
        out["base_diameter_at_stop"] = gh.base_diameter_proxy(last, k)
        out["base_diameter_limit"] = gh.sphere_diameter(float(lam))
    out["acceptance"] = acceptance
    out["passed"] = all(acceptance.values())
    return out


def write_outputs(traj: Trajectory, cfg: FlowConfig, outdir, emit=EMIT_ALL) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    p, k = traj.params, traj.params.k
    ts_rows, mon_rows, gh_rows = [], [], []
    deltas = gh.DEFAULT_DELTAS
    for s in traj.snapshots:
        prof = s.profile
        a_t, b_t = class_at(p, float(s.t))
        diag = s.report.diagnostics if s.report is not None else {}
        fiber = gh.fiber_radial_length(prof)
        base = gh.base_diameter_proxy(prof, k)
        ts_rows.append([s.t, a_t, b_t, diag.get("mass_error", float("nan")),
                        float(np.max(prof.d2)), diag.get("H_max", float("nan")), fiber, base, s.dt])
        if s.report is not None:
            for c in s.report.checks:
                mon_rows.append([s.t, c.name, c.observed, c.bound, c.passed])
        gh_rows.append([s.t, fiber, base] + [gh.wdelta_diameter(prof, d, k) for d in deltas])
    _write_csv(outdir / "timeseries.csv",
               ["t", "a_t", "b_t", "mass_error", "sup_v2", "H_max", "fiber_len", "base_diam", "dt"],
               ts_rows)
    if "monitors" in emit:
        _write_csv(outdir / "monitors.csv", ["t", "name", "observed", "bound", "pass"], mon_rows)
    if "gh" in emit:
        _write_csv(outdir / "gh.csv", ["t", "fiber_radial_length", "base_diameter_proxy"]
                   + [f"wdelta_{d!r}" for d in deltas], gh_rows)
    if "profiles" in emit:
        pdir = outdir / "profiles"
        pdir.mkdir(exist_ok=True)
        n = len(traj.snapshots)
        for idx in sorted(set(range(0, n, PROFILE_EVERY)) | {n - 1}):
            prof = traj.snapshots[idx].profile
            cols = np.column_stack([prof.rho, prof.v, prof.d1, prof.d2, prof.d3])
            with open(pdir / f"profile_{idx:04d}.dat", "w", encoding="utf-8") as fh:
                fh.write(f"# t = {traj.snapshots[idx].t!r}\n# rho v v1 v2 v3\n")
                for row in cols:
                    fh.write(" ".join(repr(float(x)) for x in row) + "\n")
    summary = summarize(traj, cfg)
    if "summary" in emit:
        with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=True)
            fh.write("\n")
    return summary


def _one(args):
    cfg, solver, outdir, emit = args
    traj = run_flow(cfg, solver)
    return write_outputs(traj, cfg, outdir, emit)


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def run_scenario(spec: RunSpec, strict: bool = False, out: Optional[str] = None):
    """Run every configuration of ``spec`` and write its outputs.

    Returns ``(exit_status, summaries)``.  With ``strict`` the status is
    nonzero unless every run reached its stop time and every acceptance flag
    holds.
    """
    root = Path(out or spec.outputs)
    configs = spec.expand()
    if len(configs) == 1:
        jobs = [(configs[0], spec.solver, root, spec.emit)]
    else:
        jobs = [(c, spec.solver, root / c.label(), spec.emit) for c in configs]
    n = min(_workers(), len(jobs))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            summaries = list(pool.map(_one, jobs))
    else:
        summaries = [_one(j) for j in jobs]
    ok = all(s["passed"] for s in summaries)
    return (0 if ok or not strict else 1), summaries


def default_config(preset: str) -> dict:
    """A config object for ``preset`` that :func:`parse_config` accepts."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    return {"schema": SCHEMA_VERSION, "scenario": preset, "outputs": f"out/{preset}",
            "solver": {}, "sweeps": {}, "emit": sorted(EMIT_ALL)}


def preset_table() -> list:
    rows = []
    for name, d in PRESETS.items():
        cfg = _flow_config(d, name)
        p = cfg.params
        rows.append({"name": name, "regime": classify_regime(p).value, "T": _q(singularity_time(p)),
                     **copy.deepcopy(d)})
    return rows
