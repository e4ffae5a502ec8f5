"""Command-line experiment runner.

Modes
-----
exponents       critical exponents and the applicable lifespan estimate
kernel-verify   kernel oracle, identity, comparison and exponent suites
weights-verify  calibration of the weight bounds and their check on a finer grid
simulate        one radial simulation with functional traces and envelope check
sweep           lifespans over a range of data sizes and the fitted slope
iterate         iteration sequences, thresholds and identity residuals
plot-data       rebuild the plain-text plot files of an output directory

Settings are merged in the order preset, ``--config`` file, command-line
flags. Every run writes its data artifacts plus ``manifest.json`` to the
output directory; timestamps and timings only appear in the manifest.

Exit status: 0 when every enabled suite passes, 1 on a suite failure,
2 on a configuration error and 3 on a runtime fault.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import sys
import time
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from . import __version__, iterlab, model, solver, suites
from .model import ModelParams, Regime, SupercriticalError

__all__ = ["main", "run", "ConfigError", "load_config", "resolve_config", "parse_eps_spec", "emit_plot_data",
           "PRESETS", "EXIT_OK", "EXIT_SUITE", "EXIT_CONFIG", "EXIT_RUNTIME"]

log = logging.getLogger("edslab")

EXIT_OK, EXIT_SUITE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

MODES = ("exponents", "kernel-verify", "weights-verify", "simulate", "sweep", "iterate", "plot-data")

PRESETS: dict[str, dict] = {
    "eds": {"params": {"n": 3, "k": 2.0 / 3.0, "mu": 2.0, "p": 2.0}},
    "flat": {"params": {"n": 3, "k": 0.0, "mu": 2.0, "p": 1.5}},
    "tricomi-like": {"params": {"n": 1, "k": 1.0 / 3.0, "mu": 0.0, "p": 1.8}},
    "classical": {"params": {"n": 3, "k": 0.0, "mu": 0.0, "p": 1.5}},
    "strauss-1d": {
        "params": {"n": 1, "k": 0.0, "mu": 0.0, "p": 2.0},
        "solver": {"t_max": 3000.0, "record_dt": 1.0},
        "sweep": {"eps": "0.02:0.3:8log"},
    },
}

_SOLVER_FIELDS = {f.name: f.type for f in fields(solver.SolverConfig)}

# section -> key -> accepted python types
SCHEMA: dict[str, Any] = {
    "mode": str,
    "preset": str,
    "seed": int,
    "params": {"n": int, "k": float, "mu": float, "p": float, "R": float, "eps": float},
    "solver": {name: (bool if name == "project_support" else int if name in ("calU_every", "max_steps") else float)
               for name in _SOLVER_FIELDS},
    "sweep": {"eps": (str, list), "workers": int, "tolerance": float},
    "kernel": {"grid": str},
    "iterate": {"j_max": int, "truncate": int},
    "simulate": {"envelope": bool, "j_max": int},
    "output": {"dir": str},
}

DEFAULTS: dict[str, Any] = {
    "seed": 20240501,
    "params": {"R": 1.0, "eps": 0.1},
    "solver": {},
    "sweep": {"eps": "0.02:0.3:8log", "workers": None, "tolerance": None},
    "kernel": {"grid": "default"},
    "iterate": {"j_max": 40, "truncate": 8},
    "simulate": {"envelope": True, "j_max": 40},
    "output": {"dir": "edslab_out"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


# ---------------------------------------------------------------- config


def _check_type(path: str, value: Any, types) -> Any:
    types = types if isinstance(types, tuple) else (types,)
    if value is None:
        return None
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{path}: expected {'/'.join(t.__name__ for t in types)}, got a boolean")
    if float in types and isinstance(value, int):
        return float(value)
    if int in types and isinstance(value, float) and value.is_integer() and float not in types:
        return int(value)
    if not isinstance(value, types):
        raise ConfigError(f"{path}: expected {'/'.join(t.__name__ for t in types)}, got {type(value).__name__}")
    return value


def validate_config(cfg: dict) -> dict:
    """Check keys and value types against :data:`SCHEMA`; unknown keys are rejected."""
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a mapping")
    out: dict = {}
    for key, value in cfg.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        spec = SCHEMA[key]
        if isinstance(spec, dict):
            if value is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            sec = {}
            for sub, v in value.items():
                if sub not in spec:
                    raise ConfigError(f"unknown key {key}.{sub}")
                sec[sub] = _check_type(f"{key}.{sub}", v, spec[sub])
            out[key] = sec
        else:
            out[key] = _check_type(key, value, spec)
    if "mode" in out and out["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}")
    if "preset" in out and out["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {out['preset']!r}; choose from {', '.join(PRESETS)}")
    return out


def load_config(path: str | Path) -> dict:
    """Read a YAML or JSON document and validate it."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return validate_config(data or {})


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        elif value is not None:
            out[key] = copy.deepcopy(value)
    return out


def parse_eps_spec(spec: str | Sequence[float]) -> list[float]:
    """``"a:b:Nlog"``, ``"a:b:Nlin"``, a comma list or a sequence of floats."""
    if isinstance(spec, str):
        s = spec.strip()
        try:
            if ":" in s:
                a, b, tail = s.split(":")
                kind = "log" if tail.endswith("log") else "lin" if tail.endswith("lin") else None
                if kind is None:
                    raise ValueError
                num = int(tail[:-3])
                lo, hi = float(a), float(b)
                vals = np.geomspace(lo, hi, num) if kind == "log" else np.linspace(lo, hi, num)
                vals = [float(v) for v in vals]
            else:
                vals = [float(x) for x in s.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"cannot parse eps specification {spec!r}") from None
    else:
        try:
            vals = [float(x) for x in spec]
        except (TypeError, ValueError):
            raise ConfigError(f"eps list must contain numbers, got {spec!r}") from None
    if len(vals) < 1 or not all(v > 0 and math.isfinite(v) for v in vals):
        raise ConfigError("eps values must be positive and finite")
    return vals


def resolve_config(mode: str, file_cfg: dict | None = None, overrides: dict | None = None) -> dict:
    """Merge defaults, preset, file and command-line settings into a checked configuration."""
    file_cfg = file_cfg or {}
    overrides = validate_config(overrides or {})
    preset = overrides.get("preset") or file_cfg.get("preset")
    cfg = copy.deepcopy(DEFAULTS)
    if preset:
        cfg = _merge(cfg, PRESETS[preset])
        cfg["preset"] = preset
    cfg = _merge(cfg, file_cfg)
    cfg = _merge(cfg, overrides)
    if cfg.get("mode") not in (None, mode):
        raise ConfigError(f"config mode {cfg['mode']!r} does not match the requested mode {mode!r}")
    cfg["mode"] = mode
    p = cfg["params"]
    needs_p = mode in ("simulate", "sweep", "iterate")
    if mode in ("exponents", "simulate", "sweep", "iterate"):
        missing = [key for key in ("n", "k", "mu") + (("p",) if needs_p else ()) if p.get(key) is None]
        if missing:
            raise ConfigError(f"missing parameters: {', '.join(missing)}")
        try:
            if p.get("p") is not None:
                ModelParams(**{key: p[key] for key in ("n", "k", "mu", "p", "R", "eps")})
            else:
                ModelParams(p["n"], p["k"], p["mu"], 2.0, p["R"], p["eps"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    try:
        solver.SolverConfig(**{key: v for key, v in cfg["solver"].items() if v is not None})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None
    if cfg["kernel"]["grid"] not in ("default", "coarse"):
        raise ConfigError("kernel.grid must be 'default' or 'coarse'")
    cfg["sweep"]["eps"] = parse_eps_spec(cfg["sweep"]["eps"])
    if mode == "sweep":
        try:
            solver.check_eps_span(cfg["sweep"]["eps"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    w = cfg["sweep"]["workers"]
    if w is not None and w < 1:
        raise ConfigError("sweep.workers must be >= 1")
    tol = cfg["sweep"]["tolerance"]
    if tol is not None and not tol > 0:
        raise ConfigError("sweep.tolerance must be > 0")
    for sec in ("iterate", "simulate"):
        if not 1 <= cfg[sec]["j_max"] <= 400:
            raise ConfigError(f"{sec}.j_max must lie in [1, 400]")
    if cfg["iterate"]["truncate"] < 0:
        raise ConfigError("iterate.truncate must be >= 0")
    return cfg


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON form, output location excluded."""
    body = {key: v for key, v in cfg.items() if key != "output"}
    blob = json.dumps(_jsonable(body), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------- serialisation


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _pop_timings(report: dict, prefix: str = "") -> dict:
    """Remove ``seconds`` entries in place and return them keyed by path."""
    out = {}
    if isinstance(report, dict):
        if "seconds" in report:
            out[prefix or "total"] = report.pop("seconds")
        for key, v in report.items():
            out.update(_pop_timings(v, f"{prefix}.{key}" if prefix else key))
    return out


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _dat(header: Sequence[str], rows) -> str:
    lines = ["# " + " ".join(header)]
    for row in rows:
        lines.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- plot data


def emit_plot_data(out_dir: str | Path) -> list[str]:
    """Convert run artifacts in ``out_dir`` into whitespace-separated data files.

    ``sweep.csv`` gives ``lifespan_loglog.dat`` (eps ascending, with the
    bracket as a band), ``trace.csv`` gives ``functionals.dat`` and
    ``envelope.csv`` gives ``envelope_overlay.dat``.

    Raises
    ------
    FileNotFoundError
        If none of the source artifacts exist.
    """
    d = Path(out_dir)
    written = []
    src = d / "sweep.csv"
    if src.exists():
        with open(src, newline="") as fh:
            rows = [r for r in csv.DictReader(fh) if r["blew_up"] == "True"]
        rows.sort(key=lambda r: float(r["eps"]))
        body = [(float(r["eps"]), float(r["T_hi"]), float(r["T_lo"]), float(r["T_hi"])) for r in rows]
        _write(d / "lifespan_loglog.dat", _dat(["eps", "T", "T_lo", "T_hi"], body))
        written.append("lifespan_loglog.dat")
    src = d / "trace.csv"
    if src.exists():
        with open(src, newline="") as fh:
            rows = list(csv.DictReader(fh))
        body = [(float(r["t"]), float(r["U0"]), float(r["U1"]), float(r["calU"])) for r in rows]
        _write(d / "functionals.dat", _dat(["t", "U0", "U1", "calU"], body))
        written.append("functionals.dat")
    src = d / "envelope.csv"
    if src.exists():
        with open(src, newline="") as fh:
            rows = list(csv.DictReader(fh))
        body = [(float(r["t"]), math.exp(float(r["log_measured"])), math.exp(float(r["log_bound"])))
                for r in rows]
        _write(d / "envelope_overlay.dat", _dat(["t", "simulation", "bound"], body))
        written.append("envelope_overlay.dat")
    if not written:
        raise FileNotFoundError(f"no sweep.csv, trace.csv or envelope.csv in {d}")
    return written


# ---------------------------------------------------------------- modes


def _params(cfg: dict) -> ModelParams:
    p = cfg["params"]
    return ModelParams(p["n"], p["k"], p["mu"], p["p"], p["R"], p["eps"])


def _solver_config(cfg: dict, **extra) -> solver.SolverConfig:
    kw = {key: v for key, v in cfg["solver"].items() if v is not None}
    for key, v in extra.items():
        kw.setdefault(key, v)
    return solver.SolverConfig(**kw)


def _summary(passed: bool | None) -> dict:
    if passed is None:
        return {}
    return {"passed": int(bool(passed)), "failed": int(not passed)}


def _mode_exponents(cfg: dict, out: Path) -> tuple[dict, dict, dict]:
    p = cfg["params"]
    n, k, mu = p["n"], p["k"], p["mu"]
    rep = model.classify(ModelParams(n, k, mu, p["p"] if p.get("p") is not None else 2.0))
    body = rep.as_dict()
    body.update({"n": n, "k": k, "mu": mu, "shifted_dimension": model.shifted_dimension(n, k, mu)})
    if p.get("p") is None:
        body["theta"] = None
    else:
        body["p"] = p["p"]
        try:
            body["bound"] = model.lifespan_bound(_params(cfg)).as_dict()
        except SupercriticalError:
            body["bound"] = None
    _write(out / "exponents.json", dumps(body))
    print(dumps(body), end="")
    return {}, {}, {}


def _mode_kernel_verify(cfg: dict, out: Path) -> tuple[dict, dict, dict]:
    grid = suites.KERNEL_GRID if cfg["kernel"]["grid"] == "default" else suites.COARSE_KERNEL_GRID
    report = {
        "kernel_oracle": suites.kernel_oracle_suite(grid),
        "identities": suites.identity_suite(),
        "comparison": suites.comparison_suite(seed=cfg["seed"]),
        "exponents": suites.exponent_suite(),
    }
    timings = _pop_timings(report)
    _write(out / "kernel_verify.json", dumps(report))
    ko = report["kernel_oracle"]
    print(f"kernel oracle: max rel err {ko['max_rel_err']:.3e} over {ko['points']} points "
          f"({'pass' if ko['passed'] else 'FAIL'})")
    for name in ("identities", "comparison", "exponents"):
        print(f"{name}: {'pass' if report[name]['passed'] else 'FAIL'}")
    return {name: _summary(r["passed"]) for name, r in report.items()}, {}, timings


def _mode_weights_verify(cfg: dict, out: Path) -> tuple[dict, dict, dict]:
    report = suites.weights_suite()
    timings = _pop_timings(report)
    _write(out / "weights_verify.json", dumps(report))
    consts = {}
    for entry in report["presets"]:
        pr = entry["preset"]
        tag = f"n={pr['n']},k={pr['k']:.6g},q={pr['q']:.6g}"
        consts[tag] = {key: entry[key] for key in ("B0", "B1", "B2")}
        print(f"{tag}: B0={entry['B0']:.6g} B1={entry['B1']:.6g} B2={entry['B2']:.6g} "
              f"violations={sum(entry['violations'].values())}")
    print("weights:", "pass" if report["passed"] else "FAIL")
    return {"weights": _summary(report["passed"])}, consts, timings


def _mode_simulate(cfg: dict, out: Path) -> tuple[dict, dict, dict]:
    P = _params(cfg)
    regime = model.lifespan_bound(P).regime if _has_bound(P) else None
    envelope = cfg["simulate"]["envelope"] and regime is not None
    extra = {"calU_every": 1} if envelope and regime is Regime.CRITICAL_P0 else {}
    sc = _solver_config(cfg, **extra)
    trace, rep = solver.evolve(P, config=sc)
    _write(out / "trace.csv", solver.trace_to_csv(trace))
    body = json.loads(rep.to_json())
    body["u0_identity_residual"] = solver.u0_identity_residual(trace, P.mu)
    _write(out / "blowup.json", dumps(body))
    suites_out, consts = {}, {}
    if envelope:
        env = iterlab.envelope_vs_simulation(P, trace, j_max=cfg["simulate"]["j_max"])
        ov = env.overlay
        keep = np.isfinite(ov["log_bound"])
        _write(out / "envelope.csv", _csv(["t", "log_measured", "log_bound"],
                                          zip(ov["t"][keep], ov["log_measured"][keep], ov["log_bound"][keep])))
        _write(out / "envelope.json", dumps(env.as_dict()))
        suites_out["envelope"] = _summary(env.passed)
        consts = env.constants
        print(f"envelope check ({env.functional}, {env.checked} envelopes): "
              f"{'pass' if env.passed else 'FAIL'}")
    emit_plot_data(out)
    status = f"blow-up in [{rep.lifespan_lo:.6g}, {rep.lifespan_hi:.6g}]" if rep.blew_up else f"no blow-up ({rep.trigger})"
    print(f"{P.as_dict()}: {status}")
    return suites_out, consts, {}


def _has_bound(P: ModelParams) -> bool:
    try:
        model.lifespan_bound(P)
    except SupercriticalError:
        return False
    return True


def _mode_sweep(cfg: dict, out: Path) -> tuple[dict, dict, dict]:
    P = _params(cfg)
    if not _has_bound(P):
        raise ConfigError(f"p={P.p} is supercritical; no lifespan estimate to compare with")
    sc = _solver_config(cfg, record_dt=1.0)
    res = solver.lifespan_sweep(P, cfg["sweep"]["eps"], sc, workers=cfg["sweep"]["workers"])
    rows = zip(res.eps, res.lifespan_lo, res.lifespan_hi, res.blew_up)
    _write(out / "sweep.csv", _csv(["eps", "T_lo", "T_hi", "blew_up"],
                                   ((e, lo if lo is not None else math.nan, hi if hi is not None else math.nan, b)
                                    for e, lo, hi, b in rows)))
    body = res.as_dict()
    tol = cfg["sweep"]["tolerance"]
    suites_out = {}
    if tol is not None:
        rel = abs(res.slope - res.predicted_exponent) / abs(res.predicted_exponent)
        body["rel_dev"] = rel
        body["tolerance"] = tol
        body["passed"] = bool(rel <= tol)
        suites_out["slope"] = _summary(body["passed"])
    _write(out / "sweep.json", dumps(body))
    emit_plot_data(out)
    print(f"fitted slope {res.slope:.4f} (predicted {res.predicted_exponent:.4f}, form {res.form}, "
          f"{res.used}/{len(res.eps)} runs used)")
    return suites_out, {}, {}


def _mode_iterate(cfg: dict, out: Path) -> tuple[dict, dict, dict]:
    P = _params(cfg)
    if not _has_bound(P):
        raise ConfigError(f"p={P.p} is supercritical; no iteration applies")
    rep = iterlab.iteration_report(P, j_max=cfg["iterate"]["j_max"], truncate=cfg["iterate"]["truncate"])
    _write(out / "iteration.json", dumps(rep))
    passed = not rep["violations"]
    print(f"regime {rep['regime']}: {len(rep['violations'])} violations")
    consts = {key: rep["sequences"].get(key) for key in ("C", "K", "L", "log_N") if key in rep["sequences"]}
    return {"iteration": _summary(passed)}, consts, {}


def _mode_plot_data(cfg: dict, out: Path) -> tuple[dict, dict, dict]:
    try:
        written = emit_plot_data(out)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    print("wrote " + ", ".join(written))
    return {}, {}, {}


_RUNNERS = {
    "exponents": _mode_exponents,
    "kernel-verify": _mode_kernel_verify,
    "weights-verify": _mode_weights_verify,
    "simulate": _mode_simulate,
    "sweep": _mode_sweep,
    "iterate": _mode_iterate,
    "plot-data": _mode_plot_data,
}


def run(cfg: dict) -> int:
    """Execute a resolved configuration; returns the exit status."""
    out = Path(cfg["output"]["dir"])
    t0 = time.perf_counter()
    suite_counts, consts, timings = _RUNNERS[cfg["mode"]](cfg, out)
    wall = time.perf_counter() - t0
    if cfg["mode"] != "plot-data":
        manifest = {
            "mode": cfg["mode"],
            "config": cfg,
            "config_hash": config_hash(cfg),
            "version": __version__,
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "wall_time_s": wall,
            "suite_timings_s": timings,
            "suites": suite_counts,
            "calibrated_constants": consts,
        }
        _write(out / "manifest.json", dumps(manifest))
    failed = any(c.get("failed") for c in suite_counts.values())
    return EXIT_SUITE if failed else EXIT_OK


# ---------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON settings file")
    common.add_argument("--preset", choices=sorted(PRESETS), help="named parameter set")
    common.add_argument("--out", help="output directory (default edslab_out)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    par = common.add_argument_group("model parameters")
    par.add_argument("--n", type=int)
    par.add_argument("--k", type=float)
    par.add_argument("--mu", type=float)
    par.add_argument("--p", type=float)
    par.add_argument("--R", type=float)
    par.add_argument("--eps", help="data size; in sweep mode a range a:b:Nlog, a:b:Nlin or a comma list")
    sol = common.add_argument_group("solver")
    sol.add_argument("--dr", type=float)
    sol.add_argument("--t-max", type=float)
    sol.add_argument("--cfl", type=float)
    sol.add_argument("--record-dt", type=float)
    sol.add_argument("--calU-every", type=int)

    parser = argparse.ArgumentParser(prog="edslab", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"edslab {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    sub.add_parser("exponents", parents=[common], help="critical exponents and lifespan estimate")
    kv = sub.add_parser("kernel-verify", parents=[common], help="kernel and identity suites")
    kv.add_argument("--grid", choices=("default", "coarse"))
    kv.add_argument("--seed", type=int)
    sub.add_parser("weights-verify", parents=[common], help="weight-bound calibration and check")
    sm = sub.add_parser("simulate", parents=[common], help="single simulation with envelope check")
    sm.add_argument("--no-envelope", action="store_true", help="skip the envelope comparison")
    sm.add_argument("--j-max", type=int)
    sw = sub.add_parser("sweep", parents=[common], help="lifespan sweep over eps")
    sw.add_argument("--workers", type=int, help="process count (env EDSLAB_WORKERS otherwise)")
    sw.add_argument("--tolerance", type=float, help="relative slope tolerance; enables the slope check")
    it = sub.add_parser("iterate", parents=[common], help="iteration sequences and thresholds")
    it.add_argument("--j-max", type=int)
    it.add_argument("--truncate", type=int)
    sub.add_parser("plot-data", parents=[common], help="rebuild plot data files in --out")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    mode = args.mode
    ov: dict = {"params": {}, "solver": {}}
    if args.preset:
        ov["preset"] = args.preset
    for key in ("n", "k", "mu", "p", "R"):
        if getattr(args, key) is not None:
            ov["params"][key] = getattr(args, key)
    if args.eps is not None:
        if mode == "sweep":
            ov["sweep"] = {"eps": args.eps}
        else:
            try:
                ov["params"]["eps"] = float(args.eps)
            except ValueError:
                raise ConfigError(f"--eps must be a number in {mode} mode") from None
    for key, dest in (("dr", "dr"), ("t_max", "t_max"), ("cfl", "cfl"), ("record_dt", "record_dt"),
                      ("calU_every", "calU_every")):
        if getattr(args, key) is not None:
            ov["solver"][dest] = getattr(args, key)
    if args.out:
        ov["output"] = {"dir": args.out}
    if mode == "kernel-verify":
        if args.grid:
            ov["kernel"] = {"grid": args.grid}
        if args.seed is not None:
            ov["seed"] = args.seed
    if mode == "simulate":
        if args.no_envelope:
            ov.setdefault("simulate", {})["envelope"] = False
        if args.j_max is not None:
            ov.setdefault("simulate", {})["j_max"] = args.j_max
    if mode == "sweep":
        sec = ov.setdefault("sweep", {})
        if args.workers is not None:
            sec["workers"] = args.workers
        if args.tolerance is not None:
            sec["tolerance"] = args.tolerance
    if mode == "iterate":
        sec = {}
        if args.j_max is not None:
            sec["j_max"] = args.j_max
        if args.truncate is not None:
            sec["truncate"] = args.truncate
        ov["iterate"] = sec
    return ov


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_cfg = load_config(args.config) if args.config else {}
        cfg = resolve_config(args.mode, file_cfg, _overrides(args))
    except ConfigError as exc:
        print(f"edslab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("running %s with config hash %s", cfg["mode"], config_hash(cfg))
    try:
        return run(cfg)
    except ConfigError as exc:
        print(f"edslab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime fault", exc_info=True)
        print(f"edslab: runtime fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
