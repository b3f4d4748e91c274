"""Command-line front end.

Experiments are described by a JSON config; flags override single keys::

    isolab solve --set metric.kind=sphere --set volume=0.01
    isolab sweep --config sweep.json --out results/

Exit status: 0 success, 1 numerical failure or failed assertion, 2 bad config.
"""
import argparse
import copy
import csv
import io
import itertools
import json
import math
import os
import sys
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .bubble import SolverConfig, solve_beta, symmetry_check, verify_uniqueness
from .concentration import AnnealSchedule, concentration_experiment
from .errors import InputError, IsolabError, ParseError
from .grid import GridSpec, VoxelDomain, average_over_offsets, partition_components, small_diameter_pipeline
from .metrics import metric_from_spec
from .profile import (berard_meyer_check, continuity_scan, default_v_grid, fit_ap, profile_expansion_check,
                      psi_c1_check, sweep_v)

COMMON = {"command", "metric", "solver", "seed", "out"}
DEFAULTS = {
    "solve": {"metric": {"kind": "euclidean", "dimension": 2}, "center": None, "volume": 0.01},
    "sweep": {"metric": {"kind": "sphere", "dimension": 2}, "center": None,
              "v_grid": {"lo": 1e-4, "hi": 1e-2, "per_decade": 8}},
    "profile": {"metric": {"kind": "preset", "name": "bump"},
                "p_grid": {"lo": [-0.05, -0.05], "hi": [0.05, 0.05], "num": 3},
                "v_grid": {"lo": 1e-4, "hi": 1e-2, "per_decade": 3}, "polish": True},
    "grid": {"domain": {"shape": "disc", "size": 1.0, "h": 1 / 256}, "meshes": [0.25, 0.5], "samples": 10000,
             "identity_mesh": 0.5, "pipeline_mesh": 0.5},
    "concentrate": {"volumes": [6400, 1600, 400], "schedule": {}, "quality_gate": 1.1, "r_factor": 5.0,
                    "control": True},
    "checks": {"metric": {"kind": "sphere", "dimension": 2}, "center": None,
               "v_grid": {"lo": 1e-3, "hi": 0.05, "num": 12}, "delta": 0.9, "psi_max_spread": 1.1,
               "uniqueness_trials": 10, "uniqueness_volume": 0.01, "uniqueness_tol": 1e-6,
               "symmetry_tol": 1e-8},
}
NEEDS_METRIC = {"solve", "sweep", "profile", "checks"}
SOLVER_KEYS = set(SolverConfig.__dataclass_fields__)


def _deep_merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "metric":
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _set_key(cfg, dotted, raw):
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise InputError(f"--set {dotted}: {k} is not an object")
    node[keys[-1]] = value


def _v_grid(spec):
    if isinstance(spec, dict):
        unknown = set(spec) - {"lo", "hi", "per_decade", "num"}
        if unknown:
            raise InputError(f"unknown v_grid keys: {sorted(unknown)}")
        if "num" in spec:
            return np.linspace(spec["lo"], spec["hi"], int(spec["num"]))
        return default_v_grid(spec.get("lo", 1e-4), spec.get("hi", 1e-2), spec.get("per_decade", 8))
    return np.asarray(spec, dtype=float)


def _p_grid(spec, n):
    if isinstance(spec, dict):
        lo, hi, k = spec["lo"], spec["hi"], int(spec["num"])
        if len(lo) != n or len(hi) != n:
            raise InputError("p_grid bounds must match the dimension")
        axes = [np.linspace(a, b, k) for a, b in zip(lo, hi)]
        return np.array(list(itertools.product(*axes)))
    return np.asarray(spec, dtype=float).reshape(-1, n)


def resolve_config(raw):
    """Fill defaults, reject unknown keys and build the runtime objects."""
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    cmd = raw.get("command")
    if cmd not in DEFAULTS:
        raise InputError(f"unknown command {cmd!r}; choose from {sorted(DEFAULTS)}")
    allowed = COMMON | set(DEFAULTS[cmd])
    unknown = set(raw) - allowed
    if unknown:
        raise InputError(f"unknown config keys for {cmd}: {sorted(unknown)}")
    cfg = _deep_merge({"seed": 0, "solver": {}, **DEFAULTS[cmd]}, raw)
    bad = set(cfg["solver"]) - SOLVER_KEYS
    if bad:
        raise InputError(f"unknown solver keys: {sorted(bad)}")
    solver = dict(cfg["solver"])
    if "grid" in solver:
        solver["grid"] = tuple(solver["grid"])
    rt = {"solver": SolverConfig(**solver)}
    if cmd in NEEDS_METRIC:
        m = metric_from_spec(cfg["metric"])
        rt["metric"] = m
        center = cfg.get("center")
        rt["center"] = np.zeros(m.dimension) if center is None else np.asarray(center, dtype=float)
        if rt["center"].shape != (m.dimension,):
            raise InputError("center must match the metric dimension")
    if "v_grid" in cfg:
        rt["v_grid"] = _v_grid(cfg["v_grid"])
        if np.any(np.diff(rt["v_grid"]) <= 0) or np.any(rt["v_grid"] <= 0):
            raise InputError("v_grid must be positive and ascending")
    if "p_grid" in cfg:
        rt["p_grid"] = _p_grid(cfg["p_grid"], rt["metric"].dimension)
    if cmd == "concentrate":
        rt["schedule"] = AnnealSchedule(**{"seed": cfg["seed"], **cfg["schedule"]})
    if cmd == "grid":
        d = cfg["domain"]
        shape = d.get("shape")
        if shape == "square":
            rt["domain"] = VoxelDomain.box(d.get("size", 1.0), d.get("h", 1 / 256), d.get("dimension", 2))
        elif shape == "disc":
            rt["domain"] = VoxelDomain.ball(d.get("size", 1.0), d.get("h", 1 / 256), d.get("dimension", 2))
        elif shape == "file":
            rt["domain"] = VoxelDomain.load(d["path"])
        else:
            raise InputError(f"unknown domain shape {shape!r}")
        if not isinstance(cfg["samples"], int) or cfg["samples"] < 100:
            raise InputError("samples must be an integer >= 100")
        if any(not isinstance(r, (int, float)) or r <= 0 for r in cfg["meshes"]):
            raise InputError("meshes must be positive numbers")
    return cfg, rt


# -- commands -------------------------------------------------------------------

def _no_com(solver):
    return replace(solver, compute_com=False)


def cmd_solve(cfg, rt, threads):
    pb = solve_beta(rt["center"], float(cfg["volume"]), rt["metric"], rt["solver"])
    return {"bubble": pb.to_dict()}, True, None


def _sample_rows(samples):
    rows = []
    for s in samples:
        rows.append([*np.asarray(s.center).tolist(), s.volume, s.area, s.curvature, s.residual, s.com_offset])
    return rows


def cmd_sweep(cfg, rt, threads):
    m = rt["metric"]
    samples = sweep_v(rt["center"], rt["v_grid"], m, rt["solver"])
    out = {"samples": [s.to_dict() for s in samples]}
    ok = all(s.converged for s in samples)
    if ok:
        out["fit"] = fit_ap(samples, m.dimension).to_dict()
    header = [*"xyz"[:m.dimension], "v", "f", "lambda", "residual", "com_offset"]
    return out, ok, (header, _sample_rows(samples))


def cmd_profile(cfg, rt, threads):
    m, grid = rt["metric"], rt["p_grid"]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            chk = profile_expansion_check(m, grid, rt["v_grid"], _no_com(rt["solver"]), cfg["polish"], pool.map)
    else:
        chk = profile_expansion_check(m, grid, rt["v_grid"], _no_com(rt["solver"]), cfg["polish"])
    spacing = min(float(np.min(np.diff(np.unique(grid[:, k])))) for k in range(m.dimension)
                  if len(np.unique(grid[:, k])) > 1)
    dist = [float(np.linalg.norm(np.asarray(e.argmin) - chk.maximizer)) for e in chk.estimates]
    near = all(d <= spacing for e, d in zip(chk.estimates, dist) if e.volume <= 1e-3)
    ok = chk.relative_error <= 0.1 and near
    out = {"check": chk.to_dict(), "argmin_distance": dist, "p_spacing": spacing, "argmin_near_maximizer": near}
    rows = [[*np.asarray(e.argmin).tolist(), e.volume, e.value, None, None, None] for e in chk.estimates]
    header = [*"xyz"[:m.dimension], "v", "f", "lambda", "residual", "com_offset"]
    return out, ok, (header, rows)


def cmd_grid(cfg, rt, threads):
    D = rt["domain"]
    seed = cfg["seed"]
    avgs = [average_over_offsets(D, r, int(cfg["samples"]), seed).to_dict() for r in cfg["meshes"]]
    r = float(cfg["identity_mesh"])
    part = partition_components(D, GridSpec(r, (0.0,) * D.dimension))
    pipe = small_diameter_pipeline(D, float(cfg["pipeline_mesh"]), seed=seed)
    ident_ok = part.identity_exact and part.identity_error <= part.tolerance
    ok = all(a["passed"] for a in avgs) and ident_ok and pipe.diameter_bound_ok
    return {"averages": avgs, "identity": part.to_dict(), "pipeline": pipe.to_dict()}, ok, None


def cmd_concentrate(cfg, rt, threads):
    vols = [int(v) for v in cfg["volumes"]]
    rep = concentration_experiment(vols, rt["schedule"], cfg["quality_gate"], cfg["r_factor"], cfg["seed"])
    out = {"experiment": rep.to_dict()}
    ok = rep.passed
    if cfg["control"]:
        balls = [VoxelDomain.ball(math.sqrt(v / math.pi), 1.0) for v in vols]
        ctrl = concentration_experiment(vols, r_factor=cfg["r_factor"], seed=cfg["seed"], domains=balls)
        worst = max(r["sym_diff"] for r in ctrl.rows)
        out["control"] = {"rows": ctrl.rows, "max_sym_diff": worst, "passed": worst < 0.05}
        ok = ok and worst < 0.05
    header = ["volume", "quality", "sym_diff", "rescaled_diameter"]
    rows = [[r["volume"], r["quality"], r.get("sym_diff"), r.get("rescaled_diameter")] for r in rep.rows]
    return out, ok, (header, rows)


def cmd_checks(cfg, rt, threads):
    m, p, solver = rt["metric"], rt["center"], _no_com(rt["solver"])
    samples = sweep_v(p, rt["v_grid"], m, solver)
    good = [s for s in samples if s.converged and s.volume <= 0.05]
    bm = berard_meyer_check(good, cfg["delta"], m.dimension)
    cont = continuity_scan([s.volume for s in good], [s.area for s in good], m.dimension)
    psi = psi_c1_check(p, None, m, max_spread=cfg["psi_max_spread"], samples=good)
    uv = float(cfg["uniqueness_volume"])
    uni = verify_uniqueness(p, uv, m, int(cfg["uniqueness_trials"]), solver, seed=cfg["seed"])
    sym = symmetry_check(solve_beta(p, uv, m, solver), m)
    psi_required = m.kind == "model"
    results = {
        "berard_meyer": bm.to_dict(),
        "continuity": cont.to_dict(),
        "psi_c1": {**psi.to_dict(), "required": psi_required},
        "uniqueness": uni.to_dict(),
        "symmetry": sym.to_dict(),
        "failed_samples": [s.to_dict() for s in samples if not s.converged],
    }
    sym_ok = (not sym.applicable) or sym.energy < cfg["symmetry_tol"]
    ok = (bm.passed and cont.passed and (psi.passed or not psi_required)
          and uni.passed(cfg["uniqueness_tol"]) and sym_ok)
    return results, ok, None


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "profile": cmd_profile,
    "grid": cmd_grid,
    "concentrate": cmd_concentrate,
    "checks": cmd_checks,
}


# -- output -------------------------------------------------------------------

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if hasattr(x, "to_dict"):
        return _clean(x.to_dict())
    return x


def dumps_report(report):
    return json.dumps(_clean(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def run(raw, out_dir=None, threads=1):
    """Execute a config; returns (status, report dict)."""
    cfg, rt = resolve_config(raw)
    body, ok, table = COMMANDS[cfg["command"]](cfg, rt, threads)
    report = {"command": cfg["command"], "version": __version__, "config": cfg,
              "passed": bool(ok), "result": body}
    out_dir = out_dir or cfg.get("out")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"{cfg['command']}.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_report(report))
        if table is not None:
            with open(os.path.join(out_dir, f"{cfg['command']}.csv"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(_csv_text(*table))
    return (0 if ok else 1), report


def summary_line(report):
    cmd, res = report["command"], report["result"]
    status = "passed" if report["passed"] else "FAILED"
    if cmd == "solve":
        b = res["bubble"]
        return (f"solve {status}: center={b['center']} v={b['volume']:.6g} A={b['area']:.12g} "
                f"lambda={b['lambda']:.10g} residual={b['residual']:.2e}")
    if cmd == "sweep" and "fit" in res:
        return f"sweep {status}: a_p={res['fit']['a_p']:.8f} over {len(res['samples'])} volumes"
    if cmd == "profile":
        c = res["check"]
        return f"profile {status}: S={c['S']:.8f} fitted={c['fit']['a_p']:.8f} expected={c['expected']:.8f}"
    return f"{cmd} {status}"


def build_parser():
    ap = argparse.ArgumentParser(prog="isolab", description="Small-volume isoperimetric experiments.")
    ap.add_argument("--version", action="version", version=f"isolab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out", help="directory for JSON/CSV reports")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (dotted path, JSON value)")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--json", action="store_true", help="print the full JSON report")
        sp.add_argument("--quiet", action="store_true", help="print nothing on success")
    return ap


def _load_config(args):
    raw = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise InputError("config must be a JSON object")
    if raw.get("command", args.command) != args.command:
        raise InputError(f"config is for {raw['command']!r}, not {args.command!r}")
    raw["command"] = args.command
    for item in args.set:
        if "=" not in item:
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        _set_key(raw, k.strip(), v)
    if args.seed is not None:
        if args.seed < 0:
            raise InputError("seed must be non-negative")
        raw["seed"] = args.seed
    return raw


def main(argv=None):
    args = build_parser().parse_args(argv)
    err = sys.stderr
    try:
        raw = _load_config(args)
        resolve_config(raw)
    except ParseError as exc:
        print(f"config error: {exc}", file=err)
        print(exc.caret(), file=err)
        return 2
    except json.JSONDecodeError as exc:
        print(f"config error: {exc.msg} at line {exc.lineno} column {exc.colno}", file=err)
        return 2
    except (IsolabError, ValueError, TypeError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=err)
        return 2
    try:
        status, report = run(raw, args.out, args.threads)
    except IsolabError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "payload": _clean(exc.payload)},
                         sort_keys=True), file=err)
        return 1
    if args.json:
        sys.stdout.write(dumps_report(report))
    elif not args.quiet:
        print(summary_line(report))
    if status:
        print(f"{args.command}: assertion failed", file=err)
    return status


if __name__ == "__main__":
    sys.exit(main())
