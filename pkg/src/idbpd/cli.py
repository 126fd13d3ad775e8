"""Command line entry point: ``idbpd run|compare|gradcheck <config.json>``.

Exit codes: 0 success, 1 configuration error, 2 numeric abort, 3 gradient
check failure. Set ``IDBPD_LOG_LEVEL`` (e.g. ``DEBUG``) for verbose logs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .baselines import DiscretizationConfig, GdmaConfig, adaptive_discretization_solve, gdma_solve
from .metrics import (DEFAULT_EVAL_STEPS, argmin_worst, implicit_value_and_grad, kkt_residuals,
                      trace_reports)
from .problem_api import OracleError, ProblemOracles, check_gradient, oracle_gradient_errors
from .problems.data import load_csv_dataset, make_blob_split
from .problems.dro_mtl import DEFAULT_LAMBDA_REG, calibrate_threshold, make_dro_mtl
from .problems.testbed import make_testbed
from .schedule import Schedule
from .solver import SolverAbort, SolverConfig, solve

log = logging.getLogger("idbpd")

SCHEMA_VERSION = 1
METHODS = ("idbpd", "gdma", "discretization")
TRACE_COLUMNS = ("k", "f", "g_plus", "stationarity", "slackness", "lambda", "d_norm", "wallclock_ns")
PANELS = ("stationarity", "infeasibility", "slackness", "objective")
GRADCHECK_TOL = 1e-4
PLOT_FLOOR = 1e-16

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_GRADCHECK = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# configuration ---------------------------------------------------------------

_SOLVER_KEYS = {"inner", "momentum", "gamma_override", "tol", "inner_stepsize_y", "inner_stepsize_w"}
_SCHEDULE_KEYS = {f.name for f in fields(Schedule)}
_GDMA_KEYS = {f.name for f in fields(GdmaConfig)} - {"record_stride"}
_DISC_KEYS = {f.name for f in fields(DiscretizationConfig)} - {"record_stride"}
_RUN_KEYS = {"schema_version", "name", "problem", "method", "seed", "eval_steps", "record_stride"} | set(METHODS)


@dataclass
class RunConfig:
    problem: dict
    method: str
    params: dict
    seed: int = 0
    eval_steps: int = DEFAULT_EVAL_STEPS
    record_stride: int = 1
    name: str = ""
    base_dir: str = "."

    def canonical(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "problem": self.problem, "method": self.method,
                self.method: self.params, "seed": self.seed, "eval_steps": self.eval_steps,
                "record_stride": self.record_stride}

    @property
    def config_hash(self) -> str:
        return config_hash(self.canonical())


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    return cfg


def _int(val, name, minimum=None):
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{name} must be an integer")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{name} must be at least {minimum}")
    return val


def _check_problem(spec, base_dir: Path) -> dict:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("problem must be an object with a 'kind'")
    kind = spec["kind"]
    if kind == "testbed":
        allowed = {"kind", "seed", "n", "m", "l", "eta", "reg", "r"}
    elif kind == "dro-mtl":
        allowed = {"kind", "data", "hidden_width", "lambda_reg", "r", "calibration"}
        data = spec.get("data")
        if not isinstance(data, dict) or data.get("source") not in ("blobs", "csv"):
            raise ConfigError("dro-mtl problems need data.source 'blobs' or 'csv'")
        if data["source"] == "csv":
            if "path" not in data or "label_columns" not in data:
                raise ConfigError("csv data needs 'path' and 'label_columns'")
            if not (base_dir / data["path"]).is_file():
                raise ConfigError(f"data file not found: {data['path']}")
        if "r" not in spec and "calibration" not in spec:
            raise ConfigError("dro-mtl problems need a threshold 'r' or a 'calibration' block")
    else:
        raise ConfigError(f"unknown problem kind {kind!r}")
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"unknown problem keys {sorted(unknown)}")
    return spec


def _check_params(method: str, params) -> dict:
    if not isinstance(params, dict):
        raise ConfigError(f"'{method}' block must be an object")
    allowed = {"idbpd": _SCHEDULE_KEYS | _SOLVER_KEYS, "gdma": _GDMA_KEYS, "discretization": _DISC_KEYS}[method]
    unknown = set(params) - allowed
    if unknown:
        raise ConfigError(f"unknown {method} keys {sorted(unknown)}")
    try:
        if method == "idbpd":
            Schedule(**{k: v for k, v in params.items() if k in _SCHEDULE_KEYS})
        elif method == "gdma":
            GdmaConfig(**params)
        else:
            DiscretizationConfig(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {method} block: {exc}") from None
    if method == "idbpd" and "horizon" not in params:
        raise ConfigError("idbpd block needs a horizon")
    return params


def parse_run(cfg: dict, base_dir=".", seed=None, stride=None, defaults: dict | None = None) -> RunConfig:
    """Validate one run block; ``defaults`` supplies shared keys in compare mode."""
    merged = dict(defaults or {})
    merged.update(cfg)
    unknown = set(merged) - _RUN_KEYS - {"runs", "parallel", "match_budget"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    method = merged.get("method")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}")
    present = [m for m in METHODS if m in merged]
    if present != [method]:
        raise ConfigError(f"exactly one method block ('{method}') must be present")
    base = Path(base_dir)
    problem = _check_problem(merged.get("problem"), base)
    params = _check_params(method, merged[method])
    run = RunConfig(
        problem=problem, method=method, params=params,
        seed=_int(merged.get("seed", 0) if seed is None else seed, "seed", 0),
        eval_steps=_int(merged.get("eval_steps", DEFAULT_EVAL_STEPS), "eval_steps", 1),
        record_stride=_int(merged.get("record_stride", 1) if stride is None else stride, "record_stride", 1),
        name=str(merged.get("name", method)),
        base_dir=str(base),
    )
    return run


# problem construction ----------------------------------------------------------

def _split_from(data: dict, base_dir: Path):
    if data["source"] == "blobs":
        opts = {k: v for k, v in data.items() if k != "source"}
        return make_blob_split(**opts)
    return load_csv_dataset(base_dir / data["path"], data["label_columns"],
                            data.get("normalization", "z-score"))


def build_problem(spec: dict, base_dir=".") -> tuple[ProblemOracles, dict]:
    """Instantiate a problem; the second value records derived quantities."""
    if spec["kind"] == "testbed":
        opts = {k: v for k, v in spec.items() if k != "kind"}
        tb, kkt = make_testbed(**opts)
        return tb.oracles(), {"kkt_x": kkt.x.tolist(), "kkt_lambda": kkt.lam}
    split = _split_from(spec["data"], Path(base_dir))
    hidden = int(spec.get("hidden_width", 16))
    lam_reg = float(spec.get("lambda_reg", DEFAULT_LAMBDA_REG))
    meta = {"task_sizes": list(split.sizes)}
    if "r" in spec:
        r = float(spec["r"])
    else:
        r = calibrate_threshold(split, hidden, lam_reg, **spec["calibration"])
        meta["calibrated_r"] = r
    return make_dro_mtl(split, hidden, lam_reg, r), meta


def _execute(run: RunConfig, problem: ProblemOracles):
    p = run.params
    if run.method == "idbpd":
        sched = Schedule(**{k: v for k, v in p.items() if k in _SCHEDULE_KEYS})
        cfg = SolverConfig(schedule=sched, record_stride=run.record_stride, seed=run.seed,
                           inner=p.get("inner", "ascent"), momentum=bool(p.get("momentum", False)),
                           gamma=p.get("gamma_override"), tol=p.get("tol"),
                           inner_stepsize_y=p.get("inner_stepsize_y"),
                           inner_stepsize_w=p.get("inner_stepsize_w"))
        return solve(problem, cfg)
    if run.method == "gdma":
        return gdma_solve(problem, GdmaConfig(record_stride=run.record_stride, **p), seed=run.seed)
    return adaptive_discretization_solve(problem, DiscretizationConfig(record_stride=run.record_stride, **p),
                                         seed=run.seed, eval_steps=run.eval_steps)


# serialization --------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trace_csv(path: Path, trace, reports) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for i, rep in enumerate(reports):
            w.writerow([_fmt(trace.k[i]), _fmt(rep.f_value), _fmt(rep.infeasibility),
                        _fmt(rep.stationarity), _fmt(rep.slackness), _fmt(trace.lam[i]),
                        _fmt(trace.d_norm[i]), _fmt(trace.wallclock_ns[i])])


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append({k: (int(v) if k in ("k", "wallclock_ns") else float(v)) for k, v in row.items()})
    return out


def _reports_until_failure(trace, problem, eval_steps):
    reports = []
    for i in range(len(trace.k)):
        try:
            reports.append(kkt_residuals(problem, trace.x[i], trace.lam[i], eval_steps))
        except OracleError as exc:
            log.warning("residuals unavailable at k=%d: %s", trace.k[i], exc)
            break
    return reports


def write_run_outputs(out_dir: Path, run: RunConfig, problem: ProblemOracles, trace, meta: dict,
                      wall_s: float, status: str, message: str = "") -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    if status == "ok":
        reports = trace_reports(trace, problem, run.eval_steps)
    else:
        reports = _reports_until_failure(trace, problem, run.eval_steps)
    n = len(reports)
    write_trace_csv(out_dir / "trace.csv", trace, reports)
    np.savez(out_dir / "iterates.npz", k=np.asarray(trace.k[:n], dtype=np.int64),
             x=np.asarray(trace.x[:n]), lam=np.asarray(trace.lam[:n]))
    summary = {
        "name": run.name,
        "method": run.method,
        "status": status,
        "config_hash": run.config_hash,
        "wall_time_s": wall_s,
        "iterations": trace.iterations,
        "oracle_counts": trace.counts,
        "problem_meta": meta,
    }
    if message:
        summary["message"] = message
    if reports:
        pos = argmin_worst(trace.k[:n], [r.worst for r in reports])
        t, rep = trace.k[pos], reports[pos]
        summary["best_t"] = t
        summary["best_report"] = rep.to_dict()
        summary["final_report"] = reports[-1].to_dict()
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def run_one(run: RunConfig, out_dir: Path, problem=None, meta=None) -> tuple[int, dict]:
    """Build, solve and serialize one run; returns ``(exit code, summary)``."""
    if problem is None:
        problem, meta = build_problem(run.problem, run.base_dir)
    t0 = time.monotonic()
    try:
        trace = _execute(run, problem)
    except SolverAbort as exc:
        log.error("%s: %s", run.name, exc)
        summary = write_run_outputs(out_dir, run, problem, exc.trace, meta or {},
                                    time.monotonic() - t0, "aborted", str(exc))
        return EXIT_NUMERIC, summary
    summary = write_run_outputs(out_dir, run, problem, trace, meta or {}, time.monotonic() - t0, "ok")
    return EXIT_OK, summary


# commands ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        cfg = load_json(args.config)
        run = parse_run(cfg, Path(args.config).parent, args.seed, args.stride)
        problem, meta = build_problem(run.problem, run.base_dir)
    except (ConfigError, ValueError, TypeError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out = Path(args.out or "out")
    code, summary = run_one(run, out, problem, meta)
    if code == EXIT_OK:
        rep = summary["best_report"]
        print(f"{run.name}: best t={summary['best_t']} stationarity={rep['stationarity']:.3e} "
              f"infeasibility={rep['infeasibility']:.3e} slackness={rep['slackness']:.3e}")
    return code


def _compare_worker(payload):
    run, out_dir = payload
    logging.basicConfig(level=_log_level())
    try:
        code, summary = run_one(run, Path(out_dir))
    except (ConfigError, ValueError, TypeError, ArithmeticError) as exc:
        return run.name, EXIT_NUMERIC, {"name": run.name, "status": "failed", "message": str(exc)}
    return run.name, code, summary


def _series(out_dir: Path) -> dict:
    rows = read_trace_csv(out_dir / "trace.csv")
    return {
        "k": [r["k"] for r in rows],
        "stationarity": [r["stationarity"] for r in rows],
        "infeasibility": [r["g_plus"] for r in rows],
        "slackness": [r["slackness"] for r in rows],
        "objective": [r["f"] for r in rows],
    }


def write_panels(out: Path, series: dict, cfg_hash: str) -> list[str]:
    """One overlaid log-scale SVG per metric plus its long-format CSV."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = cfg_hash
    written = []
    for panel in PANELS:
        csv_path = out / f"{panel}.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("run", "k", panel))
            for name, s in series.items():
                for k, v in zip(s["k"], s[panel]):
                    w.writerow((name, str(k), repr(float(v))))
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        for name, s in series.items():
            ax.plot(s["k"], np.maximum(np.asarray(s[panel], dtype=float), PLOT_FLOOR), label=name)
        ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel(panel)
        ax.legend(fontsize="small")
        fig.tight_layout()
        svg_path = out / f"{panel}.svg"
        fig.savefig(svg_path, format="svg",
                    metadata={"Title": panel, "Description": f"config-sha256={cfg_hash}", "Date": None})
        plt.close(fig)
        written += [csv_path.name, svg_path.name]
    return written


def cmd_compare(args) -> int:
    try:
        cfg = load_json(args.config)
        blocks = cfg.get("runs")
        if not isinstance(blocks, list) or len(blocks) < 2:
            raise ConfigError("compare needs a 'runs' list with at least two entries")
        shared = {k: v for k, v in cfg.items() if k not in ("runs", "parallel", "match_budget")}
        base = Path(args.config).parent
        runs = [parse_run(b, base, args.seed, args.stride, defaults=shared) for b in blocks]
        names = [r.name for r in runs]
        if len(set(names)) != len(names):
            raise ConfigError("run names must be unique")
    except (ConfigError, ValueError, TypeError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    parallel = bool(cfg.get("parallel", False)) if args.jobs is None else args.jobs > 1
    jobs = args.jobs or os.cpu_count() or 1
    results: dict[str, tuple[int, dict]] = {}

    def execute(batch):
        payloads = [(r, str(out / r.name)) for r in batch]
        if parallel and len(batch) > 1:
            with ProcessPoolExecutor(max_workers=min(jobs, len(batch))) as pool:
                done = list(pool.map(_compare_worker, payloads))
        else:
            done = [_compare_worker(p) for p in payloads]
        for name, code, summary in done:
            results[name] = (code, summary)

    first = [r for r in runs if r.method == "idbpd"] if cfg.get("match_budget") else []
    execute(first)
    rest = [r for r in runs if r not in first]
    if first:
        budget = max((results[r.name][1].get("oracle_counts", {}).get("primal_gradient_evals", 0)
                      for r in first), default=0)
        if budget > 0:
            for r in rest:
                if r.method in ("gdma", "discretization") and "oracle_budget" not in r.params:
                    r.params = {**r.params, "oracle_budget": int(budget)}
                    if r.method == "gdma":
                        r.params["horizon"] = max(int(r.params.get("horizon", 1000)), int(budget))
    execute(rest)

    survivors = [r.name for r in runs if results[r.name][0] == EXIT_OK]
    cfg_hash = config_hash({"runs": [r.canonical() for r in runs]})
    comparison = {"config_hash": cfg_hash, "runs": [results[r.name][1] for r in runs], "survivors": survivors}
    if not survivors:
        log.error("every run failed")
        with open(out / "comparison.json", "w", encoding="utf-8") as fh:
            json.dump(comparison, fh, indent=2, sort_keys=True)
        return EXIT_NUMERIC
    if len(survivors) == 1:
        log.warning("only one run survived; panels show a single series")
    series = {name: _series(out / name) for name in survivors}
    comparison["panels"] = write_panels(out, series, cfg_hash)
    with open(out / "comparison.json", "w", encoding="utf-8") as fh:
        json.dump(comparison, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name in survivors:
        rep = results[name][1]["final_report"]
        print(f"{name}: stationarity={rep['stationarity']:.3e} infeasibility={rep['infeasibility']:.3e} "
              f"slackness={rep['slackness']:.3e} f={rep['f_value']:.4f}")
    return EXIT_OK


def gradcheck_problem(problem: ProblemOracles, seed: int = 0, step: float = 1e-5) -> dict:
    """Maximum finite-difference errors of every oracle at a seeded point."""
    rng = np.random.default_rng(seed)
    x = problem.initial_point(seed) if problem.initial_point is not None else np.zeros(problem.dim_x)
    x = np.asarray(x, dtype=float) + 0.1 * rng.standard_normal(problem.dim_x)

    def dual(s):
        if s.kind == "simplex":
            return rng.dirichlet(np.ones(s.dim))
        return s.center_point() + 0.1 * rng.standard_normal(s.dim)

    errors = oracle_gradient_errors(problem, x, dual(problem.set_Y), dual(problem.set_W), step)
    for which in ("f", "g"):
        errors[f"implicit_{which}"] = check_gradient(
            lambda v: implicit_value_and_grad(problem, v, which)[0],
            lambda v: implicit_value_and_grad(problem, v, which)[1], x, step)
    return errors


def cmd_gradcheck(args) -> int:
    try:
        cfg = load_json(args.config)
        base = Path(args.config).parent
        spec = _check_problem(cfg.get("problem"), base)
        problem, _ = build_problem(spec, base)
    except (ConfigError, ValueError, TypeError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    errors = gradcheck_problem(problem, seed)
    worst = max(errors.values())
    for name, err in errors.items():
        print(f"{name:16s} {err:.3e}")
    ok = worst <= GRADCHECK_TOL
    print(f"{'PASS' if ok else 'FAIL'} max error {worst:.3e} (tolerance {GRADCHECK_TOL:g})")
    return EXIT_OK if ok else EXIT_GRADCHECK


def _log_level():
    return os.environ.get("IDBPD_LOG_LEVEL", "WARNING").upper()


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idbpd", description="Primal-dual solver for semi-infinite min-max problems")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("compare", cmd_compare), ("gradcheck", cmd_gradcheck)):
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--out", default=None, help="output directory (default ./out)")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--stride", type=int, default=None, help="override the record stride")
        if name == "compare":
            p.add_argument("--jobs", type=int, default=None, help="worker processes (1 = serial)")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=_log_level(), format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        log.error("config error: seed must be nonnegative")
        return EXIT_CONFIG
    if args.stride is not None and args.stride < 1:
        log.error("config error: stride must be at least 1")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
