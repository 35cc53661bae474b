"""Command-line runner: ``fractional-korn run | report | constants | seminorm``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import os
import platform
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend_name
from .config import ConfigError, Experiment, RunConfig, default_config_path, load_config
from .constants import ConstantLedger, SpOneError
from .experiments import SuiteReport, scan, scan_rows
from .registry import RegistryError, build_domain, build_field, run_suite
from .seminorm import EstimatorConfig, EstimatorError, seminorm_pair

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
JOBS_ENV = "FRACKORN_JOBS"


def cache_key(suite: str, parameters: dict, seed: int) -> str:
    """sha256 over canonical JSON of the inputs; key order does not matter."""
    blob = json.dumps({"suite": suite, "parameters": parameters, "seed": seed}, sort_keys=True,
                      separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_jsonable) + "\n"


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _experiment_key(exp: Experiment) -> str:
    params = {"params": exp.params, "grid": exp.grid, "suites": list(exp.suites),
              "estimator": dataclasses.asdict(exp.estimator), "version": __version__}
    return cache_key(exp.suite, params, exp.seed)


def _execute(exp: Experiment, catalogue: dict) -> list:
    if exp.suite == "scan":
        reports = scan(exp.grid, exp.suites, exp.estimator, base=exp.params, catalogue=catalogue)
    else:
        reports = [run_suite(exp.suite, exp.params, exp.estimator, catalogue)]
    return [r.to_dict() for r in reports]


def _timed_execute(exp, catalogue):
    t0 = time.perf_counter()
    out = _execute(exp, catalogue)
    return out, time.perf_counter() - t0


def _resolve_jobs(flag):
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    return 1


def run(config: RunConfig, out_dir: Path, jobs: int = 1, config_path: str = "") -> int:
    """Execute every experiment; returns the process exit code."""
    out_dir = Path(out_dir)
    rep_dir = out_dir / "reports"
    started = datetime.now(timezone.utc).isoformat()
    keys = [_experiment_key(e) for e in config.experiments]
    results, timings, cached = {}, {}, set()
    todo = []
    for exp, key in zip(config.experiments, keys):
        path = rep_dir / f"{exp.name}.json"
        if config.cache == "reuse" and path.exists():
            try:
                doc = json.loads(path.read_text())
            except json.JSONDecodeError:
                doc = None
            if doc and doc.get("cache_key") == key:
                results[exp.name] = doc["reports"]
                cached.add(exp.name)
                continue
        todo.append(exp)
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {e.name: pool.submit(_timed_execute, e, config.catalogue) for e in todo}
            for name, fut in futs.items():
                results[name], timings[name] = fut.result()
    else:
        for e in todo:
            results[e.name], timings[e.name] = _timed_execute(e, config.catalogue)

    summary = [["experiment", "suite", "report", "passed", "checks", "failed_checks"]]
    entries = []
    all_passed = True
    for exp, key in zip(config.experiments, keys):
        reports = results[exp.name]
        doc = {"experiment": exp.name, "suite": exp.suite, "cache_key": key, "reports": reports}
        if exp.name not in cached:
            write_atomic(rep_dir / f"{exp.name}.json", _dumps(doc))
        if exp.suite == "scan":
            rows = scan_rows([SuiteReport.from_dict(r) for r in reports]) if reports else [["suite"]]
            write_atomic(out_dir / "scans" / f"{exp.name}.csv", _csv_text(rows))
        exp_passed = True
        for i, r in enumerate(reports):
            hard = [c for c in r["checks"] if c["hard"]]
            failed = sum(not c["passed"] for c in hard)
            summary.append([exp.name, r["suite"], i, r["passed"], len(r["checks"]), failed])
            exp_passed &= r["passed"]
        all_passed &= exp_passed
        entries.append({"name": exp.name, "suite": exp.suite, "cache_key": key, "seed": exp.seed,
                        "file": f"reports/{exp.name}.json", "passed": exp_passed, "cached": exp.name in cached,
                        "seconds": round(timings.get(exp.name, 0.0), 3)})
    write_atomic(out_dir / "summary.csv", _csv_text(summary))
    manifest = {
        "package": "fractional-korn", "version": __version__, "config": str(config_path),
        "python": platform.python_version(), "numpy": np.__version__, "backend": backend_name(),
        "jobs": jobs, "cache": config.cache, "passed": all_passed, "experiments": entries,
        "timestamps": {"started": started, "finished": datetime.now(timezone.utc).isoformat()},
    }
    write_atomic(out_dir / "manifest.json", _dumps(manifest))
    return EXIT_OK if all_passed else EXIT_FAIL


# --------------------------------------------------------------------------
# report


def _fmt(v, e=None):
    s = f"{v:.6g}" if isinstance(v, (int, float)) else str(v)
    if e:
        s += f" +/- {e:.2g}"
    return s


def load_results(results_dir: Path):
    results_dir = Path(results_dir)
    try:
        manifest = json.loads((results_dir / "manifest.json").read_text())
        entries = manifest["experiments"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"missing or corrupt manifest in {results_dir}: {exc}") from None
    docs = []
    for entry in entries:
        try:
            docs.append(json.loads((results_dir / entry["file"]).read_text()))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot read report for {entry.get('name')}: {exc}") from None
    return manifest, docs


def plot_tables(docs) -> dict:
    """Plot-ready tables keyed by file name."""
    reports = [r for d in docs for r in d["reports"]]
    tables = {}
    const = [r for r in reports if r["suite"] == "constants"]
    if const:
        rows = [["d", "s", "p", "L", "C_K", "c1", "c2"]]
        for r in sorted(const, key=lambda r: tuple(r["parameters"][k] for k in ("s", "p", "L"))):
            P, M = r["parameters"], r["measurements"]
            rows.append([P["d"], P["s"], P["p"], P["L"], P["C_K"], M["c1"]["value"], M["c2"]["value"]])
        tables["c2_vs_L.csv"] = rows
    korn = [r for r in reports if r["suite"] in ("korn_ratio", "monotone_embedding")]
    if korn:
        rows = [["suite", "s", "p", "field", "domain", "ratio", "ratio_std_error"]]
        for r in korn:
            P, M = r["parameters"], r["measurements"]
            key = "seminorm_ratio" if "seminorm_ratio" in M else "full_over_projected"
            if key in M:
                rows.append([r["suite"], P["s"], P["p"], P["field"].get("kind"), P["domain"].get("kind"),
                             M[key]["value"], M[key]["std_error"]])
        tables["korn_ratio_vs_s.csv"] = rows
    return tables


def report(results_dir: Path, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    manifest, docs = load_results(results_dir)
    rows = []
    for d in docs:
        for r in d["reports"]:
            rows.append((d["experiment"], r))
    rows.sort(key=lambda t: t[1]["passed"])  # stable: failures first
    n_fail = sum(not r["passed"] for _, r in rows)
    print(f"{len(rows)} report(s), {n_fail} failing", file=stream)
    for name, r in rows:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status}  {name}  [{r['suite']}]", file=stream)
        for c in sorted(r["checks"], key=lambda c: c["passed"]):
            flag = "ok " if c["passed"] else ("BAD" if c["hard"] else "dia")
            print(f"    {flag} {c['name']}: {_fmt(c['lhs'], c['lhs_err'])} {c['relation']} "
                  f"{_fmt(c['rhs'], c['rhs_err'])}", file=stream)
    for fname, table in plot_tables(docs).items():
        write_atomic(Path(results_dir) / "plots" / fname, _csv_text(table))
    return EXIT_OK if n_fail == 0 else EXIT_FAIL


# --------------------------------------------------------------------------
# entry point


def _parser():
    ap = argparse.ArgumentParser(prog="fractional-korn", description="Numerical checks of fractional Korn inequalities")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the experiments of a config file")
    r.add_argument("--config", help="YAML config (default: the packaged acceptance config)")
    r.add_argument("--out", help="output directory (default: output_dir from the config)")
    r.add_argument("--seed-override", type=int, help="use this seed for every experiment")
    r.add_argument("--jobs", type=int, help=f"worker processes (default: ${JOBS_ENV} or 1)")
    r.add_argument("--cache", choices=("reuse", "recompute"), help="override the config cache policy")

    rp = sub.add_parser("report", help="summarise a results directory")
    rp.add_argument("results_dir")

    c = sub.add_parser("constants", help="print the constant ledger")
    c.add_argument("--d", type=int, default=2)
    c.add_argument("--s", type=float, required=True)
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--L", type=float, required=True)
    c.add_argument("--C-K", dest="C_K", type=float, default=1.0)

    sm = sub.add_parser("seminorm", help="one-off seminorm estimate")
    sm.add_argument("--field", default="bump", help="field name or JSON spec")
    sm.add_argument("--domain", default="disc", help="domain name or JSON spec")
    sm.add_argument("--s", type=float, required=True)
    sm.add_argument("--p", type=float, required=True)
    sm.add_argument("--samples", type=int, default=EstimatorConfig.sample_count)
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--method", default="stratified-shell")
    return ap


def _spec(text):
    text = text.strip()
    return json.loads(text) if text.startswith("{") else text


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            path = args.config or default_config_path()
            cfg = load_config(path)
            if args.seed_override is not None:
                cfg = cfg.with_seed(args.seed_override)
            if args.cache:
                cfg = dataclasses.replace(cfg, cache=args.cache)
            out = Path(args.out or cfg.output_dir)
            return run(cfg, out, _resolve_jobs(args.jobs), str(path))
        if args.command == "report":
            return report(Path(args.results_dir))
        if args.command == "constants":
            rec = ConstantLedger(args.d, args.s, args.p, args.L, args.C_K).as_record()
            sys.stdout.write(_dumps(rec))
            return EXIT_OK
        if args.command == "seminorm":
            u, D = build_field(_spec(args.field)), build_domain(_spec(args.domain))
            est_cfg = EstimatorConfig(sample_count=args.samples, rng_seed=args.seed, method=args.method)
            full, proj = seminorm_pair(u, D, args.s, args.p, est_cfg)
            sys.stdout.write(_dumps({"gagliardo": full.to_record(), "projected": proj.to_record()}))
            return EXIT_OK
    except (ConfigError, RegistryError, SpOneError, EstimatorError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
