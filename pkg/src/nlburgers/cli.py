"""Command-line front end: validate, simulate, profile, verify, sweep.

Exit codes: 0 ok, 1 check or hypothesis failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .diagnostics import DECAY_BANDS, fit_decay_exponent, report_passed, verify_run
from .errors import ConfigInvalid, InsufficientData, KernelError, NLBurgersError
from .evolution import RunRecord, simulate
from .kernels import pair_from_config, validate_kernel_pair
from .profiles import build_profile_closed_form, build_profile_shooting, profile_residual

log = logging.getLogger("nlburgers")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load_config(path, seed=None, policy=None) -> dict:
    try:
        cfg = cfgmod.load(path)
    except FileNotFoundError as exc:
        raise UsageError(f"config not found: {path}") from exc
    except (ConfigInvalid, OSError) as exc:
        raise UsageError(str(exc)) from exc
    if seed is not None:
        cfg["seed"] = int(seed)
    if policy is not None:
        cfg["policy"] = policy
    return cfg


# ------------------------------------------------------------------ validate


def cmd_validate(args) -> int:
    cfg = _load_config(args.config)
    try:
        pair = pair_from_config(cfg["kernel"])
        report = validate_kernel_pair(pair)
    except KernelError as exc:
        print(f"kernel check failed: {exc}")
        return EXIT_FAIL
    print(f"A = {report.A:.12g}")
    print(f"B = {report.B:.12g}")
    print(f"C_GK = {report.C_GK:.12g}")
    print(f"mass_K = {report.mass_K:.12g}")
    for name, ok in report.flags.items():
        print(f"  {name:16s} {'ok' if ok else 'FAIL'}")
    if args.json:
        print(json.dumps(report.as_dict(), sort_keys=True))
    return EXIT_OK if report.valid else EXIT_FAIL


# ------------------------------------------------------------------ simulate


def run_and_save(cfg: dict, out) -> dict:
    """Simulate ``cfg`` and write the run directory; returns the manifest."""
    out = Path(out)
    run = simulate(cfg)
    meta = run.save(out)
    manifest = {
        "run_id": f"{meta['config_hash']}-s{cfg['seed']}",
        "config_hash": meta["config_hash"],
        "seed": cfg["seed"],
        "tool_version": __version__,
        "paths": {
            "config": "config.json",
            "series": "series.csv",
            "run": "run.json",
            "snapshots": meta["snapshots"],
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    s = run.series
    drift = float(np.max(np.abs(s["mass"] - run.mass0)))
    print(
        f"t={run.T_final:g} steps={meta['steps']} L1={s['L1'][-1]:.6g} L2={s['L2'][-1]:.6g} "
        f"Linf={s['Linf'][-1]:.6g} mass_drift={drift:.3e}"
    )
    return manifest


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config, args.seed, args.policy)
    try:
        run_and_save(cfg, args.out)
    except NLBurgersError as exc:
        print(f"simulation failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        print(f"see {args.out} for partial output" if Path(args.out).exists() else "no output written", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# ------------------------------------------------------------------ profile


def cmd_profile(args) -> int:
    try:
        closed = build_profile_closed_form(args.m, args.A, args.B)
        shoot = build_profile_shooting(args.m, args.A, args.B)
    except NLBurgersError as exc:
        print(f"profile failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_FAIL
    width = args.xi_max if args.xi_max else 12.0 * math.sqrt(args.A)
    xi = np.linspace(-width, width, args.points)
    f = closed(xi)
    agreement = float(np.max(np.abs(f - shoot(xi))))
    fine = np.arange(-width, width, 0.01 * math.sqrt(args.A))
    meta = {
        "m": args.m,
        "A": args.A,
        "B": args.B,
        "C_norm": closed.C_norm if math.isfinite(closed.C_norm) else None,
        "f0": closed.f0,
        "mass": closed.mass(),
        "residual": profile_residual(closed, fine),
        "shooting_agreement": agreement,
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["xi", "f"])
    w.writerows([[repr(float(a)), repr(float(b))] for a, b in zip(xi, f)])
    out.with_suffix(".csv").write_text(buf.getvalue())
    out.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    print(json.dumps(meta, sort_keys=True))
    return EXIT_OK


# ------------------------------------------------------------------ verify


def format_report(report: dict) -> str:
    lines = [f"{'check':30s} {'status':8s} {'slack':>12s}  anchor"]
    for r in report["rows"]:
        status = "skip" if r["status"] == "skipped" else ("pass" if r["pass"] else "FAIL")
        slack = r["worst_slack"]
        slack = f"{slack:12.4g}" if isinstance(slack, float) else f"{str(slack):>12s}"
        lines.append(f"{r['check']:30s} {status:8s} {slack}  {r['anchor']}")
    return "\n".join(lines)


def cmd_verify(args) -> int:
    run_dir = Path(args.run)
    if not (run_dir / "run.json").exists():
        raise UsageError(f"{run_dir} is not a run directory")
    run = RunRecord.load(run_dir)
    paired = RunRecord.load(args.paired) if args.paired else None
    try:
        report = verify_run(run, paired=paired, moments=args.moments)
    except NLBurgersError as exc:
        print(f"verification aborted ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out) if args.out else run_dir / "report.json"
    out.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(format_report(report))
    ok = report_passed(report)
    if not ok:
        print("failing: " + ", ".join(report["failing"]))
    return EXIT_OK if ok else EXIT_FAIL


# ------------------------------------------------------------------ sweep


def _set_dotted(cfg: dict, key: str, value):
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def expand_sweep(sweep: dict) -> list:
    """Cartesian product of ``vary`` (dotted keys) over ``base``, plus explicit ``runs``."""
    base = sweep.get("base", {})
    configs = []
    vary = sweep.get("vary", {})
    if vary:
        keys = sorted(vary)
        for combo in itertools.product(*(vary[k] for k in keys)):
            cfg = copy.deepcopy(base)
            for k, v in zip(keys, combo):
                if k in ("kernel", "initial"):
                    cfg[k] = copy.deepcopy(v)
                else:
                    _set_dotted(cfg, k, v)
            configs.append(cfg)
    for over in sweep.get("runs", []):
        cfg = copy.deepcopy(base)
        for k, v in over.items():
            _set_dotted(cfg, k, v)
        configs.append(cfg)
    return configs


def _sweep_worker(job):
    idx, cfg, out = job
    logging.disable(logging.WARNING)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            cfg = cfgmod.normalize(cfg)
            manifest = run_and_save(cfg, out)
        except NLBurgersError as exc:
            return idx, {"error": f"{type(exc).__name__}: {exc}", "dir": str(out)}, []
        series = RunRecord.load(out).series
    fits = []
    T = float(series.t[-1])
    for col in DECAY_BANDS:
        try:
            f = fit_decay_exponent(series, col, (T / 16.0, T))
            fits.append((col, f.slope, f.intercept, f.residual, f.window[0], f.window[1]))
        except InsufficientData:
            fits.append((col, math.nan, math.nan, math.nan, T / 16.0, T))
    manifest["dir"] = str(out)
    return idx, manifest, fits


def cmd_sweep(args) -> int:
    try:
        sweep = json.loads(Path(args.config).read_text())
    except FileNotFoundError as exc:
        raise UsageError(f"sweep config not found: {args.config}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config}: {exc}") from exc
    configs = expand_sweep(sweep)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cfg in configs:
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.policy is not None:
            cfg["policy"] = args.policy
    jobs = [(i, cfg, out / f"run_{i:03d}") for i, cfg in enumerate(configs)]
    results = []
    if jobs:
        if args.threads and args.threads > 1:
            with ProcessPoolExecutor(max_workers=args.threads) as pool:
                results = list(pool.map(_sweep_worker, jobs))
        else:
            results = [_sweep_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    manifests = [m for _, m, _ in results]
    (out / "manifests.json").write_text(json.dumps(manifests, sort_keys=True, indent=2) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "run_id", "channel", "slope", "intercept", "residual", "t_a", "t_b"])
    for idx, manifest, fits in results:
        for row in fits:
            w.writerow([idx, manifest.get("run_id", ""), row[0], *[repr(float(v)) for v in row[1:]]])
    (out / "decay_fits.csv").write_text(buf.getvalue())
    failed = sum(1 for m in manifests if "error" in m)
    print(f"{len(manifests)} runs, {failed} failed; manifests in {out / 'manifests.json'}")
    return EXIT_OK


# ------------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlburgers", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check kernel hypotheses and print A, B, C_GK")
    p.add_argument("--config", required=True)
    p.add_argument("--json", action="store_true", help="also print the report as JSON")
    p.set_defaults(func=cmd_validate)

    def run_flags(p):
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--policy", choices=cfgmod.POLICIES)

    p = sub.add_parser("simulate", help="run one configuration")
    run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("profile", help="tabulate the Burgers source profile")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--A", type=float, required=True)
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--out", required=True, help="output prefix (.csv and .json are written)")
    p.add_argument("--points", type=int, default=2001)
    p.add_argument("--xi-max", type=float, default=None)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("verify", help="check a finished run claim by claim")
    p.add_argument("run")
    p.add_argument("--paired", help="second run directory for the comparison check")
    p.add_argument("--moments", choices=("discrete", "continuous"), default="discrete")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a grid of configurations")
    run_flags(p)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "profile" and not args.A > 0:
        print("A must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
