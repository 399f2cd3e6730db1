"""``plan`` command line: run, report, check and batch."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, bundled, load_scenario, tomllib
from .report import MalformedLog, build_report, format_report, read_csv, write_csv, write_plot_data
from .sim import run_scenario

DELIM = "=" * 72


def _resolve(cfg_path: str) -> Path:
    p = Path(cfg_path)
    if not p.exists() and not p.suffix and p.parent == Path("."):
        try:
            return bundled(cfg_path)
        except FileNotFoundError:
            pass
    return p


def _load(cfg_path: str):
    p = _resolve(cfg_path)
    try:
        return load_scenario(p), None
    except FileNotFoundError:
        return None, f"error: file not found: {p}"
    except ConfigError as e:
        return None, f"error: {p}: {e}"
    except tomllib.TOMLDecodeError as e:
        return None, f"error: {p}: parse error: {e}"


def _outdir(args, name: str) -> Path:
    base = args.out or os.environ.get("PLAN_LOG_DIR") or "plan_out"
    d = Path(base)
    if getattr(args, "_batch", False):
        d = d / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def execute(cfg_path: str, args) -> int:
    cfg, err = _load(cfg_path)
    if cfg is None:
        print(err, file=sys.stderr)
        return 2
    cfg = cfg.with_overrides(dt=args.dt, seed=args.seed, eta=args.eta, kappa=args.kappa,
                             retime=False if args.no_retime else None)
    log, rep = run_scenario(cfg)
    out = _outdir(args, cfg.name)
    write_csv(log, out / "trajectory.csv")
    text = format_report(rep)
    (out / "report.txt").write_text(text)
    files = ["trajectory.csv", "report.txt"]
    files += [p.name for p in write_plot_data(log, out)]
    if not args.no_plots:
        from .plotting import render_all

        files += [p.name for p in render_all(log, out, cfg.waypoints)]
    print(DELIM)
    print(f"scenario: {cfg.name}  (retiming {'on' if cfg.retime else 'off'})")
    print(DELIM)
    print(text, end="")
    print(DELIM)
    print(f"output: {out}  [{', '.join(files)}]")
    print(DELIM)
    return 0 if rep.accepted else 1


def cmd_run(args) -> int:
    return execute(args.cfg, args)


def cmd_report(args) -> int:
    try:
        log = read_csv(args.csv)
    except FileNotFoundError:
        print(f"error: file not found: {args.csv}", file=sys.stderr)
        return 2
    except MalformedLog as e:
        print(f"error: malformed log: {e}", file=sys.stderr)
        return 2
    rep = build_report(log)
    print(DELIM)
    print(format_report(rep), end="")
    print(DELIM)
    return 0 if rep.accepted else 1


def cmd_check(args) -> int:
    cfg, err = _load(args.cfg)
    if cfg is None:
        print(err, file=sys.stderr)
        return 2
    print(f"ok: {cfg.name}: {cfg.formula}")
    return 0


def _batch_one(item):
    path, args = item
    return path, execute(path, args)


def cmd_batch(args) -> int:
    d = Path(args.dir)
    if not d.is_dir():
        print(f"error: not a directory: {d}", file=sys.stderr)
        return 2
    paths = sorted(str(p) for p in d.glob("*.cfg"))
    if not paths:
        print(f"error: no .cfg files in {d}", file=sys.stderr)
        return 2
    args._batch = True
    items = [(p, args) for p in paths]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_batch_one, items))
    else:
        results = [_batch_one(i) for i in items]
    print(DELIM)
    for p, code in results:
        print(f"{'PASS' if code == 0 else 'FAIL'}  {p}  (exit {code})")
    print(DELIM)
    return 0 if all(code == 0 for _, code in results) else 1


def _run_flags(p):
    p.add_argument("--no-retime", action="store_true", help="disable deadline re-timing")
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--eta", type=float, help="smooth-min sharpness")
    p.add_argument("--kappa", type=float, help="class-K slope")
    p.add_argument("--out", help="output directory (default $PLAN_LOG_DIR or ./plan_out)")
    p.add_argument("--no-plots", action="store_true", help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plan", description="STL task planning with barrier QPs")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="simulate a scenario and write logs, report and plots")
    p.add_argument("cfg", help="scenario file, or the name of a bundled scenario")
    _run_flags(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("report", help="re-verify a trajectory CSV and print its report")
    p.add_argument("csv")
    p.set_defaults(func=cmd_report)
    p = sub.add_parser("check", help="validate a scenario file")
    p.add_argument("cfg")
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("batch", help="run every .cfg in a directory")
    p.add_argument("dir")
    p.add_argument("--jobs", type=int, default=1)
    _run_flags(p)
    p.set_defaults(func=cmd_batch)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
