"""``emtts`` command line: run, spectrum, compare."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, EmtTsError, NumericalError
from .scenario import Scenario, analyze_spectrum, compare_trajectories, run_scenario, write_summary

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emtts", description="EMT / phasor co-simulation with Schwarz coupling")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_ in (("run", "simulate a scenario"), ("spectrum", "error-operator eigenvalues")):
        s = sub.add_parser(verb, help=help_)
        s.add_argument("config", type=Path)
        s.add_argument("-o", "--outdir", type=Path)
        s.add_argument("--dt", type=float)
        s.add_argument("--dT", dest="dT", type=float)
        s.add_argument("--overlap", type=int, nargs="+")
    c = sub.add_parser("compare", help="deviation between two trajectory CSV files")
    c.add_argument("a", type=Path)
    c.add_argument("b", type=Path)
    c.add_argument("--columns", nargs="+")
    c.add_argument("--json", type=Path, help="also write the report here")
    return p


def _load(args) -> Scenario:
    ov = args.overlap
    if ov is not None and len(ov) == 1:
        ov = ov[0]
    return Scenario.load(args.config).override(dt=args.dt, dT=args.dT, overlap=ov, outdir=args.outdir)


def _print_spectrum(summary: dict) -> None:
    for r in summary["rows"]:
        dom = " ".join(f"{re:+.6g}{im:+.6g}i" for re, im in r["dominant"]) or "0"
        k = "" if r["harmonic"] is None else f" k={r['harmonic']}"
        print(f"{r['model']}{k} overlap={r['overlap']} {r['mode']} step={r['step']:g}: "
              f"lambda_max = {dom} |lambda|={r['modulus']:.6g} {r['verdict']}")


def _origin(exc: BaseException) -> str:
    """Package module whose code raised ``exc``."""
    pkg = Path(__file__).parent
    origin = "emtts"
    tb = exc.__traceback__
    while tb is not None:
        f = Path(tb.tb_frame.f_code.co_filename)
        if f.parent == pkg and f.stem not in ("cli", "errors"):
            origin = f.stem
        tb = tb.tb_next
    return origin


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "run":
            summary = run_scenario(_load(args))
            print(f"{summary['scenario']}: wrote {', '.join(str(p) for p in summary['outputs'].values())}")
        elif args.verb == "spectrum":
            sc = _load(args)
            summary = analyze_spectrum(sc)
            _print_spectrum(summary)
            path = sc.outdir / f"{sc.stem}_spectrum.json"
            write_summary(path, summary)
        else:
            rep = compare_trajectories(args.a, args.b, args.columns)
            for name, d in rep["columns"].items():
                print(f"{name:>8s}  max={d['max']:.6g}  rms={d['rms']:.6g}")
            if args.json:
                write_summary(args.json, rep)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"error[numerical:{_origin(exc)}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EmtTsError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
