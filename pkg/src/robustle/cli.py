"""Command-line front end.

    robustle run --config FILE [--horizon N] [--floor {1,2}] [--out DIR]
    robustle verify --config FILE [--tolerance P/Q] [--jobs K] [--out DIR]
    robustle sweep --config FILE [--jobs K] [--out DIR]
    robustle reproduce ID [ID ...] [--jobs K]

Exit codes: 0 all requested checks pass, 1 a check failed, 2 bad input,
3 deviation family over budget, 4 a strategy chose an invalid action.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import export
from .config import ConfigError, load
from .core import StrategyError
from .failures import InvalidSchedule
from .reproduce import CHECKS, reproduce
from .verify import FamilyTooLarge, Scenario, convergence_round, f_robust_test, le_test, robust_le_test

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BUDGET, EXIT_STRATEGY = 0, 1, 2, 3, 4


def _fraction(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected P/Q, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("tolerance must be >= 0")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robustle", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, type=Path, help="scenario config file")
        sp.add_argument("--horizon", type=_positive, help="override the configured horizon")
        sp.add_argument("--floor", type=int, choices=(1, 2), help="override the MaxBid decrement floor")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--tolerance", type=_fraction, help="tolerance for inexact comparisons, P/Q")
        sp.add_argument("--jobs", type=_positive, default=1, help="worker processes")

    common(sub.add_parser("run", help="simulate a scenario and export its trace"))
    common(sub.add_parser("verify", help="run the configured equilibrium check"))
    common(sub.add_parser("sweep", help="simulate every state of the config"))
    rp = sub.add_parser("reproduce", help="re-run a pinned example or sweep check")
    rp.add_argument("ids", nargs="+", choices=[*CHECKS, "all"], metavar="ID",
                    help="one of: " + ", ".join(CHECKS) + ", all")
    rp.add_argument("--jobs", type=_positive, default=1, help="worker processes")
    return p


def _load(args):
    cfg = load(args.config)
    return cfg.with_overrides(horizon=args.horizon, floor=args.floor, tolerance=args.tolerance,
                              out=str(args.out) if args.out else None)


def _outdir(cfg):
    if not cfg.out:
        return None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = _load(args)
    scenarios = cfg.scenarios()
    out = _outdir(cfg)
    docs = []
    for sc in scenarios:
        trace = sc.run()
        extra = {}
        if sc.game.kind == "auction":
            extra["convergence"] = _conv_dict(convergence_round(trace))
        docs.append(export.summary_dict(trace, **extra))
        if out:
            name = "trace.csv" if len(scenarios) == 1 else f"trace_{_slug(sc.game.label)}.csv"
            with open(out / name, "w", newline="", encoding="utf-8") as fh:
                export.write_trace_csv(trace, fh)
    doc = docs[0] if len(docs) == 1 else {"scenarios": docs}
    text = export.dumps(doc)
    if out:
        (out / "summary.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in label).strip("_")


def _conv_dict(c) -> dict:
    name = type(c).__name__
    fields = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in vars(c).items()}
    return {"kind": name, **fields}


def cmd_verify(args) -> int:
    cfg = _load(args)
    if not cfg.check:
        raise ConfigError("verify needs a 'check' key (le, robust or f-robust)", 0, 0, str(args.config))
    states = cfg.state_list()
    n = 2 if cfg.game == "matrix" else states[0].n
    profile = cfg.profile_for(n)
    common = dict(horizon=cfg.horizon, budget=cfg.budget, jobs=args.jobs)
    if cfg.check == "le":
        verdict = le_test(profile, states, cfg.family, cfg.tolerance, schedule=cfg.schedule(), **common)
    elif cfg.check == "robust":
        verdict = robust_le_test(profile, states, _prefixes(cfg), cfg.family, cfg.tolerance, **common)
    else:
        verdict = f_robust_test(profile, states, cfg.schedules, _prefixes(cfg), cfg.family, cfg.tolerance, **common)
    text = export.dumps(verdict.to_dict())
    out = _outdir(cfg)
    if out:
        (out / "verdict.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    for w in verdict.failures[:10]:
        print(f"violation: state {w.state} {w.context} player {w.player + 1} -> {w.deviation}: "
              f"{w.baseline} -> {w.deviated} (gain {w.gain})", file=sys.stderr)
    return EXIT_OK if verdict.passed else EXIT_FAIL


def _prefixes(cfg):
    if not cfg.prefixes:
        raise ConfigError("robust checks need at least one 'prefix' entry")
    return cfg.prefix_family()


def _sweep_row(sc: Scenario):
    trace = sc.run()
    lr = sc.longrun()
    c = export.classification_dict(trace.classification)
    conv = convergence_round(trace) if sc.game.kind == "auction" else None
    conv_text = ""
    if conv is not None:
        conv_text = {"ConvergedAt": lambda: f"converged@{conv.round}",
                     "DensityReport": lambda: f"density={conv.density}",
                     "NotConverged": lambda: "not-converged"}[type(conv).__name__]()
    start = c.get("since_round", c.get("entry_round", ""))
    return [sc.game.label, c["kind"], start, conv_text,
            ";".join(str(x.value) for x in lr), ";".join("1" if x.exact else "0" for x in lr)]


def cmd_sweep(args) -> int:
    cfg = _load(args)
    scenarios = cfg.scenarios()
    if args.jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            rows = list(ex.map(_sweep_row, scenarios))
    else:
        rows = [_sweep_row(sc) for sc in scenarios]
    header = ["state", "classification", "since_round", "convergence", "longrun", "exact"]
    out = _outdir(cfg)
    fh = open(out / "sweep.csv", "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if out:
            fh.close()
    return EXIT_OK


def cmd_reproduce(args) -> int:
    ids = list(CHECKS) if "all" in args.ids else args.ids
    ok = True
    for example_id in ids:
        r = reproduce(example_id, jobs=args.jobs)
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {example_id} ({r.seconds:.2f}s)")
        for line in r.lines:
            print(f"    {line}")
            if line.startswith("FAIL"):
                print(f"{example_id}: {line[5:]}", file=sys.stderr)
        ok &= r.passed
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except BrokenPipeError:
        return EXIT_OK
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (InvalidSchedule, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except FamilyTooLarge as e:
        print(f"refused: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except StrategyError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STRATEGY


if __name__ == "__main__":
    sys.exit(main())
