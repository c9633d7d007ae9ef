"""Command line entry point: ``holoqutrit <subcommand>``.

Exit codes: 0 success, 1 config error, 2 numerical-validation failure,
3 every trial leaked.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import io
from .algebra import InvalidLabelError, PauliLabel, all_labels, classify_label, subset_counts
from .analysis import (MEMBER_CSV_HEADER, closed_form_detection, decompose_on_pair, member_rows,
                       result_document, run_experiment, simulate_detection, subset_sums)
from .config import ConfigError, load_config
from .holonomy import NotHolonomicError, NumericalAccuracyError, PulseSchedule, integrate_schedule
from .noise import NoiseError
from .state import AllLeakedError, StateError, basis_state, logical_state

log = logging.getLogger("holoqutrit")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_LEAKED = 0, 1, 2, 3


def _emit(doc, out: str | None) -> None:
    text = io.dumps(doc)
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def cmd_enumerate(args) -> int:
    rows = [{"label": list(lab), "name": str(lab), "subset": classify_label(lab).value} for lab in all_labels()]
    _emit({"labels": rows, "counts": subset_counts(),
           "note": "S4 holds the 8 non-identity Z-only operators; the ninth Z^a2 (x) Z^b2 "
                   "combination (a2=b2=0) is the error-free identity, listed separately."}, args.out)
    return EXIT_OK


def _parse_state(text: str):
    if all(c in "012" for c in text):
        return basis_state(text)
    parts = [complex(p.replace(" ", "")) for p in text.split(",")]
    n = int(round(math.log2(len(parts))))
    return logical_state(n, parts)


def cmd_detect(args) -> int:
    try:
        state = _parse_state(args.state)
    except ValueError as exc:
        raise ConfigError(f"--state: {exc}") from None
    a, b = args.sites
    decomp = decompose_on_pair(state, a, b)
    doc = {"state": args.state, "sites": [a, b],
           "masses": dict(zip(("00", "01", "10", "11"), decomp.as_tuple()))}
    if args.label:
        lab = PauliLabel.parse(args.label)
        doc.update({"label": str(lab), "subset": classify_label(lab).value,
                    "detection_probability": closed_form_detection(decomp, lab)})
    else:
        doc["report"] = subset_sums(decomp).to_dict()
    _emit(doc, args.out)
    return EXIT_OK


def _load(args):
    cfg = load_config(args.config)
    exact = True if args.exact else (False if args.shots else None)
    return cfg.with_overrides(seed=args.seed, trials=args.trials, shots=args.shots, exact=exact,
                              out=args.out, dump_draws=args.dump_draws, workers=args.workers)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    report, draws = simulate_detection(cfg, trials=args.trials or cfg.trials or 10_000)
    if cfg.dump_draws:
        io.write_csv(cfg.dump_draws, ("trial", "gate_index", "label", "subset", "detected"), draws)
    _emit({"schema_version": 1, "config": cfg.raw, "detection": report.to_dict()}, cfg.out)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run_experiment(cfg)
    if cfg.csv:
        io.write_csv(cfg.csv, MEMBER_CSV_HEADER, member_rows(result))
    if cfg.dump_draws:
        io.write_csv(cfg.dump_draws, ("trial", "gate_index", "label"),
                     ((m.trial, m.gate_index, str(m.label) if m.label else "") for m in result.members))
    _emit(result_document(cfg, result), cfg.out)
    return EXIT_OK


def cmd_validate_gate(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        reports = cfg.pulse_reports
        if not reports:
            raise ConfigError("circuit: no pulse gates to validate")
        doc = {str(i): r.to_dict() for i, r in sorted(reports.items())}
        passed = all(r.passes() for r in reports.values())
    else:
        schedule = PulseSchedule(theta=args.theta, phi=args.phi, area=args.area, tau=args.tau,
                                 steps=args.steps, envelope=args.envelope)
        report = integrate_schedule(schedule)
        doc = {"schedule": schedule.to_dict(), "report": report.to_dict()}
        passed = report.passes()
    doc_out = {"passed": passed, **doc} if not args.config else {"passed": passed, "gates": doc}
    _emit(doc_out, args.out)
    return EXIT_OK if passed else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holoqutrit",
                                description="Rescaled average-value estimation for noisy holonomic qutrit circuits.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("enumerate-errors", help="list the 81 two-qutrit generalized Pauli labels")
    e.add_argument("--out")
    e.set_defaults(func=cmd_enumerate)

    d = sub.add_parser("detect-prob", help="closed-form detection probabilities for a logical state")
    d.add_argument("--state", required=True, help="basis string like 0101, or comma-separated logical amplitudes")
    d.add_argument("--sites", type=int, nargs=2, default=(0, 1), metavar=("A", "B"))
    d.add_argument("--label", help="error label a1,a2,b1,b2 (default: all 80)")
    d.add_argument("--out")
    d.set_defaults(func=cmd_detect)

    for name, func, helptext in (("simulate", cmd_simulate, "Monte Carlo detection rate"),
                                 ("run", cmd_run, "full estimation experiment")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--seed", type=int)
        s.add_argument("--trials", type=int)
        s.add_argument("--shots", type=int)
        s.add_argument("--exact", action="store_true")
        s.add_argument("--workers", type=int)
        s.add_argument("--out")
        s.add_argument("--dump-draws", nargs="?", const="draws.csv", default=None, metavar="CSV")
        s.set_defaults(func=func)

    g = sub.add_parser("validate-gate", help="integrate a Lambda pulse and check the holonomy conditions")
    g.add_argument("--config", help="validate every pulse gate in an experiment config")
    g.add_argument("--theta", type=float, default=math.pi / 2)
    g.add_argument("--phi", type=float, default=0.0)
    g.add_argument("--area", type=float, default=math.pi)
    g.add_argument("--tau", type=float, default=1.0)
    g.add_argument("--steps", type=int, default=2000)
    g.add_argument("--envelope", default="sin2", choices=("sin2", "square", "zero"))
    g.add_argument("--out")
    g.set_defaults(func=cmd_validate_gate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidLabelError, NoiseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StateError as exc:
        print(f"invalid state: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotHolonomicError, NumericalAccuracyError) as exc:
        print(f"numerical validation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AllLeakedError as exc:
        print(f"all trials leaked: {exc}", file=sys.stderr)
        return EXIT_LEAKED


if __name__ == "__main__":
    sys.exit(main())
