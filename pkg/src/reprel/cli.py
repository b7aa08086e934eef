"""Command line entry point: ``reprel {abstract,plan,train,transfer,verify}``.

Exit codes: 0 success, 1 unreadable or invalid input, 2 unknown sub-task,
3 a verification check failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .abstraction import FIXPOINT, UnknownSubtaskError, relevant_closure
from .dfoci import DfociSyntaxError, DfociValidationError
from .dfoci import load as load_dfoci
from .experiments import ManifestError, ExperimentManifest, run_train, run_verify
from .planner import OperatorSyntaxError, PlanningError, format_plan, load_operators, plan_for_state
from .taxi import InstanceError, TaxiEnv, load_instance

EXIT_OK, EXIT_INPUT, EXIT_SUBTASK, EXIT_CHECK = 0, 1, 2, 3

log = logging.getLogger("reprel")


def _depth(text: str):
    if text == FIXPOINT:
        return FIXPOINT
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("depth must be >= 0")
    return value


def _seeds(text: str) -> tuple:
    return tuple(int(s) for s in text.replace(",", " ").split())


def cmd_abstract(args) -> int:
    decl = load_dfoci(args.dfoci)
    try:
        schema = relevant_closure(decl, args.subtask, args.depth)
    except UnknownSubtaskError:
        print(f"error: unknown subtask {args.subtask!r} (declared: {', '.join(sorted(decl.subtasks))})", file=sys.stderr)
        return EXIT_SUBTASK
    sys.stdout.write("".join(f"{t}\n" for t in sorted(str(t) for t in schema.relevant_templates)))
    return EXIT_OK


def cmd_plan(args) -> int:
    operators = load_operators(args.operators)
    env = TaxiEnv(load_instance(args.instance))
    state = env.reset(args.seed)
    sys.stdout.write(format_plan(plan_for_state(env, state, operators)))
    return EXIT_OK


def cmd_train(args) -> int:
    manifest = ExperimentManifest.from_file(args.manifest)
    if args.command == "transfer" and manifest.load is None and args.load is None:
        print("error: transfer needs a 'load' entry in the manifest or --load", file=sys.stderr)
        return EXIT_INPUT
    if args.load is not None:
        manifest.load = Path(args.load).resolve()
        manifest.check_files()
    results = run_train(manifest, args.out, args.seeds)
    for name, (runs, _) in results.items():
        steps = " ".join(f"{r.seed}:{r.steps_to_optimal}" for r in runs)
        log.info("%s %s steps_to_optimal %s", manifest.task, name, steps)
    return EXIT_OK


def cmd_verify(args) -> int:
    manifest = ExperimentManifest.from_file(args.manifest)
    ok, report = run_verify(manifest, args.tol)
    sys.stdout.write(report)
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reprel", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("abstract", help="print the relevant literal templates of a sub-task")
    a.add_argument("dfoci")
    a.add_argument("subtask")
    a.add_argument("--depth", type=_depth, default=FIXPOINT)
    a.set_defaults(func=cmd_abstract)

    pl = sub.add_parser("plan", help="print the sub-task plan for an instance")
    pl.add_argument("operators")
    pl.add_argument("instance")
    pl.add_argument("--seed", type=int, default=0)
    pl.set_defaults(func=cmd_plan)

    for name, helptext in (("train", "train variants and write learning curves"),
                           ("transfer", "train from saved task tables (+T curves)")):
        t = sub.add_parser(name, help=helptext)
        t.add_argument("manifest")
        t.add_argument("--out", type=Path)
        t.add_argument("--seeds", type=_seeds)
        t.add_argument("--seed", type=int, dest="seeds_single")
        t.add_argument("--load", type=Path)
        t.set_defaults(func=cmd_train)

    v = sub.add_parser("verify", help="exhaustive factorization and value-equivalence checks")
    v.add_argument("manifest")
    v.add_argument("--tol", type=float)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "seeds_single", None) is not None:
        args.seeds = (args.seeds_single,)
    try:
        return args.func(args)
    except (DfociSyntaxError, DfociValidationError, OperatorSyntaxError, InstanceError,
            ManifestError, PlanningError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
