#!/usr/bin/env python3
import argparse
import json
import logging
import sys
from typing import List, Optional, Tuple

from pydantic import ValidationError

from .config import config
from .documents import load_targets, load_tree_spec, load_weight_spec
from .dynamics import decay_report, decide_adjoint, decide_backward, decide_forward, default_grid, default_probes
from .exceptions import InputError, TreeShiftError
from .matrix_oracle import estimate_norm_p2, lower_bound_norm_p, truncate_operator
from .operators import OperatorKind, backward_bound, check_unitary_equivalence, shift_norm
from .reports import decay_csv, emit, equivalence_csv, norm_row, norms_csv, shadow_csv, to_json, verdict_csv
from .shadowing import build_shadow_vector, plan_schedule, verify_shadow
from .space_core import WeightMap, random_tree_function
from .tree_core import TreeModel, Window, validate_tree

logger = logging.getLogger(__name__)


def _load(args) -> Tuple[TreeModel, WeightMap]:
    model = load_tree_spec(args.tree).build()
    weights = load_weight_spec(args.weights).build(model) if args.weights else WeightMap.unit()
    return model, weights


def _exponents(args) -> Tuple[Optional[float], Optional[float]]:
    """(p, q) from whichever flag was given; q defaults to 2."""
    if args.p is not None:
        if args.p < 1:
            raise InputError(f"--p must be >= 1, got {args.p}")
        return args.p, (args.p / (args.p - 1) if args.p > 1 else None)
    q = 2.0 if args.q is None else args.q
    if q < 1:
        raise InputError(f"--q must be >= 1, got {q}")
    return (q / (q - 1) if q > 1 else None), q


def _working_q(args) -> float:
    p, q = _exponents(args)
    if q is None:
        raise InputError("this command needs the exponent of the space B acts on; pass --q")
    return q


def _probes(args, model: TreeModel) -> List:
    if not args.probes:
        return default_probes(model)
    return [model.resolve(label.strip()) for label in args.probes.split(",") if label.strip()]


def _oracle(kind: OperatorKind, weights: WeightMap, model: TreeModel, p: float, depth: int, seed: int) -> float:
    window = Window(min(model.window.up, depth), min(model.window.down, depth))
    op = truncate_operator(kind, weights, model, window, p=p)
    if p == 2:
        return estimate_norm_p2(op)
    return lower_bound_norm_p(op, trials=64, seed=seed)


def cmd_validate(args) -> int:
    report = validate_tree(load_tree_spec(args.tree).build())
    emit(to_json(report), args.out)
    return 0 if report.valid else 1


def cmd_norms(args) -> int:
    model, weights = _load(args)
    p, q = _exponents(args)
    rows = []
    if p is not None:
        estimate = shift_norm(weights, p, model)
        oracle = _oracle(OperatorKind.FORWARD_SHIFT, weights, model, p, args.oracle_depth, args.seed)
        rows.append(norm_row(f"shift_norm(p={p:g})", estimate.value, estimate.tag, oracle))
    if q is not None:
        bound = backward_bound(weights, q, model)
        rows.append(norm_row(f"backward_bound_M(q={q:g})", bound.value, bound.tag))
        oracle = _oracle(OperatorKind.BACKWARD_SHIFT, weights, model, q, args.oracle_depth, args.seed)
        rows.append(norm_row(f"backward_norm_bound(q={q:g})", bound.value ** (1.0 / q), "upper-bound", oracle))
    if args.format == "json":
        emit(to_json(rows), args.out)
    else:
        emit(norms_csv(rows), args.out)
    return 0


def cmd_decide(args) -> int:
    model, weights = _load(args)
    if args.operator == "forward":
        verdict = decide_forward(model)
    else:
        q = _working_q(args)
        decide = decide_backward if args.operator == "backward" else decide_adjoint
        probes = _probes(args, model) if args.probes else None
        verdict = decide(model, weights, q, probes, args.nmax)
    logger.info(f"[decide] {verdict.operator}: {verdict.status} ({verdict.reason}), witness {verdict.witness}")
    emit(verdict_csv(verdict) if args.format == "csv" else to_json(verdict), args.out)
    return 0


def cmd_decay(args) -> int:
    model, weights = _load(args)
    report = decay_report(args.quantity, _probes(args, model), default_grid(args.nmax), weights, _working_q(args), model)
    emit(to_json(report) if args.format == "json" else decay_csv(report), args.out)
    return 0


def cmd_shadow(args) -> int:
    model, weights = _load(args)
    q = _working_q(args)
    if args.targets:
        targets = load_targets(args.targets, model)
    else:
        targets = [random_tree_function(model, 3, 3, args.seed + k) for k in range(args.m)]
    plan = plan_schedule(targets, weights, q, args.eps, model, args.nmax)
    f = build_shadow_vector(plan)
    table = verify_shadow(f, plan)
    if args.format == "csv":
        emit(shadow_csv(table), args.out)
    else:
        emit(to_json({"plan": plan.to_dict(), "errors": table}), args.out)
    return 0


def cmd_equiv(args) -> int:
    model, weights = _load(args)
    q = _working_q(args)
    residuals = [
        check_unitary_equivalence(random_tree_function(model, 3, 5, args.seed + i), weights, q, model)
        for i in range(args.samples)
    ]
    if args.format == "json":
        emit(to_json({"samples": args.samples, "max_residual": max(residuals, default=0.0), "residuals": residuals}), args.out)
    else:
        emit(equivalence_csv(residuals), args.out)
    return 0


COMMANDS = {
    "validate": (cmd_validate, "json"),
    "norms": (cmd_norms, "csv"),
    "decide": (cmd_decide, "json"),
    "decay": (cmd_decay, "csv"),
    "shadow": (cmd_shadow, "json"),
    "equiv": (cmd_equiv, "csv"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="TreeShift: shift operators on weighted directed trees")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tree", required=True, help="Tree document (JSON)")
    common.add_argument("--weights", help="Weight document (JSON); unit weights when omitted")
    exponent = common.add_mutually_exclusive_group()
    exponent.add_argument("--p", type=float, help="Exponent of the space S acts on")
    exponent.add_argument("--q", type=float, help="Exponent of the space B and S* act on")
    common.add_argument("--probes", help="Comma-separated probe vertices")
    common.add_argument("--nmax", type=int, default=config.N_MAX, help="Largest n on the decay grid")
    common.add_argument("--seed", type=int, default=config.SEED, help="Seed for random functions")
    common.add_argument("--out", help="Output file; stdout when omitted")
    common.add_argument("--format", choices=["csv", "json"], help="Output format")
    common.add_argument("--log-level", default=config.LOG_LEVEL, help="Logging level (stderr)")

    # Define commands
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    subparsers.add_parser("validate", parents=[common], help="Check the directed-tree axioms")

    norms_parser = subparsers.add_parser("norms", parents=[common], help="Closed-form norms against the matrix oracle")
    norms_parser.add_argument("--oracle-depth", type=int, default=6, help="Window depth of the truncated matrices")

    decide_parser = subparsers.add_parser("decide", parents=[common], help="Decide hypercyclicity")
    decide_parser.add_argument("--operator", choices=["forward", "backward", "adjoint"], default="backward")

    decay_parser = subparsers.add_parser("decay", parents=[common], help="Decay report of Ω, Θ or the necessary sums")
    decay_parser.add_argument(
        "--quantity", choices=["omega", "theta", "omega_star", "necessary_sum"], default="omega"
    )

    shadow_parser = subparsers.add_parser("shadow", parents=[common], help="Build an orbit-shadowing vector")
    shadow_parser.add_argument("--eps", type=float, default=1e-3, help="Target accuracy")
    shadow_parser.add_argument("--targets", help="Targets document (JSON)")
    shadow_parser.add_argument("--m", type=int, default=4, help="Number of random targets without --targets")

    equiv_parser = subparsers.add_parser("equiv", parents=[common], help="Check S*Φ = ΦB on random functions")
    equiv_parser.add_argument("--samples", type=int, default=100)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command-line interface for TreeShift.

    Returns:
        Exit status: 0 ok, 1 domain failure, 2 input failure, 3 window exhausted
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, str(getattr(args, "log_level", config.LOG_LEVEL)).upper(), logging.WARNING),
        format=config.LOG_FORMAT,
        datefmt=config.LOG_DATEFMT,
        stream=sys.stderr,
    )

    if args.command not in COMMANDS:
        # Print help if no command is provided
        parser.print_help()
        return 0

    handler, default_format = COMMANDS[args.command]
    args.format = args.format or default_format
    try:
        return handler(args)
    except TreeShiftError as e:
        logger.error(f"[{args.command}] {e.message}")
        print(json.dumps(e.to_dict(), ensure_ascii=False, indent=2), file=sys.stderr)
        return e.exit_code
    except (ValidationError, json.JSONDecodeError, OSError) as e:
        logger.error(f"[{args.command}] invalid input: {e}")
        print(json.dumps({"error": type(e).__name__, "message": str(e)}, ensure_ascii=False, indent=2), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
