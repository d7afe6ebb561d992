"""Command-line surface.

Exit codes: 0 success, 1 input/validation error, 2 internal or numerical
error.  All numeric output uses 6 decimal places; CSV output is
comma-separated with a header row.  Commands are deterministic given
identical inputs and seeds.
"""

from __future__ import annotations

import argparse
import re
import sys
import time

from . import engine, oracle, synthesis
from .casestudies import CaseStudyError, MedaParams, RobotParams, gen_meda, gen_robot
from .engine import EngineError, UnknownProposition
from .model import Mdp, ModelError, cardinality, parse_model, reach
from .requirement import (
    CaptlRequirement,
    RequirementError,
    contexts_of,
    parse_query,
    parse_requirement,
    validate_persistence,
)
from .synthesis import SynthesisError


class _InputError(Exception):
    """User-facing problems: bad files, bad flags, failed validation."""


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _InputError(str(exc)) from exc


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise _InputError(str(exc)) from exc


def _load_model(path: str) -> Mdp:
    return parse_model(_read(path))


def _load_requirement(path: str) -> CaptlRequirement:
    return parse_requirement(_read(path))


def _parse_size(text: str):
    m = re.fullmatch(r"(\d+)x(\d+)", text)
    if not m:
        raise _InputError("--size must look like 3x3, got %r" % text)
    return int(m.group(1)), int(m.group(2))


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    mdp = _load_model(args.model)
    req = _load_requirement(args.req)
    if args.algorithm == "persistence":
        violations = validate_persistence(req)
        if violations:
            for v in violations:
                print(v, file=sys.stderr)
            return 1
        protocol, _product = synthesis.synth_persistence(
            mdp, req, args.epsilon, args.max_iter
        )
    else:
        protocol = synthesis.synth_pctl(mdp, req, args.epsilon, args.max_iter)
    if args.out:
        _write(args.out, protocol.to_json() + "\n")
    print("c=%.6f" % protocol.satisfaction_prob)
    return 0


def cmd_verify(args) -> int:
    mdp = _load_model(args.model)
    try:
        query = parse_query(args.query)
    except RequirementError as exc:
        raise _InputError("bad query: %s" % exc) from exc
    target = engine.eval_state_formula(mdp, query.formula)
    if query.kind == "FG":
        if query.direction != "max":
            raise _InputError("Pmin persistence queries are not supported")
        x = engine.persistence_values(mdp, target, args.epsilon, max_iter=args.max_iter)
    elif query.direction == "max":
        x = engine.max_reach_values(mdp, target, args.epsilon, max_iter=args.max_iter)
    else:
        x = engine.min_reach_values(mdp, target, args.epsilon, max_iter=args.max_iter)
    value = x[mdp.initial]
    print("%.6f" % value)
    if query.interval is not None:
        print("SAT" if query.interval.contains(value) else "UNSAT")
    return 0


def cmd_partition(args) -> int:
    mdp = _load_model(args.model)
    req = _load_requirement(args.req)
    violations = validate_persistence(req)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return 1
    partition = synthesis.partition_states(mdp, req, args.epsilon, args.max_iter)
    lines = ["state,objective,block,x_value"]
    for q in partition.explored:
        block_of = {}
        for q2, members in partition.blocks[q].items():
            for s in members:
                block_of[s] = q2
        x = partition.vectors[q]
        for s in partition.reachable:
            lines.append("%d,%s,%s,%.6f" % (s, q, block_of[s], x[s]))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_export_dot(args) -> int:
    mdp = _load_model(args.model)
    req = _load_requirement(args.req)
    if args.algorithm == "persistence":
        violations = validate_persistence(req)
        if violations:
            for v in violations:
                print(v, file=sys.stderr)
            return 1
        _protocol, product = synthesis.synth_persistence(
            mdp, req, args.epsilon, args.max_iter
        )
        text = synthesis.product_to_dot(product, mdp)
    else:
        protocol = synthesis.synth_pctl(mdp, req, args.epsilon, args.max_iter)
        chain = synthesis.compose_protocol(mdp, req, protocol)
        text = synthesis.chain_to_dot(chain, mdp)
    _write(args.dot, text)
    return 0


def cmd_simulate(args) -> int:
    mdp = _load_model(args.model)
    req = _load_requirement(args.req)
    violations = validate_persistence(req)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return 1
    _protocol, product = synthesis.synth_persistence(mdp, req, args.epsilon, args.max_iter)
    accepting = synthesis.product_accepting(mdp, req, product)
    result = oracle.simulate(
        product.chain, accepting, runs=args.runs, horizon=args.horizon, seed=args.seed
    )
    print("mean=%.6f halfwidth=%.6f" % (result.estimate, result.half_width))
    return 0


def cmd_stats(args) -> int:
    started = time.perf_counter()
    mdp = _load_model(args.model)
    model_time = time.perf_counter() - started
    req = _load_requirement(args.req)
    violations = validate_persistence(req)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return 1
    _protocol, _product, stats = synthesis.run_persistence(
        mdp, req, args.epsilon, args.max_iter
    )
    stats.model_time = model_time
    header = (
        "m_states,m_transitions,m_choices,p_states,p_transitions,p_choices,"
        "t_model,t_synth,t_product,t_verify"
    )
    row = "%d,%d,%d,%d,%d,%d,%.6f,%.6f,%.6f,%.6f" % (
        stats.model_states,
        stats.model_transitions,
        stats.model_choices,
        stats.product_states,
        stats.product_transitions,
        stats.product_choices,
        stats.model_time,
        stats.synthesis_time,
        stats.product_time,
        stats.verify_time,
    )
    text = header + "\n" + row + "\n"
    if args.stats:
        _write(args.stats, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gen(args) -> int:
    width, height = _parse_size(args.size)
    try:
        if args.case == "robot":
            model_text, req_text = gen_robot(RobotParams(width=width, height=height))
        else:
            model_text, req_text = gen_meda(MedaParams(width=width, height=height))
    except CaseStudyError as exc:
        raise _InputError(str(exc)) from exc
    prefix = args.out or ("%s_%dx%d" % (args.case, width, height))
    model_path = prefix + ".json"
    req_path = prefix + ".captl"
    _write(model_path, model_text)
    _write(req_path, req_text)
    print("model=%s" % model_path)
    print("req=%s" % req_path)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub, model=True, req=True):
    if model:
        sub.add_argument("--model", required=True, help="model JSON document")
    if req:
        sub.add_argument("--req", required=True, help="requirement document")
    sub.add_argument("--epsilon", type=float, default=1e-6, help="convergence tolerance")
    sub.add_argument("--max-iter", type=int, default=1000000, help="value iteration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="captl",
        description="Synthesize and analyze switching protocols for MDP requirements",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="synthesize a protocol and print c")
    _add_common(p)
    p.add_argument("--algorithm", choices=("pctl", "persistence"), default="persistence")
    p.add_argument("--out", help="write the protocol JSON here")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("verify", help="evaluate a single query at the initial state")
    _add_common(p, req=False)
    p.add_argument("--query", required=True, help="e.g. 'Pmax [ F \"goal\" ]'")
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("partition", help="write per-objective block membership CSV")
    _add_common(p)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_partition)

    p = subs.add_parser("export-dot", help="write the synthesized product (or induced chain) as DOT")
    _add_common(p)
    p.add_argument("--algorithm", choices=("pctl", "persistence"), default="persistence")
    p.add_argument("--dot", required=True, help="DOT output path")
    p.set_defaults(func=cmd_export_dot)

    p = subs.add_parser("simulate", help="Monte-Carlo check of the synthesized protocol")
    _add_common(p)
    p.add_argument("--runs", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("stats", help="emit sizes and phase timings as CSV")
    _add_common(p)
    p.add_argument("--stats", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_stats)

    p = subs.add_parser("gen", help="generate a case-study model and requirement")
    p.add_argument("--case", choices=("robot", "meda"), required=True)
    p.add_argument("--size", required=True, help="grid size, e.g. 3x3 or 8x5")
    p.add_argument("--out", help="output path prefix")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (_InputError, ModelError, RequirementError, UnknownProposition) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except (EngineError, SynthesisError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
