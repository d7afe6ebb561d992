"""Protocol synthesis for requirement graphs over explicit-state MDPs.

Two procedures produce a protocol (a partial map from (objective, state) to
an optimal action or a context switch) together with the satisfaction
probability c of the composed system:

* ``synth_pctl`` resolves every reachable (objective, state) pair through a
  per-state worklist: contexts of the active objective are tested in
  declaration order (re-testing after each switch until none fires), then the
  local optimal action is recorded and its successors enqueued.
* ``synth_persistence`` exploits the persistence fragment: one value vector
  per explored objective partitions the reachable states into stay/switch
  blocks, a single strategy per objective suffices, and the turn-based
  product of model, requirement and strategies is a DTMC whose accepting
  bottom components yield c directly.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from . import engine
from .engine import (
    Dtmc,
    StrategyMap,
    TargetSet,
    ValueVector,
    dtmc_persistence_prob,
    dtmc_reach_prob,
    eval_state_formula,
    extract_strategy,
    max_reach_values,
    min_reach_values,
    persistence_target,
    prob1_max,
    verify_context,
)
from .model import Mdp, StateSet, cardinality, post, reach
from .requirement import CaptlRequirement, Context, contexts_of, validate_persistence, validate_requirement

TAU = "tau"
TURN_SYSTEM = 1
TURN_REQUIREMENT = 2


class SynthesisError(Exception):
    pass


class CompositionError(SynthesisError):
    pass


@dataclass(frozen=True)
class Decision:
    kind: str  # "action" | "switch"
    action: Optional[str] = None
    context: Optional[str] = None
    target: Optional[str] = None

    @staticmethod
    def of_action(action: str) -> "Decision":
        return Decision(kind="action", action=action)

    @staticmethod
    def of_switch(context: str, target: str) -> "Decision":
        return Decision(kind="switch", context=context, target=target)


@dataclass
class Protocol:
    algorithm: str  # "pctl" | "persistence"
    satisfaction_prob: float
    entries: Dict[Tuple[str, int], Decision]
    objective_order: Tuple[str, ...]

    def decision(self, q: str, s: int) -> Optional[Decision]:
        return self.entries.get((q, s))

    def to_json(self) -> str:
        rank = {q: i for i, q in enumerate(self.objective_order)}
        ordered = sorted(self.entries.items(), key=lambda kv: (rank[kv[0][0]], kv[0][1]))
        records = []
        for (q, s), d in ordered:
            if d.kind == "action":
                dec = {"kind": "action", "action": d.action}
            else:
                dec = {"kind": "switch", "context": d.context, "target": d.target}
            records.append({"objective": q, "state": s, "decision": dec})
        return json.dumps(
            {"algorithm": self.algorithm, "c": self.satisfaction_prob, "entries": records},
            indent=1,
        )


@dataclass
class Partition:
    """Per explored objective: its value vector and the reachable-state blocks.

    ``blocks[q][q']`` holds the states that switch from q to q' (and
    ``blocks[q][q]`` the states that keep pursuing q); for each explored q the
    blocks are pairwise disjoint and cover the reachable states.
    ``by_context`` maps a context id to the states it claims.
    """

    reachable: StateSet
    explored: Tuple[str, ...]
    vectors: Dict[str, ValueVector]
    blocks: Dict[str, Dict[str, StateSet]]
    by_context: Dict[str, StateSet]


@dataclass(frozen=True)
class ProductDtmc:
    """Turn-based composition of model, requirement and strategy profile.

    States are (model state, objective id, turn) triples; turn 1 states emit
    the strategy's action, turn 2 states emit exactly one of the stutter tag
    ``tau`` (keep pursuing) or a context id (switch).  The composition is a
    DTMC: construction verifies that exactly one rule applies per state.
    """

    chain: Dtmc
    tag_counts: Tuple[int, ...]

    @property
    def states(self) -> Tuple[Tuple[int, str, int], ...]:
        return self.chain.info  # type: ignore[return-value]

    @property
    def num_states(self) -> int:
        return self.chain.num_states


@dataclass
class RunStats:
    """Phase wall times and model/product sizes of one synthesis run."""

    model_states: int
    model_transitions: int
    model_choices: int
    product_states: int
    product_transitions: int
    product_choices: int
    objective_times: Dict[str, float]
    product_time: float
    verify_time: float
    model_time: float = 0.0

    @property
    def synthesis_time(self) -> float:
        return sum(self.objective_times.values())


# ---------------------------------------------------------------------------
# objective solving shared by both procedures


@dataclass
class _Solution:
    values: ValueVector
    context_values: ValueVector
    strategy: StrategyMap
    target: TargetSet
    exact_one: Set[int]


def _solve_objective(mdp: Mdp, req: CaptlRequirement, q: str, epsilon: float, max_iter: int) -> _Solution:
    obj = req.objective(q)
    base = eval_state_formula(mdp, obj.formula)
    if obj.kind == "FG":
        if obj.direction != "max":
            raise SynthesisError(
                "objective %s: Pmin persistence objectives are not supported" % q
            )
        target = persistence_target(mdp, base)
        x = max_reach_values(mdp, target, epsilon, objective_id=q, max_iter=max_iter)
        strategy = extract_strategy(mdp, x, target)
        ctx_x = x
    else:
        target = base
        if obj.direction == "max":
            x = max_reach_values(mdp, target, epsilon, objective_id=q, max_iter=max_iter)
            strategy = extract_strategy(mdp, x, target)
            ctx_x = x
        else:
            x = min_reach_values(mdp, target, epsilon, objective_id=q, max_iter=max_iter)
            strategy = extract_strategy(mdp, x, target, direction="min")
            # context bounds are always suprema, so a minimizing objective
            # needs the maximal vector for its context checks
            if contexts_of(req, q):
                ctx_x = max_reach_values(
                    mdp, target, epsilon, objective_id=q + "#ctx", max_iter=max_iter
                )
            else:
                ctx_x = x
    exact_one = set(prob1_max(mdp, target)) if obj.direction == "max" else set()
    exact_one &= set(x.domain)
    return _Solution(values=x, context_values=ctx_x, strategy=strategy, target=target, exact_one=exact_one)


# ---------------------------------------------------------------------------
# per-state procedure


def synth_pctl(
    mdp: Mdp,
    req: CaptlRequirement,
    epsilon: float = engine.DEFAULT_EPSILON,
    max_iter: int = engine.DEFAULT_MAX_ITER,
) -> Protocol:
    """Worklist synthesis: per reachable state, switch while a context of the
    active objective fires, then record the locally optimal action."""
    validate_requirement(req)
    ids = req.objective_ids()
    solutions: Dict[str, _Solution] = {}

    def solved(q: str) -> _Solution:
        if q not in solutions:
            solutions[q] = _solve_objective(mdp, req, q, epsilon, max_iter)
        return solutions[q]

    worklists: Dict[str, Set[int]] = {q: set() for q in ids}
    explored: Dict[str, Set[int]] = {q: set() for q in ids}
    entries: Dict[Tuple[str, int], Decision] = {}
    accept_values: Dict[Tuple[str, int], float] = {}

    worklists[req.initial].add(mdp.initial)
    current = req.initial
    while True:
        if not worklists[current]:
            current = next((q for q in ids if worklists[q]), None)
            if current is None:
                break
        s = min(worklists[current])
        worklists[current].discard(s)
        if s in explored[current]:
            continue
        q: Optional[str] = current
        while q is not None:
            explored[q].add(s)
            fired: Optional[Context] = None
            for w in contexts_of(req, q):
                if verify_context(mdp, s, solved(q).context_values, w.interval):
                    fired = w
                    break
            if fired is None:
                break
            entries[(q, s)] = Decision.of_switch(fired.id, fired.target)
            q = fired.target
            if s in explored[q]:
                q = None  # already resolved from here on
        if q is None:
            continue
        sol = solved(q)
        accept_values[(q, s)] = sol.values[s]
        if not mdp.is_deadlock(s):
            action = sol.strategy[s]
            entries[(q, s)] = Decision.of_action(action)
            for t in post(mdp, s, action):
                if t not in explored[q]:
                    worklists[q].add(t)

    protocol = Protocol(
        algorithm="pctl", satisfaction_prob=0.0, entries=entries, objective_order=ids
    )
    chain = compose_protocol(mdp, req, protocol)
    accept = []
    for idx, info in enumerate(chain.info):
        q, s = info
        if s in solved(q).exact_one:
            accept.append(idx)
        elif accept_values.get((q, s), 0.0) >= 1.0 - 10.0 * epsilon:
            accept.append(idx)
    protocol.satisfaction_prob = dtmc_reach_prob(chain, accept)
    return protocol


def compose_protocol(mdp: Mdp, req: CaptlRequirement, protocol: Protocol) -> Dtmc:
    """Induced chain over (objective, state) pairs reachable from the start.

    An action entry keeps the objective and follows the action's distribution;
    a switch entry moves to the target objective with probability 1.  A pair
    without an entry is legal only at deadlock states (absorbing).
    """
    edge_set = set(req.edges())
    start = (req.initial, mdp.initial)
    index: Dict[Tuple[str, int], int] = {start: 0}
    order: List[Tuple[str, int]] = [start]
    rows: List[Tuple[Tuple[int, ...], Tuple[float, ...]]] = []
    tags: List[Optional[str]] = []

    def intern(key: Tuple[str, int]) -> int:
        if key not in index:
            index[key] = len(order)
            order.append(key)
        return index[key]

    pos = 0
    while pos < len(order):
        q, s = order[pos]
        pos += 1
        d = protocol.decision(q, s)
        if d is None:
            if not mdp.is_deadlock(s):
                raise CompositionError(
                    "protocol undefined at reachable non-absorbing state (%s, %d)" % (q, s)
                )
            rows.append(((), ()))
            tags.append(None)
        elif d.kind == "action":
            ch = mdp.choice(s, d.action)
            if ch is None:
                raise CompositionError(
                    "protocol action %r not enabled at state %d" % (d.action, s)
                )
            rows.append((tuple(intern((q, t)) for t in ch.dests), ch.probs))
            tags.append(d.action)
        else:
            if (q, d.context, d.target) not in edge_set:
                raise CompositionError(
                    "protocol switch %r at (%s, %d) is not an edge of the requirement"
                    % (d.context, q, s)
                )
            rows.append(((intern((d.target, s)),), (1.0,)))
            tags.append(d.context)
    return Dtmc(
        num_states=len(order),
        rows=tuple(rows),
        initial=0,
        labels=tuple(mdp.labeling[s] for _, s in order),
        tags=tuple(tags),
        info=tuple(order),
    )


# ---------------------------------------------------------------------------
# persistence procedure


def partition_states(
    mdp: Mdp,
    req: CaptlRequirement,
    epsilon: float = engine.DEFAULT_EPSILON,
    max_iter: int = engine.DEFAULT_MAX_ITER,
    _timings: Optional[Dict[str, float]] = None,
) -> Partition:
    """Explore objectives from the initial one, computing each explored
    objective's value vector once and splitting the reachable states into
    stay/switch blocks by interval membership (first match in declaration
    order; disjointness makes the order irrelevant for valid requirements)."""
    violations = validate_persistence(req)
    if violations:
        raise SynthesisError(
            "not a persistence requirement: " + "; ".join(violations)
        )
    reachable = reach(mdp, mdp.initial)
    explored: List[str] = []
    vectors: Dict[str, ValueVector] = {}
    blocks: Dict[str, Dict[str, StateSet]] = {}
    by_context: Dict[str, StateSet] = {}
    pending = deque([req.initial])
    scheduled = {req.initial}
    while pending:
        q = pending.popleft()
        explored.append(q)
        started = time.perf_counter()
        obj = req.objective(q)
        b = eval_state_formula(mdp, obj.formula)
        x = engine.persistence_values(mdp, b, epsilon, objective_id=q, max_iter=max_iter)
        vectors[q] = x
        remaining = set(reachable)
        per_target: Dict[str, List[int]] = {q2: [] for q2 in req.objective_ids()}
        for w in contexts_of(req, q):
            claimed = sorted(s for s in remaining if w.interval.contains(x[s]))
            by_context[w.id] = tuple(claimed)
            remaining.difference_update(claimed)
            per_target[w.target].extend(claimed)
            if claimed and w.target not in scheduled:
                scheduled.add(w.target)
                pending.append(w.target)
        per_target[q] = sorted(remaining)
        blocks[q] = {q2: tuple(sorted(states)) for q2, states in per_target.items()}
        if _timings is not None:
            _timings[q] = time.perf_counter() - started
    return Partition(
        reachable=reachable,
        explored=tuple(explored),
        vectors=vectors,
        blocks=blocks,
        by_context=by_context,
    )


def build_product(
    mdp: Mdp,
    req: CaptlRequirement,
    strategies: Dict[str, StrategyMap],
    partition: Partition,
) -> ProductDtmc:
    """Direct construction of the turn-based product, restricted to the states
    reachable from (initial state, initial objective, turn 2).

    Rule instantiations are collected per state and the composition is
    rejected unless exactly one applies (the partition's disjointness makes
    this hold for valid inputs)."""
    stay: Dict[str, Set[int]] = {q: set(partition.blocks[q][q]) for q in partition.explored}
    claimed: Dict[str, Set[int]] = {w: set(states) for w, states in partition.by_context.items()}

    start = (mdp.initial, req.initial, TURN_REQUIREMENT)
    index: Dict[Tuple[int, str, int], int] = {start: 0}
    order: List[Tuple[int, str, int]] = [start]
    rows: List[Tuple[Tuple[int, ...], Tuple[float, ...]]] = []
    tags: List[Optional[str]] = []
    tag_counts: List[int] = []

    def intern(key: Tuple[int, str, int]) -> int:
        if key not in index:
            index[key] = len(order)
            order.append(key)
        return index[key]

    pos = 0
    while pos < len(order):
        s, q, turn = order[pos]
        pos += 1
        if q not in partition.vectors:
            raise CompositionError("objective %s was never explored by the partition" % q)
        if turn == TURN_REQUIREMENT:
            rules: List[Tuple[str, Tuple[int, str, int]]] = []
            for w in contexts_of(req, q):
                if s in claimed.get(w.id, ()):
                    rules.append((w.id, (s, w.target, TURN_REQUIREMENT)))
            if s in stay[q]:
                rules.append((TAU, (s, q, TURN_SYSTEM)))
            tag_counts.append(len(rules))
            if len(rules) != 1:
                raise CompositionError(
                    "product state (%d, %s, 2) has %d enabled action tags"
                    % (s, q, len(rules))
                )
            tag, dest = rules[0]
            rows.append(((intern(dest),), (1.0,)))
            tags.append(tag)
        else:
            strategy = strategies.get(q)
            if strategy is None:
                raise CompositionError("missing strategy for explored objective %s" % q)
            action = strategy.get(s)
            if action is None:
                raise CompositionError(
                    "no strategy action at state %d under objective %s (deadlock)" % (s, q)
                )
            ch = mdp.choice(s, action)
            if ch is None:
                raise CompositionError(
                    "strategy action %r not enabled at state %d" % (action, s)
                )
            tag_counts.append(1)
            rows.append(
                (tuple(intern((t, q, TURN_REQUIREMENT)) for t in ch.dests), ch.probs)
            )
            tags.append(action)
    chain = Dtmc(
        num_states=len(order),
        rows=tuple(rows),
        initial=0,
        labels=tuple(mdp.labeling[s] for s, _, _ in order),
        tags=tuple(tags),
        info=tuple(order),
    )
    return ProductDtmc(chain=chain, tag_counts=tuple(tag_counts))


def product_accepting(mdp: Mdp, req: CaptlRequirement, product: ProductDtmc):
    """Predicate over product states: the model state lies inside the active
    objective's persistence set B."""
    b_sets: Dict[str, Set[int]] = {}
    for _, q, _ in product.states:
        if q not in b_sets:
            b_sets[q] = set(eval_state_formula(mdp, req.objective(q).formula).states)

    def accepting(v: int) -> bool:
        s, q, _turn = product.states[v]
        return s in b_sets[q]

    return accepting


def synth_persistence(
    mdp: Mdp,
    req: CaptlRequirement,
    epsilon: float = engine.DEFAULT_EPSILON,
    max_iter: int = engine.DEFAULT_MAX_ITER,
) -> Tuple[Protocol, ProductDtmc]:
    protocol, product, _ = run_persistence(mdp, req, epsilon, max_iter)
    return protocol, product


def run_persistence(
    mdp: Mdp,
    req: CaptlRequirement,
    epsilon: float = engine.DEFAULT_EPSILON,
    max_iter: int = engine.DEFAULT_MAX_ITER,
) -> Tuple[Protocol, ProductDtmc, RunStats]:
    """Partition, extract one strategy per explored objective, build the
    product and verify the satisfaction probability; also reports phase
    timings and model sizes."""
    timings: Dict[str, float] = {}
    partition = partition_states(mdp, req, epsilon, max_iter, _timings=timings)

    strategies: Dict[str, StrategyMap] = {}
    for q in partition.explored:
        started = time.perf_counter()
        obj = req.objective(q)
        base = eval_state_formula(mdp, obj.formula)
        target = persistence_target(mdp, base)
        strategies[q] = extract_strategy(mdp, partition.vectors[q], target)
        timings[q] = timings.get(q, 0.0) + (time.perf_counter() - started)

    started = time.perf_counter()
    product = build_product(mdp, req, strategies, partition)
    product_time = time.perf_counter() - started

    started = time.perf_counter()
    c = dtmc_persistence_prob(product.chain, product_accepting(mdp, req, product))
    verify_time = time.perf_counter() - started

    entries: Dict[Tuple[str, int], Decision] = {}
    for q in partition.explored:
        strategy = strategies[q]
        for s in partition.blocks[q][q]:
            action = strategy.get(s)
            if action is not None:
                entries[(q, s)] = Decision.of_action(action)
        for w in contexts_of(req, q):
            for s in partition.by_context.get(w.id, ()):
                entries[(q, s)] = Decision.of_switch(w.id, w.target)

    protocol = Protocol(
        algorithm="persistence",
        satisfaction_prob=c,
        entries=entries,
        objective_order=req.objective_ids(),
    )
    num_states, nnz, num_choices = cardinality(mdp)
    stats = RunStats(
        model_states=num_states,
        model_transitions=nnz,
        model_choices=num_choices,
        product_states=product.num_states,
        product_transitions=sum(len(r[0]) for r in product.chain.rows),
        product_choices=sum(1 for t in product.chain.tags if t is not None),
        objective_times=timings,
        product_time=product_time,
        verify_time=verify_time,
    )
    return protocol, product, stats


# ---------------------------------------------------------------------------
# DOT export


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def product_to_dot(product: ProductDtmc, mdp: Optional[Mdp] = None) -> str:
    """Graphviz rendering: turn-2 states as double circles, context edges
    labeled ``w:<id>``, stutter edges dashed."""
    chain = product.chain
    lines = ["digraph product {", "  rankdir=LR;"]
    for v, (s, q, turn) in enumerate(product.states):
        name = mdp.display_name(s) if mdp is not None else str(s)
        shape = "doublecircle" if turn == TURN_REQUIREMENT else "circle"
        lines.append(
            '  v%d [shape=%s, label="%s"];' % (v, shape, _dot_escape("%s,%s" % (name, q)))
        )
    for v in range(chain.num_states):
        tag = chain.tags[v]
        dests, probs = chain.rows[v]
        for t, p in zip(dests, probs):
            if tag == TAU:
                lines.append('  v%d -> v%d [style=dashed, label="&tau;"];' % (v, t))
            elif product.states[v][2] == TURN_REQUIREMENT:
                lines.append('  v%d -> v%d [label="w:%s"];' % (v, t, _dot_escape(tag)))
            else:
                lines.append(
                    '  v%d -> v%d [label="%s %.6f"];' % (v, t, _dot_escape(tag), p)
                )
    lines.append("}")
    return "\n".join(lines) + "\n"


def chain_to_dot(chain: Dtmc, mdp: Optional[Mdp] = None) -> str:
    """Graphviz rendering of an induced chain (states shown as (q, s))."""
    lines = ["digraph chain {", "  rankdir=LR;"]
    for v in range(chain.num_states):
        if chain.info is not None:
            q, s = chain.info[v]  # type: ignore[misc]
            name = mdp.display_name(s) if mdp is not None else str(s)
            label = "%s,%s" % (q, name)
        else:
            label = str(v)
        lines.append('  v%d [shape=circle, label="%s"];' % (v, _dot_escape(label)))
    for v in range(chain.num_states):
        dests, probs = chain.rows[v]
        tag = chain.tags[v] or ""
        for t, p in zip(dests, probs):
            lines.append(
                '  v%d -> v%d [label="%s %.6f"];' % (v, t, _dot_escape(tag), p)
            )
    lines.append("}")
    return "\n".join(lines) + "\n"
