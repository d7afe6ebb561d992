"""Quantitative PCTL solving over explicit-state MDPs.

Optimal reachability probabilities are computed by value iteration from the
zero vector (a least-fixed-point approximation): target states are pinned to
1, qualitative-zero states are pinned to 0, and iteration stops when the
max-norm change drops below epsilon.  Persistence queries (eventually-always
over a state set B) reduce to maximal reachability of the union of end
components fully contained in B; a deadlock state inside B also counts as
accepting since deadlocks are treated as absorbing.

Every function here is pure and deterministic: states are swept in ascending
index order, so repeated runs produce identical floating-point results.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from . import kernels
from .formulas import Interval, StateFormula
from .model import Mdp, StateSet, reach

DEFAULT_EPSILON = 1e-6
DEFAULT_MAX_ITER = 10**6
ARGMAX_TOL = 1e-9
EXACT_SOLVE_LIMIT = 2000


class EngineError(Exception):
    pass


class NonConvergenceError(EngineError):
    pass


class UnknownProposition(EngineError):
    pass


class BoundaryWarning(UserWarning):
    """A context interval endpoint lies within numerical noise of a value."""


@dataclass(frozen=True)
class TargetSet:
    """A set of states denoted by a boolean state formula (or persistence set B)."""

    states: StateSet
    source_formula: Optional[StateFormula] = None


@dataclass(frozen=True)
class ValueVector:
    """Per-state optimal probabilities for one objective.

    Defined exactly on the states reachable from ``root``; values are clamped
    into [0,1] after iteration.
    """

    values: Dict[int, float]
    objective_id: str
    epsilon: float
    root: int

    @property
    def domain(self) -> StateSet:
        return tuple(sorted(self.values))

    def __getitem__(self, s: int) -> float:
        return self.values[s]

    def __contains__(self, s: int) -> bool:
        return s in self.values


@dataclass(frozen=True)
class StrategyMap:
    """Pure memoryless strategy: reachable non-deadlock state -> action name."""

    choices: Dict[int, str]

    def __getitem__(self, s: int) -> str:
        return self.choices[s]

    def get(self, s: int) -> Optional[str]:
        return self.choices.get(s)


@dataclass(frozen=True)
class Mec:
    """A maximal end component: states plus the retained actions per state."""

    states: StateSet
    actions: Dict[int, Tuple[int, ...]]


# ---------------------------------------------------------------------------
# state formulas


def eval_state_formula(mdp: Mdp, formula: StateFormula) -> TargetSet:
    """Exact set of states whose label set satisfies the formula."""
    known = set(mdp.atomic_props)
    for atom in formula.atoms():
        if atom not in known:
            raise UnknownProposition("unknown proposition %r" % atom)
    states = tuple(s for s in range(mdp.num_states) if formula.holds(mdp.labeling[s]))
    return TargetSet(states=states, source_formula=formula)


# ---------------------------------------------------------------------------
# qualitative graph precomputation


def _prob0_max_set(mdp: Mdp, universe: Set[int], targets: Set[int]) -> Set[int]:
    """States of the universe with no path at all into targets."""
    preds: Dict[int, List[int]] = {}
    for s in universe:
        for ch in mdp.choices_of(s):
            for t in ch.dests:
                preds.setdefault(t, []).append(s)
    seen = set(targets)
    queue = deque(targets)
    while queue:
        t = queue.popleft()
        for s in preds.get(t, ()):
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return universe - seen


def _prob1_max_set(mdp: Mdp, universe: Set[int], targets: Set[int]) -> Set[int]:
    """Greatest fixed point of the standard double (outer gfp / inner lfp)
    characterization of the states with maximal reachability exactly 1."""
    u = set(universe)
    targets = targets & u
    while True:
        v = set(targets)
        # inner least fixed point: s joins if some choice stays inside u and
        # can hit v
        queue = deque(v)
        hit_lists: Dict[int, List[Tuple[int, Tuple[int, ...]]]] = {}
        for s in u - v:
            for ch in mdp.choices_of(s):
                if all(t in u for t in ch.dests):
                    for t in ch.dests:
                        hit_lists.setdefault(t, []).append((s, ch.dests))
        while queue:
            t = queue.popleft()
            for s, dests in hit_lists.get(t, ()):
                if s not in v:
                    v.add(s)
                    queue.append(s)
        if v == u:
            return v
        u = v


def _prob0_min_set(mdp: Mdp, universe: Set[int], targets: Set[int]) -> Set[int]:
    """States where the minimal reachability is 0 (some strategy avoids the
    targets entirely; deadlocks avoid trivially)."""
    x = universe - targets
    while True:
        keep = set()
        for s in x:
            if mdp.is_deadlock(s):
                keep.add(s)
                continue
            for ch in mdp.choices_of(s):
                if all(t in x for t in ch.dests):
                    keep.add(s)
                    break
        if keep == x:
            return x
        x = keep


def prob1_max(mdp: Mdp, target: TargetSet) -> StateSet:
    universe = set(range(mdp.num_states))
    return tuple(sorted(_prob1_max_set(mdp, universe, set(target.states))))


def prob0_max(mdp: Mdp, target: TargetSet) -> StateSet:
    universe = set(range(mdp.num_states))
    return tuple(sorted(_prob0_max_set(mdp, universe, set(target.states))))


# ---------------------------------------------------------------------------
# value iteration


def _sub_arrays(mdp: Mdp, states: Sequence[int]):
    """CSR arrays of the sub-MDP induced by a forward-closed state set."""
    loc = {s: i for i, s in enumerate(states)}
    state_ptr = np.zeros(len(states) + 1, dtype=np.int64)
    choice_ptr: List[int] = [0]
    cols: List[int] = []
    probs: List[float] = []
    for i, s in enumerate(states):
        chs = mdp.choices_of(s)
        state_ptr[i + 1] = state_ptr[i] + len(chs)
        for ch in chs:
            cols.extend(loc[t] for t in ch.dests)
            probs.extend(ch.probs)
            choice_ptr.append(len(cols))
    return (
        state_ptr,
        np.asarray(choice_ptr, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(probs, dtype=np.float64),
    )


def _iterate(arrays, x0, update, maximize, epsilon, max_iter):
    state_ptr, choice_ptr, cols, probs = arrays
    x = x0
    for _ in range(max_iter):
        x_new = kernels.bellman_sweep(x, state_ptr, choice_ptr, cols, probs, update, maximize)
        delta = float(np.max(np.abs(x_new - x))) if len(x) else 0.0
        x = x_new
        if delta < epsilon:
            return np.clip(x, 0.0, 1.0)
    raise NonConvergenceError(
        "value iteration did not converge within %d iterations (epsilon=%g)"
        % (max_iter, epsilon)
    )


def _solve_reach(
    mdp: Mdp,
    states: Sequence[int],
    targets: Set[int],
    maximize: bool,
    epsilon: float,
    max_iter: int,
) -> Dict[int, float]:
    universe = set(states)
    targets = targets & universe
    if maximize:
        zeros = _prob0_max_set(mdp, universe, targets)
    else:
        zeros = _prob0_min_set(mdp, universe, targets)
    x0 = np.zeros(len(states))
    update = np.ones(len(states), dtype=bool)
    for i, s in enumerate(states):
        if s in targets:
            x0[i] = 1.0
            update[i] = False
        elif s in zeros:
            update[i] = False
    x = _iterate(_sub_arrays(mdp, states), x0, update, maximize, epsilon, max_iter)
    return {s: float(x[i]) for i, s in enumerate(states)}


def max_reach_values(
    mdp: Mdp,
    target: TargetSet,
    epsilon: float = DEFAULT_EPSILON,
    *,
    root: Optional[int] = None,
    objective_id: str = "",
    max_iter: int = DEFAULT_MAX_ITER,
) -> ValueVector:
    """Maximal probabilities of eventually reaching the target set.

    The vector is computed (and defined) on the states reachable from
    ``root`` (the model's initial state by default).
    """
    if epsilon <= 0:
        raise EngineError("epsilon must be positive")
    root = mdp.initial if root is None else root
    states = reach(mdp, root)
    values = _solve_reach(mdp, states, set(target.states), True, epsilon, max_iter)
    return ValueVector(values=values, objective_id=objective_id, epsilon=epsilon, root=root)


def min_reach_values(
    mdp: Mdp,
    target: TargetSet,
    epsilon: float = DEFAULT_EPSILON,
    *,
    root: Optional[int] = None,
    objective_id: str = "",
    max_iter: int = DEFAULT_MAX_ITER,
) -> ValueVector:
    """Minimal probabilities of eventually reaching the target set."""
    if epsilon <= 0:
        raise EngineError("epsilon must be positive")
    root = mdp.initial if root is None else root
    states = reach(mdp, root)
    values = _solve_reach(mdp, states, set(target.states), False, epsilon, max_iter)
    return ValueVector(values=values, objective_id=objective_id, epsilon=epsilon, root=root)


# ---------------------------------------------------------------------------
# end components and persistence


def _tarjan_sccs(nodes: Sequence[int], succ: Callable[[int], Sequence[int]]) -> List[List[int]]:
    """Iterative Tarjan; emits SCCs bottoms-first (reverse topological)."""
    index: Dict[int, int] = {}
    low: Dict[int, int] = {}
    on_stack: Set[int] = set()
    stack: List[int] = []
    sccs: List[List[int]] = []
    counter = 0
    for start in nodes:
        if start in index:
            continue
        work = [(start, iter(succ(start)))]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def mec_decomposition(mdp: Mdp, restrict_to: Sequence[int]) -> List[Mec]:
    """Maximal end components of the sub-MDP induced by ``restrict_to``.

    Standard refinement: within each candidate set, drop choices whose
    distribution leaves the set, drop states without remaining choices, split
    into SCCs of the retained-edge graph, and repeat until stable.
    """
    result: List[Mec] = []
    candidates: List[Set[int]] = [set(restrict_to)]
    while candidates:
        cand = candidates.pop()
        if not cand:
            continue
        retained: Dict[int, List] = {}
        for s in cand:
            keep = [ch for ch in mdp.choices_of(s) if all(t in cand for t in ch.dests)]
            if keep:
                retained[s] = keep
        core = set(retained)
        if core != cand:
            candidates.append(core)
            continue

        def successors(s, retained=retained):
            out = set()
            for ch in retained[s]:
                out.update(ch.dests)
            return sorted(out)

        sccs = _tarjan_sccs(sorted(core), successors)
        if len(sccs) == 1 and set(sccs[0]) == cand:
            result.append(
                Mec(
                    states=tuple(sorted(cand)),
                    actions={s: tuple(ch.action for ch in retained[s]) for s in sorted(cand)},
                )
            )
        else:
            candidates.extend(set(c) for c in sccs)
    result.sort(key=lambda m: m.states[0])
    return result


def persistence_target(mdp: Mdp, b_set: TargetSet, *, root: Optional[int] = None) -> TargetSet:
    """Accepting set for eventually-always B: states of end components fully
    inside B, plus deadlock states inside B (absorbing by convention)."""
    root = mdp.initial if root is None else root
    reachable = set(reach(mdp, root))
    b_states = set(b_set.states) & reachable
    accepting: Set[int] = set()
    for mec in mec_decomposition(mdp, tuple(sorted(b_states))):
        accepting.update(mec.states)
    accepting.update(s for s in b_states if mdp.is_deadlock(s))
    return TargetSet(states=tuple(sorted(accepting)), source_formula=b_set.source_formula)


def persistence_values(
    mdp: Mdp,
    b_set: TargetSet,
    epsilon: float = DEFAULT_EPSILON,
    *,
    root: Optional[int] = None,
    objective_id: str = "",
    max_iter: int = DEFAULT_MAX_ITER,
) -> ValueVector:
    """Maximal probabilities of eventually remaining forever inside B."""
    root = mdp.initial if root is None else root
    target = persistence_target(mdp, b_set, root=root)
    return max_reach_values(
        mdp, target, epsilon, root=root, objective_id=objective_id, max_iter=max_iter
    )


# ---------------------------------------------------------------------------
# strategy extraction


def extract_strategy(
    mdp: Mdp,
    x: ValueVector,
    target: TargetSet,
    *,
    direction: str = "max",
) -> StrategyMap:
    """Choose an optimal action per reachable non-deadlock state.

    Candidates are the enabled actions whose backup value lies within
    ``ARGMAX_TOL`` of the optimum; ties break toward the lowest action
    declaration index.  Two refinements make the chosen strategy actually
    realize the value instead of merely preserving it:

    * inside end components of the target region the component's retained
      action (lowest index) is played, so an eventually-always target is
      realized rather than approached in value;
    * elsewhere (maximizing only) the tie-break is restricted to candidate
      actions that decrease the candidate-graph distance to the target,
      ruling out value-preserving cycles that never arrive.
    """
    maximize = direction == "max"
    domain = x.domain
    target_states = set(target.states) & set(domain)

    mec_action: Dict[int, int] = {}
    if maximize:
        for mec in mec_decomposition(mdp, tuple(sorted(target_states))):
            for s in mec.states:
                mec_action[s] = mec.actions[s][0]

    candidates: Dict[int, List] = {}
    for s in domain:
        if mdp.is_deadlock(s):
            continue
        rows = []
        for ch in mdp.choices_of(s):
            value = sum(p * x[t] for t, p in zip(ch.dests, ch.probs))
            rows.append((ch.action, value, ch.dests))
        best = max(r[1] for r in rows) if maximize else min(r[1] for r in rows)
        if maximize:
            cand = [r for r in rows if r[1] >= best - ARGMAX_TOL]
        else:
            cand = [r for r in rows if r[1] <= best + ARGMAX_TOL]
        candidates[s] = cand

    chosen: Dict[int, str] = {}
    if not maximize:
        for s, cand in candidates.items():
            chosen[s] = mdp.actions[cand[0][0]]
        return StrategyMap(choices=chosen)

    # BFS layers toward the target over candidate edges of non-target states
    dist: Dict[int, int] = {t: 0 for t in target_states}
    preds: Dict[int, List[int]] = {}
    for s, cand in candidates.items():
        if s in target_states:
            continue
        for _, _, dests in cand:
            for t in dests:
                preds.setdefault(t, []).append(s)
    queue = deque(sorted(target_states))
    while queue:
        t = queue.popleft()
        for s in preds.get(t, ()):
            if s not in dist:
                dist[s] = dist[t] + 1
                queue.append(s)

    for s, cand in candidates.items():
        if s in mec_action:
            chosen[s] = mdp.actions[mec_action[s]]
        elif s in target_states or s not in dist:
            chosen[s] = mdp.actions[cand[0][0]]
        else:
            for action, _, dests in cand:
                if any(dist.get(t, -1) == dist[s] - 1 for t in dests):
                    chosen[s] = mdp.actions[action]
                    break
            else:  # pragma: no cover - BFS membership guarantees a witness
                chosen[s] = mdp.actions[cand[0][0]]
    return StrategyMap(choices=chosen)


# ---------------------------------------------------------------------------
# context checks


def verify_context(mdp: Mdp, s: int, x: ValueVector, interval: Interval) -> bool:
    """Raw interval membership of x[s]; warns when the value sits within
    10*epsilon of an endpoint (boundary-sensitive classification).

    Exact 0.0 and 1.0 values are exempt from the warning: they come from the
    qualitative graph precomputation (or clamping), not from iteration, so
    there is no numerical uncertainty to flag.
    """
    if s not in x:
        raise EngineError("state %d outside the value vector domain" % s)
    value = x[s]
    if value not in (0.0, 1.0):
        for endpoint in (interval.lo, interval.hi):
            if abs(value - endpoint) < 10 * x.epsilon:
                warnings.warn(
                    "value %.12g at state %d lies near interval endpoint %g; "
                    "classification is boundary-sensitive" % (value, s, endpoint),
                    BoundaryWarning,
                    stacklevel=2,
                )
    return interval.contains(value)


# ---------------------------------------------------------------------------
# discrete-time Markov chains


@dataclass(frozen=True)
class Dtmc:
    """Explicit chain: one (possibly empty) distribution per state.

    ``tags`` names the action resolved at each state (None for absorbing
    deadlocks); ``info`` optionally carries display tuples for composed
    states.
    """

    num_states: int
    rows: Tuple[Tuple[Tuple[int, ...], Tuple[float, ...]], ...]
    initial: int
    labels: Tuple[frozenset, ...]
    tags: Tuple[Optional[str], ...]
    info: Optional[Tuple[object, ...]] = None

    def __post_init__(self):
        if len(self.rows) != self.num_states or len(self.labels) != self.num_states:
            raise EngineError("chain rows/labels must cover every state")
        for s, (dests, probs) in enumerate(self.rows):
            if not dests:
                continue
            if any(not (0 < p <= 1.0) for p in probs):
                raise EngineError("chain state %d has a probability outside (0,1]" % s)
            if abs(sum(probs) - 1.0) > 1e-9:
                raise EngineError("chain state %d row does not sum to 1" % s)

    def successors(self, s: int) -> Tuple[int, ...]:
        return self.rows[s][0]


def dtmc_from_mdp(mdp: Mdp) -> Dtmc:
    """Reinterpret an MDP without nondeterminism as a chain."""
    rows = []
    tags = []
    for s in range(mdp.num_states):
        chs = mdp.choices_of(s)
        if len(chs) > 1:
            raise EngineError(
                "state %d has %d enabled actions; not a DTMC" % (s, len(chs))
            )
        if chs:
            rows.append((chs[0].dests, chs[0].probs))
            tags.append(mdp.actions[chs[0].action])
        else:
            rows.append(((), ()))
            tags.append(None)
    return Dtmc(
        num_states=mdp.num_states,
        rows=tuple(rows),
        initial=mdp.initial,
        labels=mdp.labeling,
        tags=tuple(tags),
    )


def _as_dtmc(chain) -> Dtmc:
    if isinstance(chain, Dtmc):
        return chain
    if isinstance(chain, Mdp):
        return dtmc_from_mdp(chain)
    inner = getattr(chain, "chain", None)
    if isinstance(inner, Dtmc):
        return inner
    raise EngineError("expected a Dtmc, a deterministic Mdp, or a product")


def bsccs(chain) -> List[StateSet]:
    """Bottom SCCs of the chain restricted to states reachable from initial.

    A deadlock state is absorbing, hence a singleton BSCC.
    """
    chain = _as_dtmc(chain)
    reachable = set()
    queue = deque([chain.initial])
    reachable.add(chain.initial)
    while queue:
        s = queue.popleft()
        for t in chain.successors(s):
            if t not in reachable:
                reachable.add(t)
                queue.append(t)
    nodes = sorted(reachable)
    sccs = _tarjan_sccs(nodes, lambda s: [t for t in chain.successors(s) if t in reachable])
    bottoms = []
    for comp in sccs:
        comp_set = set(comp)
        leaves = any(t not in comp_set for s in comp for t in chain.successors(s))
        if not leaves:
            bottoms.append(tuple(sorted(comp)))
    bottoms.sort(key=lambda c: c[0])
    return bottoms


def dtmc_reach_values(chain, target: Sequence[int], epsilon: float = 1e-9) -> Dict[int, float]:
    """Per-state probability of eventually reaching the target states.

    Exact dense linear solve for chains up to EXACT_SOLVE_LIMIT states,
    value iteration to ``epsilon`` beyond that.
    """
    chain = _as_dtmc(chain)
    n = chain.num_states
    targets = set(target)
    preds: Dict[int, List[int]] = {}
    for s in range(n):
        for t in chain.successors(s):
            preds.setdefault(t, []).append(s)
    can_reach = set(targets)
    queue = deque(targets)
    while queue:
        t = queue.popleft()
        for s in preds.get(t, ()):
            if s not in can_reach:
                can_reach.add(s)
                queue.append(s)
    unknown = sorted(can_reach - targets)
    values = {s: 0.0 for s in range(n)}
    for t in targets:
        values[t] = 1.0
    if not unknown:
        return values
    if n <= EXACT_SOLVE_LIMIT:
        loc = {s: i for i, s in enumerate(unknown)}
        m = len(unknown)
        a = np.eye(m)
        b = np.zeros(m)
        for s in unknown:
            dests, probs = chain.rows[s]
            for t, p in zip(dests, probs):
                if t in targets:
                    b[loc[s]] += p
                elif t in loc:
                    a[loc[s], loc[t]] -= p
        try:
            sol = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - bug guard
            raise EngineError("singular reachability system after preprocessing") from exc
        for s in unknown:
            values[s] = float(min(1.0, max(0.0, sol[loc[s]])))
        return values
    # large chains: pinned value iteration
    state_ptr = np.zeros(n + 1, dtype=np.int64)
    choice_ptr = [0]
    cols: List[int] = []
    probs: List[float] = []
    for s in range(n):
        dests, ps = chain.rows[s]
        if dests:
            state_ptr[s + 1] = state_ptr[s] + 1
            cols.extend(dests)
            probs.extend(ps)
            choice_ptr.append(len(cols))
        else:
            state_ptr[s + 1] = state_ptr[s]
    arrays = (
        state_ptr,
        np.asarray(choice_ptr, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(probs, dtype=np.float64),
    )
    x0 = np.zeros(n)
    update = np.ones(n, dtype=bool)
    for s in range(n):
        if s in targets:
            x0[s] = 1.0
            update[s] = False
        elif s not in can_reach:
            update[s] = False
    x = _iterate(arrays, x0, update, True, epsilon, DEFAULT_MAX_ITER)
    return {s: float(x[s]) for s in range(n)}


def dtmc_reach_prob(chain, target: Sequence[int], epsilon: float = 1e-9) -> float:
    chain = _as_dtmc(chain)
    return dtmc_reach_values(chain, target, epsilon)[chain.initial]


def dtmc_persistence_prob(chain, accepting: Callable[[int], bool], epsilon: float = 1e-9) -> float:
    """Probability that the chain eventually stays forever inside accepting
    states: reach probability of the union of BSCCs all of whose states
    satisfy the predicate."""
    chain = _as_dtmc(chain)
    accepted: List[int] = []
    for comp in bsccs(chain):
        if all(accepting(s) for s in comp):
            accepted.extend(comp)
    if not accepted:
        return 0.0
    return dtmc_reach_prob(chain, accepted, epsilon)
