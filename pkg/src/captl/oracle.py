"""Independent ground-truth machinery for tests.

Everything here is deliberately naive: exact rational linear solves instead
of value iteration, exhaustive memoryless-strategy enumeration instead of
Bellman optimization, Kosaraju instead of Tarjan for bottom components.
Transition probabilities are converted to Fractions exactly (i.e. the binary
floating-point values obtained from the input decimals), so ground truth has
no tolerance stacking of its own.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

from .engine import Dtmc
from .model import Mdp

EXACT_LIMIT = 2000
ENUM_LIMIT = 10**6


class OracleError(Exception):
    pass


@dataclass(frozen=True)
class TraceSample:
    """A finite path with its trace (label-set sequence) and exact probability."""

    path: Tuple[int, ...]
    trace: Tuple[frozenset, ...]
    probability: Fraction


@dataclass(frozen=True)
class SimResult:
    runs: int
    successes: int
    estimate: float
    half_width: float
    seed: int
    horizon: int


def _plain_chain(chain) -> Dtmc:
    inner = getattr(chain, "chain", None)
    if isinstance(inner, Dtmc):
        return inner
    if isinstance(chain, Dtmc):
        return chain
    raise OracleError("expected a Dtmc")


# ---------------------------------------------------------------------------
# exact reachability


def exact_dtmc_reach(chain, target: Iterable[int]) -> Dict[int, Fraction]:
    """Exact per-state probability of reaching the target states.

    Rational Gaussian elimination after graph preprocessing (states with no
    path to the target are exact zeros).
    """
    chain = _plain_chain(chain)
    n = chain.num_states
    if n > EXACT_LIMIT:
        raise OracleError("chain too large for the exact solver (%d states)" % n)
    targets = set(target)
    preds: Dict[int, List[int]] = {}
    for s in range(n):
        for t in chain.successors(s):
            preds.setdefault(t, []).append(s)
    can_reach = set(targets)
    stack = list(targets)
    while stack:
        t = stack.pop()
        for s in preds.get(t, ()):
            if s not in can_reach:
                can_reach.add(s)
                stack.append(s)
    values = {s: Fraction(0) for s in range(n)}
    for t in targets:
        values[t] = Fraction(1)
    unknown = sorted(can_reach - targets)
    if not unknown:
        return values
    loc = {s: i for i, s in enumerate(unknown)}
    m = len(unknown)
    # rows of (I - A | b)
    mat = [[Fraction(0)] * (m + 1) for _ in range(m)]
    for s in unknown:
        i = loc[s]
        mat[i][i] = Fraction(1)
        dests, probs = chain.rows[s]
        for t, p in zip(dests, probs):
            q = Fraction(p)
            if t in targets:
                mat[i][m] += q
            elif t in loc:
                mat[i][loc[t]] -= q
    # forward elimination with exact pivoting
    for col in range(m):
        pivot = next((r for r in range(col, m) if mat[r][col] != 0), None)
        if pivot is None:
            raise OracleError("singular system after preprocessing (solver bug)")
        mat[col], mat[pivot] = mat[pivot], mat[col]
        inv = Fraction(1) / mat[col][col]
        mat[col] = [v * inv for v in mat[col]]
        for r in range(m):
            if r != col and mat[r][col] != 0:
                factor = mat[r][col]
                mat[r] = [a - factor * b for a, b in zip(mat[r], mat[col])]
    for s in unknown:
        values[s] = mat[loc[s]][m]
    return values


# ---------------------------------------------------------------------------
# bottom components (Kosaraju, independent of the engine's Tarjan)


def bottom_components(chain) -> List[Tuple[int, ...]]:
    chain = _plain_chain(chain)
    n = chain.num_states
    order: List[int] = []
    seen = [False] * n
    for start in range(n):
        if seen[start]:
            continue
        stack: List[Tuple[int, int]] = [(start, 0)]
        seen[start] = True
        while stack:
            s, i = stack[-1]
            succs = chain.successors(s)
            if i < len(succs):
                stack[-1] = (s, i + 1)
                t = succs[i]
                if not seen[t]:
                    seen[t] = True
                    stack.append((t, 0))
            else:
                order.append(s)
                stack.pop()
    preds: Dict[int, List[int]] = {}
    for s in range(n):
        for t in chain.successors(s):
            preds.setdefault(t, []).append(s)
    comp = [-1] * n
    comps: List[List[int]] = []
    for s in reversed(order):
        if comp[s] != -1:
            continue
        cid = len(comps)
        comps.append([])
        stack2 = [s]
        comp[s] = cid
        while stack2:
            u = stack2.pop()
            comps[cid].append(u)
            for p in preds.get(u, ()):
                if comp[p] == -1:
                    comp[p] = cid
                    stack2.append(p)
    bottoms = []
    for cid, members in enumerate(comps):
        if all(comp[t] == cid for s in members for t in chain.successors(s)):
            bottoms.append(tuple(sorted(members)))
    bottoms.sort(key=lambda c: c[0])
    return bottoms


def exact_dtmc_persistence(chain, accepting: Callable[[int], bool]) -> Fraction:
    """Exact probability of eventually staying forever in accepting states."""
    chain = _plain_chain(chain)
    accepted: List[int] = []
    for members in bottom_components(chain):
        if all(accepting(s) for s in members):
            accepted.extend(members)
    if not accepted:
        return Fraction(0)
    return exact_dtmc_reach(chain, accepted)[chain.initial]


# ---------------------------------------------------------------------------
# exhaustive strategy enumeration


def _induced_chain(mdp: Mdp, picks: Dict[int, int]) -> Dtmc:
    rows = []
    tags = []
    for s in range(mdp.num_states):
        if s in picks:
            ch = mdp.choices_of(s)[picks[s]]
            rows.append((ch.dests, ch.probs))
            tags.append(mdp.actions[ch.action])
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


def enumerate_strategy_optimum(
    mdp: Mdp,
    kind: str,
    target: Iterable[int],
    direction: str = "max",
) -> Fraction:
    """Exact optimal value at the initial state by exhausting all pure
    memoryless strategies.

    ``kind`` is "F" (reach the target) or "FG" (eventually stay forever in
    the target set); deadlock states count as absorbing.
    """
    if kind not in ("F", "FG"):
        raise OracleError("kind must be 'F' or 'FG'")
    targets = set(target)
    undecided = [s for s in range(mdp.num_states) if not mdp.is_deadlock(s)]
    total = 1
    for s in undecided:
        total *= len(mdp.choices_of(s))
        if total > ENUM_LIMIT:
            raise OracleError("too many strategies to enumerate (> %d)" % ENUM_LIMIT)
    best: Optional[Fraction] = None
    maximize = direction == "max"
    for combo in itertools.product(*[range(len(mdp.choices_of(s))) for s in undecided]):
        chain = _induced_chain(mdp, dict(zip(undecided, combo)))
        if kind == "F":
            value = exact_dtmc_reach(chain, targets)[mdp.initial]
        else:
            value = exact_dtmc_persistence(chain, lambda s: s in targets)
        if best is None or (value > best if maximize else value < best):
            best = value
    return best


# ---------------------------------------------------------------------------
# simulation


def simulate(
    chain,
    accepting: Callable[[int], bool],
    runs: int,
    horizon: Optional[int] = None,
    seed: int = 0,
) -> SimResult:
    """Monte-Carlo estimate of the eventually-always probability.

    A run succeeds when it is inside an accepting bottom component within the
    horizon (bottom membership is the finite certificate for staying forever,
    since bottom components cannot be left).  Deterministic given the seed.
    """
    chain = _plain_chain(chain)
    if runs < 1:
        raise OracleError("runs must be >= 1")
    if horizon is None:
        horizon = 10 * chain.num_states
    comp_accept = [-1] * chain.num_states  # -1 transient, 0 rejecting, 1 accepting
    for members in bottom_components(chain):
        flag = 1 if all(accepting(s) for s in members) else 0
        for s in members:
            comp_accept[s] = flag
    cumulative = []
    for dests, probs in chain.rows:
        cumulative.append((np.asarray(dests), np.cumsum(np.asarray(probs))))
    rng = np.random.default_rng(seed)
    successes = 0
    for _ in range(runs):
        s = chain.initial
        for _ in range(horizon):
            if comp_accept[s] >= 0:
                break
            dests, cum = cumulative[s]
            s = int(dests[int(np.searchsorted(cum, rng.random(), side="right"))])
        if comp_accept[s] == 1:
            successes += 1
    estimate = successes / runs
    half_width = 3.0 * (estimate * (1.0 - estimate) / runs) ** 0.5
    return SimResult(
        runs=runs,
        successes=successes,
        estimate=estimate,
        half_width=half_width,
        seed=seed,
        horizon=horizon,
    )


# ---------------------------------------------------------------------------
# traces


def collapse_trace(trace: Sequence) -> Tuple[frozenset, ...]:
    """Deduplicate consecutive repeats of label sets."""
    out: List[frozenset] = []
    for labels in trace:
        fs = frozenset(labels)
        if not out or out[-1] != fs:
            out.append(fs)
    return tuple(out)


def stutter_equivalent(t1: Sequence, t2: Sequence) -> bool:
    return collapse_trace(t1) == collapse_trace(t2)


def enumerate_finite_paths(chain, max_steps: int) -> Iterator[TraceSample]:
    """All finite paths from the initial state with at most max_steps
    transitions, with exact probabilities."""
    chain = _plain_chain(chain)

    def walk(path: List[int], prob: Fraction) -> Iterator[TraceSample]:
        yield TraceSample(
            path=tuple(path),
            trace=tuple(chain.labels[s] for s in path),
            probability=prob,
        )
        if len(path) - 1 >= max_steps:
            return
        dests, probs = chain.rows[path[-1]]
        for t, p in zip(dests, probs):
            path.append(t)
            yield from walk(path, prob * Fraction(p))
            path.pop()

    yield from walk([chain.initial], Fraction(1))
