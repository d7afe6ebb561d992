"""Seeded random instance builders shared across the test suite.

Branch probabilities are dyadic (k/8), so they are exact in binary floating
point and cheap for the rational oracle; distributions sum to exactly 1.0.
"""

from __future__ import annotations

import random
from typing import List, Optional, Sequence, Tuple

from captl.formulas import And, Atom, Interval, Not, Or, Top
from captl.model import Mdp, build_mdp
from captl.requirement import CaptlRequirement, parse_requirement


def split_weights(rng: random.Random, parts: int, total: int = 8) -> List[int]:
    cuts = sorted(rng.sample(range(1, total), parts - 1)) if parts > 1 else []
    bounds = [0] + cuts + [total]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def random_mdp(
    rng: random.Random,
    num_states: int = 8,
    max_actions: int = 2,
    num_props: int = 2,
    deadlock_prob: float = 0.1,
    absorbing_leak: int = 0,
) -> Mdp:
    """A random MDP over propositions p0..p{k-1}.

    With ``absorbing_leak`` w > 0, every choice routes at least w/8 of its
    mass to one of the two absorbing tail states, which keeps value iteration
    strongly contracting (used by tolerance-sensitive suites).  The two tail
    states are always absorbing self-loopers.
    """
    n = max(3, num_states)
    sinks = [n - 2, n - 1]
    transitions = []
    actions = ["a", "b", "c"][:max_actions]
    for s in range(n):
        if s in sinks:
            transitions.append((s, "a", [(s, 1.0)]))
            continue
        if rng.random() < deadlock_prob and s != 0:
            continue  # deadlock state
        for a in actions[: rng.randint(1, max_actions)]:
            branches: List[Tuple[int, float]] = []
            if absorbing_leak > 0:
                leak = rng.randint(absorbing_leak, 7)
                branches.append((rng.choice(sinks), leak / 8.0))
                rest = 8 - leak
            else:
                rest = 8
            if rest > 0:
                parts = split_weights(rng, rng.randint(1, min(3, rest)), rest)
                targets = rng.sample(range(n), len(parts))
                for t, w in zip(targets, parts):
                    branches.append((t, w / 8.0))
            merged = {}
            for t, p in branches:
                merged[t] = merged.get(t, 0.0) + p
            transitions.append((s, a, sorted(merged.items())))
    labeling = {}
    props = ["p%d" % i for i in range(num_props)]
    for s in range(n):
        labeling[s] = [p for p in props if rng.random() < 0.4]
    # make sure at least one state carries each proposition
    for i, p in enumerate(props):
        s = rng.randrange(n)
        labeling[s] = sorted(set(labeling[s]) | {p})
    return build_mdp(
        num_states=n,
        transitions=transitions,
        initial=0,
        atomic_props=props,
        labeling=labeling,
    )


def random_formula(rng: random.Random, props: Sequence[str], depth: int = 2):
    if depth == 0 or rng.random() < 0.4:
        if rng.random() < 0.1:
            return Top()
        return Atom(rng.choice(list(props)))
    op = rng.choice(["and", "or", "not"])
    if op == "not":
        return Not(random_formula(rng, props, depth - 1))
    left = random_formula(rng, props, depth - 1)
    right = random_formula(rng, props, depth - 1)
    return And(left, right) if op == "and" else Or(left, right)


def random_interval_chain(rng: random.Random, parts: int) -> List[Interval]:
    """Disjoint intervals whose union is [0, c), split at dyadic cut points."""
    cuts = sorted(rng.sample([k / 16.0 for k in range(1, 16)], parts))
    intervals = []
    lo = 0.0
    for hi in cuts:
        intervals.append(Interval(lo, hi, False, True))
        lo = hi
    return intervals


def random_persistence_requirement(
    rng: random.Random,
    props: Sequence[str],
    num_objectives: int = 3,
) -> CaptlRequirement:
    """A valid persistence requirement: an acyclic objective graph whose
    per-objective context intervals partition some [0, c)."""
    ids = ["q%d" % i for i in range(num_objectives)]
    lines = []
    for q in ids:
        body = random_formula(rng, props, depth=rng.randint(0, 2))
        lines.append("objective %s = Pmax [ F G %s ];" % (q, body.to_text()))
    ctx = 0
    for i, q in enumerate(ids[:-1]):
        fanout = rng.randint(0, min(2, num_objectives - 1 - i))
        if fanout == 0:
            continue
        targets = rng.sample(ids[i + 1 :], fanout)
        for target, interval in zip(targets, random_interval_chain(rng, fanout)):
            lines.append(
                "context w%d : %s -> %s when Pmax %s;" % (ctx, q, target, interval.to_text())
            )
            ctx += 1
    lines.append("initial q0;")
    return parse_requirement("\n".join(lines) + "\n")


def random_general_requirement_text(rng: random.Random, props: Sequence[str]) -> str:
    """Arbitrary (possibly non-persistence) requirement text for round trips."""
    n = rng.randint(1, 4)
    ids = ["q%d" % i for i in range(n)]
    lines = []
    for q in ids:
        direction = rng.choice(["Pmax", "Pmin"])
        kind = rng.choice(["F", "F G"])
        body = random_formula(rng, props, depth=rng.randint(0, 3))
        lines.append("objective %s = %s [ %s %s ];" % (q, direction, kind, body.to_text()))
    ctx = 0
    for i, q in enumerate(ids[:-1]):
        for _ in range(rng.randint(0, 2)):
            target = rng.choice(ids[i + 1 :])
            style = rng.random()
            if style < 0.3:
                bound = "< %s" % repr(rng.choice([k / 16.0 for k in range(1, 17)]))
            elif style < 0.45:
                bound = "<= %s" % repr(rng.choice([k / 16.0 for k in range(1, 17)]))
            else:
                lo, hi = sorted(rng.sample([k / 16.0 for k in range(0, 17)], 2))
                left = rng.choice("[(")
                right = rng.choice(")]")
                bound = "in %s%s, %s%s" % (left, repr(lo), repr(hi), right)
            lines.append("context w%d : %s -> %s when Pmax %s;" % (ctx, q, target, bound))
            ctx += 1
    lines.append("initial %s;" % rng.choice(ids))
    return "\n".join(lines) + "\n"


def random_model_document(rng: random.Random) -> str:
    """A canonical-form model document (transitions grouped by state)."""
    from captl.model import serialize_model

    mdp = random_mdp(
        rng,
        num_states=rng.randint(3, 10),
        max_actions=rng.randint(1, 3),
        num_props=rng.randint(1, 3),
        deadlock_prob=0.2,
    )
    return serialize_model(mdp)


def b_states_of(mdp: Mdp, prop: str = "p0") -> List[int]:
    return [s for s in range(mdp.num_states) if prop in mdp.labeling[s]]
