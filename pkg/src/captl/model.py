"""Explicit-state MDP data model, validation, reachability and JSON format.

States are dense integer indices ``0..n-1``.  Each (state, action) pair owns at
most one probability distribution over successors; distributions must sum to 1
(within ``PROB_TOL``).  A state with no enabled action at all is a legal
deadlock: it is reported as a validation warning and treated as absorbing by
every analysis in this package (probability mass stays put forever).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

PROB_TOL = 1e-9

# A StateSet is a sorted tuple of state indices; sorting keeps every
# iteration in the package deterministic.
StateSet = Tuple[int, ...]


class ModelError(Exception):
    """Base class for model format and validation problems."""


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        loc = ""
        if line is not None:
            loc = "line %d" % line
            if column is not None:
                loc += ", column %d" % column
            loc += ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column


class ModelSemanticsError(ModelError):
    pass


@dataclass(frozen=True)
class Choice:
    """One enabled (state, action) pair with its successor distribution."""

    state: int
    action: int
    dests: Tuple[int, ...]
    probs: Tuple[float, ...]


@dataclass(frozen=True)
class Mdp:
    num_states: int
    actions: Tuple[str, ...]
    choices: Tuple[Choice, ...]
    initial: int
    atomic_props: Tuple[str, ...]
    labeling: Tuple[frozenset, ...]
    state_names: Optional[Tuple[Optional[str], ...]] = None
    validation_warnings: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        _validate_mdp(self)
        warnings = tuple(
            "state %d is a deadlock (no enabled action); treated as absorbing" % s
            for s in range(self.num_states)
            if not self._choice_ids[s]
        )
        object.__setattr__(self, "validation_warnings", warnings)

    # -- indexing helpers --------------------------------------------------

    @cached_property
    def _choice_ids(self) -> Tuple[Tuple[int, ...], ...]:
        per_state: List[List[int]] = [[] for _ in range(self.num_states)]
        for idx, ch in enumerate(self.choices):
            per_state[ch.state].append(idx)
        return tuple(tuple(ids) for ids in per_state)

    @cached_property
    def action_index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.actions)}

    def choices_of(self, s: int) -> Tuple[Choice, ...]:
        return tuple(self.choices[i] for i in self._choice_ids[s])

    def enabled_actions(self, s: int) -> Tuple[int, ...]:
        return tuple(self.choices[i].action for i in self._choice_ids[s])

    def choice(self, s: int, action: str) -> Optional[Choice]:
        a = self.action_index.get(action)
        if a is None:
            return None
        for i in self._choice_ids[s]:
            if self.choices[i].action == a:
                return self.choices[i]
        return None

    def is_deadlock(self, s: int) -> bool:
        return not self._choice_ids[s]

    def labels_of(self, s: int) -> frozenset:
        return self.labeling[s]

    def display_name(self, s: int) -> str:
        if self.state_names and self.state_names[s]:
            return self.state_names[s]
        return str(s)

    @cached_property
    def solver_arrays(self):
        """Flat CSR-style arrays consumed by the numeric kernels.

        Returns (state_ptr, choice_ptr, cols, probs): choices are grouped by
        state in declaration-index order; branch data is flattened.
        """
        state_ptr = np.zeros(self.num_states + 1, dtype=np.int64)
        choice_ptr = np.zeros(len(self.choices) + 1, dtype=np.int64)
        cols: List[int] = []
        k = 0
        for s in range(self.num_states):
            state_ptr[s + 1] = state_ptr[s] + len(self._choice_ids[s])
        probs: List[float] = []
        flat_choices = [self.choices[i] for s in range(self.num_states) for i in self._choice_ids[s]]
        for c, ch in enumerate(flat_choices):
            cols.extend(ch.dests)
            probs.extend(ch.probs)
            k += len(ch.dests)
            choice_ptr[c + 1] = k
        return (
            state_ptr,
            choice_ptr,
            np.asarray(cols, dtype=np.int64),
            np.asarray(probs, dtype=np.float64),
        )


def _validate_mdp(mdp: Mdp) -> None:
    n = mdp.num_states
    if n <= 0:
        raise ModelSemanticsError("model must have at least one state")
    if not (0 <= mdp.initial < n):
        raise ModelSemanticsError("initial state %d does not exist" % mdp.initial)
    if len(mdp.labeling) != n:
        raise ModelSemanticsError("labeling must cover every state")
    props = set(mdp.atomic_props)
    if len(mdp.atomic_props) != len(props):
        raise ModelSemanticsError("duplicate atomic proposition declared")
    for s, labels in enumerate(mdp.labeling):
        unknown = labels - props
        if unknown:
            raise ModelSemanticsError(
                "state %d labeled with undeclared proposition %r" % (s, sorted(unknown)[0])
            )
    seen = set()
    prev_key = None
    for ch in mdp.choices:
        if not (0 <= ch.state < n):
            raise ModelSemanticsError("transition from unknown state %d" % ch.state)
        if not (0 <= ch.action < len(mdp.actions)):
            raise ModelSemanticsError("transition with unknown action index %d" % ch.action)
        key = (ch.state, ch.action)
        if key in seen:
            raise ModelSemanticsError(
                "duplicate transition entry for state %d action %r"
                % (ch.state, mdp.actions[ch.action])
            )
        seen.add(key)
        if prev_key is not None and key < prev_key:
            raise ModelSemanticsError("choices must be sorted by (state, action index)")
        prev_key = key
        if not ch.dests:
            raise ModelSemanticsError(
                "empty distribution for state %d action %r" % (ch.state, mdp.actions[ch.action])
            )
        if len(set(ch.dests)) != len(ch.dests):
            raise ModelSemanticsError(
                "duplicate branch target in state %d action %r"
                % (ch.state, mdp.actions[ch.action])
            )
        if any(ch.dests[i] > ch.dests[i + 1] for i in range(len(ch.dests) - 1)):
            raise ModelSemanticsError("branches must be sorted by target state")
        for t, p in zip(ch.dests, ch.probs):
            if not (0 <= t < n):
                raise ModelSemanticsError("transition to unknown state %d" % t)
            if not (p > 0.0 and p <= 1.0):
                raise ModelSemanticsError(
                    "transition probability %r of state %d action %r outside (0, 1]"
                    % (p, ch.state, mdp.actions[ch.action])
                )
        total = sum(ch.probs)
        if abs(total - 1.0) > PROB_TOL:
            raise ModelSemanticsError(
                "state %d action %r: distribution sum %.10g ∉ {0,1}"
                % (ch.state, mdp.actions[ch.action], total)
            )


def build_mdp(
    num_states: int,
    transitions: Iterable[Tuple[int, str, Sequence[Tuple[int, float]]]],
    initial: int = 0,
    atomic_props: Sequence[str] = (),
    labeling: Optional[Dict[int, Iterable[str]]] = None,
    state_names: Optional[Dict[int, str]] = None,
    actions: Optional[Sequence[str]] = None,
) -> Mdp:
    """Construct a validated Mdp from (state, action name, branches) triples.

    Action names are assigned declaration indices in order of first
    appearance unless an explicit ``actions`` table is given.  Branches are
    canonicalized: sorted by target and merged if a target repeats is an
    error (callers merge beforehand).
    """
    table: List[str] = list(actions) if actions else []
    index = {name: i for i, name in enumerate(table)}
    rows = []
    for state, action, branches in transitions:
        if action not in index:
            index[action] = len(table)
            table.append(action)
        dests = tuple(t for t, _ in branches)
        probs = tuple(p for _, p in branches)
        order = sorted(range(len(dests)), key=lambda i: dests[i])
        rows.append(
            Choice(
                state=state,
                action=index[action],
                dests=tuple(dests[i] for i in order),
                probs=tuple(probs[i] for i in order),
            )
        )
    rows.sort(key=lambda ch: (ch.state, ch.action))
    labels = tuple(
        frozenset(labeling.get(s, ())) if labeling else frozenset() for s in range(num_states)
    )
    names = None
    if state_names:
        names = tuple(state_names.get(s) for s in range(num_states))
    return Mdp(
        num_states=num_states,
        actions=tuple(table),
        choices=tuple(rows),
        initial=initial,
        atomic_props=tuple(sorted(set(atomic_props))),
        labeling=labels,
        state_names=names,
    )


# -- operations -------------------------------------------------------------


def _check_state(mdp: Mdp, s: int) -> None:
    if not (0 <= s < mdp.num_states):
        raise ModelError("state index %d outside 0..%d" % (s, mdp.num_states - 1))


def reach(mdp: Mdp, s: int) -> StateSet:
    """All states reachable from s under any strategy (includes s)."""
    _check_state(mdp, s)
    seen = {s}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for ch in mdp.choices_of(u):
            for t in ch.dests:
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
    return tuple(sorted(seen))


def post(mdp: Mdp, s: int, action: str) -> StateSet:
    """Successors of s under the named action; empty if the action is disabled."""
    _check_state(mdp, s)
    ch = mdp.choice(s, action)
    if ch is None:
        return ()
    return tuple(sorted(set(ch.dests)))


def cardinality(mdp: Mdp) -> Tuple[int, int, int]:
    """(num_states, num_nonzero_transitions, num_choices)."""
    nnz = sum(len(ch.dests) for ch in mdp.choices)
    return (mdp.num_states, nnz, len(mdp.choices))


# -- interchange format ------------------------------------------------------


def parse_model(text: str) -> Mdp:
    """Parse the JSON model format into a validated Mdp."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise ModelSemanticsError("model document must be a JSON object")
    for key in ("states", "init", "props", "labels", "transitions"):
        if key not in doc:
            raise ModelSemanticsError("missing required key %r" % key)
    num_states = doc["states"]
    if not isinstance(num_states, int) or num_states <= 0:
        raise ModelSemanticsError("'states' must be a positive integer")
    if not isinstance(doc["init"], int):
        raise ModelSemanticsError("'init' must be an integer state index")
    props = doc["props"]
    if not isinstance(props, list) or not all(isinstance(p, str) for p in props):
        raise ModelSemanticsError("'props' must be a list of strings")

    def state_keyed(mapping, what):
        out = {}
        if not isinstance(mapping, dict):
            raise ModelSemanticsError("'%s' must be an object keyed by state index" % what)
        for key, value in mapping.items():
            try:
                s = int(key)
            except ValueError:
                raise ModelSemanticsError("non-integer state key %r in '%s'" % (key, what))
            out[s] = value
        return out

    labeling = state_keyed(doc["labels"], "labels")
    names = state_keyed(doc.get("names", {}), "names") or None
    for what, mapping in (("labels", labeling), ("names", names or {})):
        for s in mapping:
            if not (0 <= s < num_states):
                raise ModelSemanticsError("'%s' refers to unknown state %d" % (what, s))
    transitions = []
    if not isinstance(doc["transitions"], list):
        raise ModelSemanticsError("'transitions' must be a list")
    for i, entry in enumerate(doc["transitions"]):
        if not isinstance(entry, dict):
            raise ModelSemanticsError("transitions[%d] must be an object" % i)
        for key in ("from", "action", "branches"):
            if key not in entry:
                raise ModelSemanticsError("transitions[%d] missing key %r" % (i, key))
        branches = []
        for br in entry["branches"]:
            if not isinstance(br, dict) or "to" not in br or "prob" not in br:
                raise ModelSemanticsError(
                    "transitions[%d] branches must be objects with 'to' and 'prob'" % i
                )
            branches.append((br["to"], float(br["prob"])))
        transitions.append((entry["from"], entry["action"], branches))
    return build_mdp(
        num_states=num_states,
        transitions=transitions,
        initial=doc["init"],
        atomic_props=props,
        labeling=labeling,
        state_names=names,
    )


def serialize_model(mdp: Mdp) -> str:
    """Serialize to the canonical JSON form (parse ∘ serialize is identity)."""
    doc = {
        "states": mdp.num_states,
        "init": mdp.initial,
        "props": list(mdp.atomic_props),
        "labels": {
            str(s): sorted(mdp.labeling[s]) for s in range(mdp.num_states) if mdp.labeling[s]
        },
    }
    if mdp.state_names and any(mdp.state_names):
        doc["names"] = {
            str(s): name for s, name in enumerate(mdp.state_names) if name is not None
        }
    doc["transitions"] = [
        {
            "from": ch.state,
            "action": mdp.actions[ch.action],
            "branches": [
                {"to": t, "prob": p} for t, p in zip(ch.dests, ch.probs)
            ],
        }
        for ch in mdp.choices
    ]
    return json.dumps(doc, indent=1)
