"""Parameterized generators for the two bundled case studies.

Both emit a (model document, requirement document) pair in the package's
JSON/DSL interchange formats.  The generators are deterministic functions of
their parameters, and the emitted artifacts always pass model validation and
the persistence-fragment check.

Robot grid world
----------------
A robot on a ``width x height`` grid (1-based coordinates), with state
``(g, h, x, y)``: status g (0 on, 1 sleep, 2 error), battery level h, and
position.  Movement costs one battery unit, or ``1 + obstacle_extra_cost``
on the obstacle branch (probability ``obstacle_prob``) in which case the
robot also fails to move; a move is enabled only when the battery covers its
worst-case branch.  ``sleep``/``error`` freeze the robot in an absorbing
status; an ``idle`` action lets it remain powered at the goal cell, making
the primary persistence objective achievable.  Objectives and switching
thresholds follow the bundled four-objective requirement (reach-and-keep the
goal charged; else sleep at the charger; else sleep in a safe cell; else
signal an error).

MEDA biochip segment
--------------------
A scheduler/droplet abstraction on a ``width x height`` electrode matrix
partitioned into 3x3 blocks.  Two droplets are dispensed with +/-1 positional
noise per axis, then manipulated in rounds: move droplet A, move droplet B,
update, then mix (enabled only when both droplets occupy the same block),
repeat, or exit.  ``flush`` moves both droplets off-chip at once (salvage).
Manipulation failure probabilities grow with the accumulated error count
``e`` as ``p1(e) = min(p1_coeff*(1+e), 1)`` for moves and ``p2`` for flushes;
this package tracks a single segment-wide saturating error counter, and a
failure beyond ``max_errors`` leaves the segment permanently faulted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from .model import build_mdp, serialize_model

Coord = Tuple[int, int]


class CaseStudyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# robot grid world


@dataclass(frozen=True)
class RobotParams:
    width: int = 3
    height: int = 3
    battery: int = 10
    obstacle_prob: float = 0.1
    move_cost: int = 1
    obstacle_extra_cost: int = 1
    charge_threshold: int = 3
    start: Coord = (1, 1)
    goal: Coord = None  # type: ignore[assignment]  # defaults to (width, height)
    charger: Coord = None  # type: ignore[assignment]  # defaults to (width, 1)
    safe_cells: Tuple[Coord, ...] = None  # type: ignore[assignment]  # defaults to ((1, height),)

    def __post_init__(self):
        if self.goal is None:
            object.__setattr__(self, "goal", (self.width, self.height))
        if self.charger is None:
            object.__setattr__(self, "charger", (self.width, 1))
        if self.safe_cells is None:
            object.__setattr__(self, "safe_cells", ((1, self.height),))
        if self.width < 1 or self.height < 1:
            raise CaseStudyError("grid must be at least 1x1")
        if not (0.0 <= self.obstacle_prob <= 1.0):
            raise CaseStudyError("obstacle probability outside [0,1]")
        if self.battery < 0 or self.move_cost < 1 or self.obstacle_extra_cost < 0:
            raise CaseStudyError("battery and costs must be non-negative (move cost >= 1)")
        for cell in (self.start, self.goal, self.charger) + self.safe_cells:
            x, y = cell
            if not (1 <= x <= self.width and 1 <= y <= self.height):
                raise CaseStudyError("cell %r outside the %dx%d grid" % (cell, self.width, self.height))


_DIRS = (("N", 0, 1), ("S", 0, -1), ("E", 1, 0), ("W", -1, 0))


def gen_robot(params: RobotParams = RobotParams()) -> Tuple[str, str]:
    """Emit (model document, requirement document) for the robot grid world."""
    p = params
    states: List[Tuple[int, int, int, int]] = [
        (g, h, x, y)
        for g in (0, 1, 2)
        for h in range(p.battery + 1)
        for x in range(1, p.width + 1)
        for y in range(1, p.height + 1)
    ]
    index = {st: i for i, st in enumerate(states)}
    fail_cost = p.move_cost + p.obstacle_extra_cost

    transitions = []
    labeling: Dict[int, List[str]] = {}
    names: Dict[int, str] = {}
    for st in states:
        g, h, x, y = st
        i = index[st]
        names[i] = "g%d_h%d_x%d_y%d" % st
        labels = []
        labels.append(("on", "sleep", "error")[g])
        if (x, y) == p.goal:
            labels.append("goal")
        if (x, y) == p.charger:
            labels.append("chrg")
        if (x, y) in p.safe_cells:
            labels.append("safe")
        if h > p.charge_threshold:
            labels.append("h>3")
        labeling[i] = labels

        if g == 1:
            transitions.append((i, "sleep", [(i, 1.0)]))
            continue
        if g == 2:
            transitions.append((i, "error", [(i, 1.0)]))
            continue
        for name, dx, dy in _DIRS:
            nx, ny = x + dx, y + dy
            if not (1 <= nx <= p.width and 1 <= ny <= p.height):
                continue
            if h < fail_cost:
                continue
            moved = index[(0, h - p.move_cost, nx, ny)]
            stuck = index[(0, h - fail_cost, x, y)]
            if p.obstacle_prob == 0.0:
                transitions.append((i, name, [(moved, 1.0)]))
            elif p.obstacle_prob == 1.0:
                transitions.append((i, name, [(stuck, 1.0)]))
            else:
                transitions.append(
                    (i, name, [(moved, 1.0 - p.obstacle_prob), (stuck, p.obstacle_prob)])
                )
        transitions.append((i, "sleep", [(index[(1, h, x, y)], 1.0)]))
        transitions.append((i, "error", [(index[(2, h, x, y)], 1.0)]))
        if (x, y) == p.goal:
            transitions.append((i, "idle", [(i, 1.0)]))

    mdp = build_mdp(
        num_states=len(states),
        transitions=transitions,
        initial=index[(0, p.battery, p.start[0], p.start[1])],
        atomic_props=["on", "sleep", "error", "goal", "chrg", "safe", "h>3"],
        labeling=labeling,
        state_names=names,
    )
    requirement = "\n".join(
        [
            'objective q0 = Pmax [ F G "goal" & "h>3" & "on" ];',
            'objective q1 = Pmax [ F G "chrg" & "h>3" & "sleep" ];',
            'objective q2 = Pmax [ F G "safe" & "sleep" ];',
            'objective q3 = Pmax [ F G "error" ];',
            "context w01 : q0 -> q1 when Pmax in [0.75, 0.85);",
            "context w02 : q0 -> q2 when Pmax < 0.75;",
            "context w13 : q1 -> q3 when Pmax < 0.7;",
            "context w23 : q2 -> q3 when Pmax < 0.8;",
            "initial q0;",
        ]
    ) + "\n"
    return serialize_model(mdp), requirement


# ---------------------------------------------------------------------------
# MEDA biochip segment


@dataclass(frozen=True)
class MedaParams:
    width: int = 8
    height: int = 5
    max_errors: int = 2
    p1_coeff: float = 0.05
    p2_coeff: float = 0.08
    dispenser_a: Coord = (1, 1)
    dispenser_b: Coord = None  # type: ignore[assignment]  # defaults to (width-2, height-2)

    BLOCK: int = field(default=3, init=False)  # electrode block edge, fixed

    def __post_init__(self):
        if self.dispenser_b is None:
            object.__setattr__(self, "dispenser_b", (self.width - 2, self.height - 2))
        if self.width < self.BLOCK or self.height < self.BLOCK:
            raise CaseStudyError("segment must be at least %dx%d" % (self.BLOCK, self.BLOCK))
        if self.max_errors < 0:
            raise CaseStudyError("max_errors must be non-negative")
        for coeff in (self.p1_coeff, self.p2_coeff):
            if not (0.0 < coeff <= 1.0):
                raise CaseStudyError("error-growth coefficients must lie in (0,1]")
        for cell in (self.dispenser_a, self.dispenser_b):
            x, y = cell
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise CaseStudyError("dispenser %r outside the segment" % (cell,))

    def p1(self, e: int) -> float:
        return min(self.p1_coeff * (1 + e), 1.0)

    def p2(self, e: int) -> float:
        return min(self.p2_coeff * (1 + e), 1.0)

    def block(self, cell: Coord) -> Coord:
        return (cell[0] // self.BLOCK, cell[1] // self.BLOCK)


# state tuples: (phase, ax, ay, bx, by, e); coordinates -1 when the droplets
# are off-chip (or meaningless, in the terminal states)
_M_START = (0, -1, -1, -1, -1, 0)
_M_MIXED = (5, -1, -1, -1, -1, 0)
_M_SALVAGED = (6, -1, -1, -1, -1, 0)
_M_ABORTED = (7, -1, -1, -1, -1, 0)
_M_FAULTED = (8, -1, -1, -1, -1, 0)
_M_TERMINAL_NAMES = {5: "mixed", 6: "salvaged", 7: "aborted", 8: "faulted"}


def _meda_successors(p: MedaParams, st) -> List[Tuple[str, List[Tuple[tuple, float]]]]:
    phase, ax, ay, bx, by, e = st
    if phase in _M_TERMINAL_NAMES:
        return [("stay", [(st, 1.0)])]
    out: List[Tuple[str, List[Tuple[tuple, float]]]] = []
    if phase == 0:
        branches: Dict[tuple, float] = {}
        for dxa in (-1, 0, 1):
            for dya in (-1, 0, 1):
                for dxb in (-1, 0, 1):
                    for dyb in (-1, 0, 1):
                        nax = min(max(p.dispenser_a[0] + dxa, 0), p.width - 1)
                        nay = min(max(p.dispenser_a[1] + dya, 0), p.height - 1)
                        nbx = min(max(p.dispenser_b[0] + dxb, 0), p.width - 1)
                        nby = min(max(p.dispenser_b[1] + dyb, 0), p.height - 1)
                        dest = (1, nax, nay, nbx, nby, 0)
                        branches[dest] = branches.get(dest, 0.0) + 1.0 / 81.0
        out.append(("dispense", sorted(branches.items())))
        out.append(("abort", [(_M_ABORTED, 1.0)]))
        return out

    absent = ax < 0
    fail_dest = (
        (phase + 1, ax, ay, bx, by, e + 1) if e < p.max_errors else _M_FAULTED
    )
    if phase == 1:
        for name, dx, dy in _DIRS:
            nx, ny = ax + dx, ay + dy
            if not (0 <= nx < p.width and 0 <= ny < p.height):
                continue
            ok = (2, nx, ny, bx, by, e)
            out.append(
                ("mvA_%s" % name, [(ok, 1.0 - p.p1(e)), (fail_dest, p.p1(e))])
            )
        flush_fail = (3, ax, ay, bx, by, e + 1) if e < p.max_errors else _M_FAULTED
        out.append(
            ("flush", [((3, -1, -1, -1, -1, e), 1.0 - p.p2(e)), (flush_fail, p.p2(e))])
        )
        out.append(("abort", [(_M_ABORTED, 1.0)]))
    elif phase == 2:
        for name, dx, dy in _DIRS:
            nx, ny = bx + dx, by + dy
            if not (0 <= nx < p.width and 0 <= ny < p.height):
                continue
            ok = (3, ax, ay, nx, ny, e)
            out.append(
                ("mvB_%s" % name, [(ok, 1.0 - p.p1(e)), (fail_dest, p.p1(e))])
            )
    elif phase == 3:
        out.append(("update", [((4, ax, ay, bx, by, e), 1.0)]))
    elif phase == 4:
        if absent:
            out.append(("exit", [(_M_SALVAGED, 1.0)]))
        else:
            if p.block((ax, ay)) == p.block((bx, by)):
                out.append(("mix", [(_M_MIXED, 1.0)]))
            out.append(("repeat", [((1, ax, ay, bx, by, e), 1.0)]))
    # extreme coefficients can zero out a branch; drop it so distributions
    # keep only positive entries
    return [
        (action, [(dest, pr) for dest, pr in branches if pr > 0.0])
        for action, branches in out
    ]


def gen_meda(params: MedaParams = MedaParams()) -> Tuple[str, str]:
    """Emit (model document, requirement document) for the biochip segment."""
    p = params
    # breadth-first closure over the successor relation
    discovered = {_M_START}
    frontier = [_M_START]
    succ_cache: Dict[tuple, list] = {}
    while frontier:
        st = frontier.pop()
        succs = _meda_successors(p, st)
        succ_cache[st] = succs
        for _, branches in succs:
            for dest, _ in branches:
                if dest not in discovered:
                    discovered.add(dest)
                    frontier.append(dest)
    states = sorted(discovered)
    index = {st: i for i, st in enumerate(states)}

    transitions = []
    labeling: Dict[int, List[str]] = {}
    names: Dict[int, str] = {}
    for st in states:
        i = index[st]
        phase = st[0]
        if phase in _M_TERMINAL_NAMES:
            names[i] = _M_TERMINAL_NAMES[phase]
            if phase != 8:
                labeling[i] = [_M_TERMINAL_NAMES[phase]]
        elif phase == 0:
            names[i] = "start"
        elif st[1] < 0:
            names[i] = "p%d_absent_e%d" % (phase, st[5])
        else:
            names[i] = "p%d_a%d_%d_b%d_%d_e%d" % st
        for action, branches in succ_cache[st]:
            transitions.append(
                (i, action, [(index[dest], prob) for dest, prob in branches])
            )

    mdp = build_mdp(
        num_states=len(states),
        transitions=transitions,
        initial=index[_M_START],
        atomic_props=["mixed", "salvaged", "aborted"],
        labeling=labeling,
        state_names=names,
    )
    requirement = "\n".join(
        [
            'objective q0 = Pmax [ F G "mixed" ];',
            'objective q1 = Pmax [ F G "salvaged" ];',
            'objective q2 = Pmax [ F G "aborted" ];',
            "context w01 : q0 -> q1 when Pmax in [0.7, 0.85);",
            "context w02 : q0 -> q2 when Pmax < 0.7;",
            "context w12 : q1 -> q2 when Pmax < 0.7;",
            "initial q0;",
        ]
    ) + "\n"
    return serialize_model(mdp), requirement
