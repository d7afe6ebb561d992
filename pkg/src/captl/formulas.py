"""Propositional state formulas and probability intervals.

State formulas are boolean combinations of atomic propositions evaluated
against a state's label set.  Intervals carry open/closed endpoint kinds and
are used to bound quantitative queries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Iterator


class StateFormula:
    """Base class for propositional state formulas."""

    def holds(self, labels: FrozenSet[str]) -> bool:
        raise NotImplementedError

    def atoms(self) -> Iterator[str]:
        """Yield every proposition name used in the formula."""
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class Top(StateFormula):
    def holds(self, labels):
        return True

    def atoms(self):
        return iter(())

    def to_text(self):
        return "true"


@dataclass(frozen=True)
class Atom(StateFormula):
    name: str

    def holds(self, labels):
        return self.name in labels

    def atoms(self):
        yield self.name

    def to_text(self):
        return '"%s"' % self.name


@dataclass(frozen=True)
class Not(StateFormula):
    operand: StateFormula

    def holds(self, labels):
        return not self.operand.holds(labels)

    def atoms(self):
        return self.operand.atoms()

    def to_text(self):
        inner = self.operand.to_text()
        if isinstance(self.operand, (And, Or)):
            inner = "(%s)" % inner
        return "!%s" % inner


@dataclass(frozen=True)
class And(StateFormula):
    left: StateFormula
    right: StateFormula

    def holds(self, labels):
        return self.left.holds(labels) and self.right.holds(labels)

    def atoms(self):
        yield from self.left.atoms()
        yield from self.right.atoms()

    def to_text(self):
        parts = []
        for side in (self.left, self.right):
            text = side.to_text()
            if isinstance(side, Or):
                text = "(%s)" % text
            parts.append(text)
        return "%s & %s" % tuple(parts)


@dataclass(frozen=True)
class Or(StateFormula):
    left: StateFormula
    right: StateFormula

    def holds(self, labels):
        return self.left.holds(labels) or self.right.holds(labels)

    def atoms(self):
        yield from self.left.atoms()
        yield from self.right.atoms()

    def to_text(self):
        return "%s | %s" % (self.left.to_text(), self.right.to_text())


@dataclass(frozen=True)
class Interval:
    """Sub-interval of [0,1] with individually open or closed endpoints."""

    lo: float
    hi: float
    lo_strict: bool = False
    hi_strict: bool = True

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(
                "interval endpoints must satisfy 0 <= lo <= hi <= 1, got [%r, %r]"
                % (self.lo, self.hi)
            )
        if self.is_empty():
            raise ValueError("interval %s is empty" % self.to_text())

    def is_empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return self.lo_strict or self.hi_strict

    def contains(self, x: float) -> bool:
        above = x > self.lo if self.lo_strict else x >= self.lo
        below = x < self.hi if self.hi_strict else x <= self.hi
        return above and below

    def to_text(self) -> str:
        # `< c` and `<= c` are shorthand for a zero-based interval.
        if self.lo == 0.0 and not self.lo_strict:
            return ("< %s" if self.hi_strict else "<= %s") % repr(self.hi)
        left = "(" if self.lo_strict else "["
        right = ")" if self.hi_strict else "]"
        return "in %s%s, %s%s" % (left, repr(self.lo), repr(self.hi), right)

    def __str__(self) -> str:
        return self.to_text()
