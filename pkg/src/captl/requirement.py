"""Requirement data model and DSL.

A requirement is a directed acyclic graph of optimization objectives
connected by interval-guarded switching contexts, with a designated initial
objective.  The concrete syntax:

    objective q0 = Pmax [ F G "goal" & "h>3" & "on" ];
    context w01 : q0 -> q1 when Pmax in [0.75, 0.85);
    context w02 : q0 -> q2 when Pmax < 0.75;
    initial q0;

``F`` is eventually, ``F G`` eventually-always; a context's bound applies to
its source objective's own path formula.  ``//`` starts a line comment.
Operator precedence in state formulas: ``!`` > ``&`` > ``|``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .formulas import And, Atom, Interval, Not, Or, StateFormula, Top


class RequirementError(Exception):
    pass


class RequirementSyntaxError(RequirementError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__("line %d, column %d: %s" % (line, column, message))
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Objective:
    """A quantitative optimization query: Pmax/Pmin over F or FG of a state
    formula.  For persistence objectives the formula is the set B."""

    id: str
    direction: str  # "max" | "min"
    kind: str  # "F" | "FG"
    formula: StateFormula

    def path_text(self) -> str:
        op = "F" if self.kind == "F" else "F G"
        return "%s %s" % (op, self.formula.to_text())


@dataclass(frozen=True)
class Context:
    """An interval-guarded edge between objectives.

    The bound applies to the source objective's own formula (kind/formula are
    copies of the source objective's, recorded so that programmatically
    constructed requirements can be checked for conformance).
    """

    id: str
    source: str
    target: str
    kind: str
    formula: StateFormula
    interval: Interval


@dataclass(frozen=True)
class CaptlRequirement:
    objectives: Tuple[Objective, ...]
    contexts: Tuple[Context, ...]
    initial: str

    def objective(self, q: str) -> Objective:
        for obj in self.objectives:
            if obj.id == q:
                return obj
        raise RequirementError("unknown objective %r" % q)

    def objective_ids(self) -> Tuple[str, ...]:
        return tuple(o.id for o in self.objectives)

    def edges(self) -> Tuple[Tuple[str, str, str], ...]:
        """The switching relation as (source, context id, target) triples."""
        return tuple((c.source, c.id, c.target) for c in self.contexts)


def contexts_of(req: CaptlRequirement, q: str) -> List[Context]:
    """Contexts emerging from objective q, in declaration order."""
    req.objective(q)
    return [c for c in req.contexts if c.source == q]


# ---------------------------------------------------------------------------
# validation


def validate_requirement(req: CaptlRequirement) -> None:
    """Structural validation; raises RequirementError on the first problem."""
    ids = [o.id for o in req.objectives]
    if not ids:
        raise RequirementError("requirement declares no objectives")
    if len(set(ids)) != len(ids):
        raise RequirementError("duplicate objective id")
    cids = [c.id for c in req.contexts]
    if len(set(cids)) != len(cids):
        raise RequirementError("duplicate context id")
    known = set(ids)
    for c in req.contexts:
        if c.source not in known:
            raise RequirementError("context %s: unknown objective %r" % (c.id, c.source))
        if c.target not in known:
            raise RequirementError("context %s: unknown objective %r" % (c.id, c.target))
        if c.source == c.target:
            raise RequirementError("context %s: source equals target" % c.id)
    if req.initial not in known:
        raise RequirementError("initial objective %r is not declared" % req.initial)
    # acyclicity via Kahn's algorithm
    out: Dict[str, List[str]] = {q: [] for q in ids}
    indeg = {q: 0 for q in ids}
    for c in req.contexts:
        out[c.source].append(c.target)
        indeg[c.target] += 1
    queue = [q for q in ids if indeg[q] == 0]
    seen = 0
    while queue:
        q = queue.pop()
        seen += 1
        for t in out[q]:
            indeg[t] -= 1
            if indeg[t] == 0:
                queue.append(t)
    if seen != len(ids):
        raise RequirementError("objective graph is cyclic")


def validate_persistence(req: CaptlRequirement) -> List[str]:
    """Check conformance to the persistence fragment; violations as data.

    Requires every objective to be Pmax over eventually-always, every context
    to bound its source objective's formula, and each objective's context
    intervals to be pairwise disjoint with union exactly [0, c) for some
    0 < c <= 1.
    """
    violations: List[str] = []
    for obj in req.objectives:
        if obj.direction != "max" or obj.kind != "FG":
            violations.append(
                "objective %s: not of the form Pmax [ F G B ]" % obj.id
            )
    for c in req.contexts:
        src = req.objective(c.source)
        if (c.kind, c.formula) != (src.kind, src.formula):
            violations.append(
                "context %s: does not bound its source objective's formula" % c.id
            )
    for obj in req.objectives:
        ctxs = contexts_of(req, obj.id)
        if not ctxs:
            continue
        ordered = sorted(ctxs, key=lambda c: (c.interval.lo, c.interval.lo_strict))
        overlap = False
        for prev, nxt in zip(ordered, ordered[1:]):
            a, b = prev.interval, nxt.interval
            if b.lo < a.hi or (b.lo == a.hi and not a.hi_strict and not b.lo_strict):
                violations.append(
                    "objective %s: context intervals overlap (%s, %s)"
                    % (obj.id, prev.id, nxt.id)
                )
                overlap = True
        if overlap:
            continue
        first = ordered[0].interval
        ok = first.lo == 0.0 and not first.lo_strict
        for prev, nxt in zip(ordered, ordered[1:]):
            a, b = prev.interval, nxt.interval
            if a.hi != b.lo or a.hi_strict == b.lo_strict:
                ok = False
        if not ordered[-1].interval.hi_strict:
            ok = False
        if not ok:
            violations.append(
                "objective %s: context interval union is not of the form [0,c)" % obj.id
            )
    return violations


# ---------------------------------------------------------------------------
# lexer


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<arrow>->)
  | (?P<le><=)
  | (?P<punct>[=:;\[\](),<&|!])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    type: str
    value: str
    line: int
    column: int


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise RequirementSyntaxError(
                "unexpected character %r" % text[pos], line, pos - line_start + 1
            )
        kind = m.lastgroup
        value = m.group()
        col = pos - line_start + 1
        if kind not in ("ws", "comment"):
            ttype = kind if kind in ("num", "id", "string") else "punct"
            if kind == "arrow":
                ttype = "punct"
                value = "->"
            if kind == "le":
                ttype = "punct"
                value = "<="
            tokens.append(_Token(ttype, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: List[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str) -> None:
        tok = self.peek()
        raise RequirementSyntaxError(message, tok.line, tok.column)

    def expect_punct(self, value: str) -> None:
        tok = self.peek()
        if tok.type != "punct" or tok.value != value:
            self.fail("expected %r" % value)
        self.next()

    def expect_id(self, keyword: Optional[str] = None) -> str:
        tok = self.peek()
        if tok.type != "id" or (keyword is not None and tok.value != keyword):
            self.fail("expected %s" % (repr(keyword) if keyword else "an identifier"))
        return self.next().value

    def at_id(self, keyword: str) -> bool:
        tok = self.peek()
        return tok.type == "id" and tok.value == keyword

    def expect_num(self) -> float:
        tok = self.peek()
        if tok.type != "num":
            self.fail("expected a number")
        return float(self.next().value)

    # formulas ---------------------------------------------------------

    def parse_stateform(self) -> StateFormula:
        return self._parse_or()

    def _parse_or(self) -> StateFormula:
        left = self._parse_and()
        while self.peek().type == "punct" and self.peek().value == "|":
            self.next()
            left = Or(left, self._parse_and())
        return left

    def _parse_and(self) -> StateFormula:
        left = self._parse_unary()
        while self.peek().type == "punct" and self.peek().value == "&":
            self.next()
            left = And(left, self._parse_unary())
        return left

    def _parse_unary(self) -> StateFormula:
        tok = self.peek()
        if tok.type == "punct" and tok.value == "!":
            self.next()
            return Not(self._parse_unary())
        if tok.type == "punct" and tok.value == "(":
            self.next()
            inner = self._parse_or()
            self.expect_punct(")")
            return inner
        if tok.type == "id" and tok.value == "true":
            self.next()
            return Top()
        if tok.type == "string":
            self.next()
            return Atom(tok.value[1:-1])
        self.fail("expected a state formula")

    def parse_path(self) -> Tuple[str, StateFormula]:
        self.expect_id("F")
        kind = "F"
        if self.at_id("G"):
            self.next()
            kind = "FG"
        return kind, self.parse_stateform()

    def parse_direction(self) -> str:
        tok = self.peek()
        if tok.type == "id" and tok.value in ("Pmax", "Pmin"):
            self.next()
            return "max" if tok.value == "Pmax" else "min"
        self.fail("expected 'Pmax' or 'Pmin'")

    def parse_bound(self) -> Interval:
        tok = self.peek()
        try:
            if tok.type == "punct" and tok.value == "<":
                self.next()
                return Interval(0.0, self.expect_num(), False, True)
            if tok.type == "punct" and tok.value == "<=":
                self.next()
                return Interval(0.0, self.expect_num(), False, False)
            if tok.type == "id" and tok.value == "in":
                self.next()
                open_tok = self.peek()
                if open_tok.type != "punct" or open_tok.value not in ("[", "("):
                    self.fail("expected '[' or '('")
                self.next()
                lo = self.expect_num()
                self.expect_punct(",")
                hi = self.expect_num()
                close_tok = self.peek()
                if close_tok.type != "punct" or close_tok.value not in (")", "]"):
                    self.fail("expected ')' or ']'")
                self.next()
                return Interval(lo, hi, open_tok.value == "(", close_tok.value == ")")
        except ValueError as exc:
            raise RequirementSyntaxError(
                "malformed interval: %s" % exc, tok.line, tok.column
            ) from exc
        self.fail("expected '<', '<=' or 'in'")


def parse_requirement(text: str) -> CaptlRequirement:
    """Parse and validate a requirement document."""
    parser = _Parser(_tokenize(text))
    objectives: List[Objective] = []
    contexts: List[Tuple[str, str, str, Interval, _Token]] = []
    initial: Optional[str] = None
    while parser.peek().type != "eof":
        if parser.at_id("objective"):
            parser.next()
            oid = parser.expect_id()
            parser.expect_punct("=")
            direction = parser.parse_direction()
            parser.expect_punct("[")
            kind, formula = parser.parse_path()
            parser.expect_punct("]")
            parser.expect_punct(";")
            objectives.append(Objective(id=oid, direction=direction, kind=kind, formula=formula))
        elif parser.at_id("context"):
            tok = parser.peek()
            parser.next()
            cid = parser.expect_id()
            parser.expect_punct(":")
            source = parser.expect_id()
            parser.expect_punct("->")
            target = parser.expect_id()
            parser.expect_id("when")
            parser.expect_id("Pmax")
            interval = parser.parse_bound()
            parser.expect_punct(";")
            contexts.append((cid, source, target, interval, tok))
        elif parser.at_id("initial"):
            tok = parser.peek()
            parser.next()
            if initial is not None:
                raise RequirementSyntaxError("duplicate initial declaration", tok.line, tok.column)
            initial = parser.expect_id()
            parser.expect_punct(";")
        else:
            parser.fail("expected 'objective', 'context' or 'initial'")

    if not objectives:
        raise RequirementError("requirement declares no objectives")
    by_id = {o.id: o for o in objectives}
    bound_contexts = []
    for cid, source, target, interval, tok in contexts:
        src = by_id.get(source)
        if src is None:
            raise RequirementError("context %s: unknown objective %r" % (cid, source))
        bound_contexts.append(
            Context(
                id=cid,
                source=source,
                target=target,
                kind=src.kind,
                formula=src.formula,
                interval=interval,
            )
        )
    req = CaptlRequirement(
        objectives=tuple(objectives),
        contexts=tuple(bound_contexts),
        initial=initial if initial is not None else objectives[0].id,
    )
    validate_requirement(req)
    return req


def print_requirement(req: CaptlRequirement) -> str:
    """Canonical text form; parse(print(req)) is structurally equal to req."""
    lines = []
    for obj in req.objectives:
        lines.append(
            "objective %s = %s [ %s ];"
            % (obj.id, "Pmax" if obj.direction == "max" else "Pmin", obj.path_text())
        )
    for c in req.contexts:
        lines.append(
            "context %s : %s -> %s when Pmax %s;"
            % (c.id, c.source, c.target, c.interval.to_text())
        )
    lines.append("initial %s;" % req.initial)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# standalone queries (CLI `verify`)


@dataclass(frozen=True)
class Query:
    direction: str
    kind: str
    formula: StateFormula
    interval: Optional[Interval] = None


def parse_query(text: str) -> Query:
    """Parse a quantitative or interval-bounded query, e.g.

        Pmax [ F "goal" ]          Pmax<0.95 [ F "goal" ]
        Pmin in [0.2, 0.4] [ F G "safe" ]
    """
    parser = _Parser(_tokenize(text))
    direction = parser.parse_direction()
    interval = None
    tok = parser.peek()
    if tok.type == "punct" and tok.value in ("<", "<="):
        interval = parser.parse_bound()
    elif tok.type == "id" and tok.value == "in":
        interval = parser.parse_bound()
    parser.expect_punct("[")
    kind, formula = parser.parse_path()
    parser.expect_punct("]")
    if parser.peek().type != "eof":
        parser.fail("unexpected trailing input")
    return Query(direction=direction, kind=kind, formula=formula, interval=interval)
