"""Reading and writing coalgebra files.

A file is a functor term on its first nonblank line followed by one line
``name: value`` per state; the shape of ``value`` follows the term.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .errors import ParseError
from .functor import (
    NAME_RE,
    Bag,
    Const,
    Dist,
    Exponent,
    FunctorTerm,
    MonoidValued,
    Powerset,
    Product,
    Sum,
    Var,
    parse_functor,
    pretty,
)
from .monoid import NAT_ADD, PROBABILITY, Monoid


@dataclass(frozen=True)
class Inj:
    """Value of a sum ``T + T``: ``side`` 0 is ``inl``, 1 is ``inr``."""

    side: int
    value: Any


class ElemSet:
    """Finite set that remembers the order it was written in."""

    __slots__ = ("items", "_key")

    def __init__(self, items):
        self.items = tuple(items)
        self._key = frozenset(self.items)

    def __eq__(self, other):
        return isinstance(other, ElemSet) and self._key == other._key

    def __hash__(self):
        return hash(("set", self._key))

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __repr__(self):
        return f"ElemSet({list(self.items)!r})"


class WeightMap:
    """Finitely supported map into a monoid; zero entries are never stored."""

    __slots__ = ("items", "_key")

    def __init__(self, items):
        self.items = tuple(items)
        self._key = frozenset(self.items)

    def __eq__(self, other):
        return isinstance(other, WeightMap) and self._key == other._key

    def __hash__(self):
        return hash(("map", self._key))

    def __len__(self):
        return len(self.items)

    def as_dict(self) -> dict:
        return dict(self.items)

    def __repr__(self):
        return f"WeightMap({dict(self.items)!r})"


@dataclass
class Coalgebra:
    """A parsed coalgebra; state references inside ``values`` are indices into ``names``."""

    term: FunctorTerm
    names: list[str]
    values: list

    def __len__(self):
        return len(self.names)


def weight_monoid(term: FunctorTerm) -> Monoid:
    match term:
        case Bag():
            return NAT_ADD
        case Dist():
            return PROBABILITY
        case MonoidValued(monoid, _):
            return monoid
    raise TypeError(f"{term!r} carries no weights")


_TOKEN = re.compile(r"\s*(?:([{}(),:])|([^\s{}(),:]+))")


class _BodyParser:
    def __init__(self, text: str, lineno: int, index: dict[str, int]):
        self.line = lineno
        self.index = index
        self.toks: list[str] = []
        self.cols: list[int] = []
        for m in _TOKEN.finditer(text):
            if m.group(1) is None and m.group(2) is None:
                break
            self.toks.append(m.group(1) or m.group(2))
            self.cols.append(m.start(1) + 1 if m.group(1) else m.start(2) + 1)
        self.pos = 0
        self.end_col = len(text) + 1

    def fail(self, message, pos=None):
        pos = self.pos if pos is None else pos
        col = self.cols[pos] if pos < len(self.cols) else self.end_col
        raise ParseError(message, self.line, col)

    def next(self) -> str:
        if self.pos >= len(self.toks):
            self.fail("unexpected end of line")
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def peek(self) -> str:
        return self.toks[self.pos] if self.pos < len(self.toks) else ""

    def expect(self, tok):
        if self.peek() != tok:
            self.fail(f"expected {tok!r}, found {self.peek() or 'end of line'!r}")
        self.pos += 1

    def atom(self, what) -> str:
        tok = self.peek()
        if not tok or tok in "{}(),:":
            self.fail(f"expected {what}")
        self.pos += 1
        return tok

    def value(self, term: FunctorTerm):
        match term:
            case Var():
                start = self.pos
                name = self.atom("a state name")
                if name not in self.index:
                    self.fail(f"undeclared state {name!r}", start)
                return self.index[name]
            case Const(None):
                start = self.pos
                tok = self.atom("a natural number")
                if not tok.isdigit():
                    self.fail(f"{tok!r} is not a natural number", start)
                return int(tok)
            case Const(elements):
                start = self.pos
                tok = self.atom("a constant")
                if tok not in elements:
                    self.fail(f"{tok!r} is not one of {{{','.join(elements)}}}", start)
                return tok
            case Powerset(sub):
                items = []
                seen = set()
                self.expect("{")
                if self.peek() != "}":
                    while True:
                        start = self.pos
                        v = self.value(sub)
                        if v in seen:
                            self.fail("duplicate set element", start)
                        seen.add(v)
                        items.append(v)
                        if self.peek() != ",":
                            break
                        self.pos += 1
                self.expect("}")
                return ElemSet(items)
            case Bag(sub) | Dist(sub) | MonoidValued(_, sub):
                return self.weights(term, sub)
            case Product(left, right):
                self.expect("(")
                a = self.value(left)
                self.expect(",")
                b = self.value(right)
                self.expect(")")
                return (a, b)
            case Exponent(sub, names):
                return self.exponent(sub, names)
            case Sum(left, right):
                start = self.pos
                tag = self.atom("inl or inr")
                if tag == "inl":
                    return Inj(0, self.value(left))
                if tag == "inr":
                    return Inj(1, self.value(right))
                self.fail(f"expected inl or inr, found {tag!r}", start)
        raise TypeError(f"not a functor term: {term!r}")

    def weights(self, term, sub) -> WeightMap:
        monoid = weight_monoid(term)
        items = []
        seen = set()
        self.expect("{")
        if self.peek() != "}":
            while True:
                start = self.pos
                key = self.value(sub)
                if key in seen:
                    self.fail("duplicate key", start)
                seen.add(key)
                self.expect(":")
                wpos = self.pos
                text = self.atom("a weight")
                try:
                    w = monoid.parse(text)
                except ValueError as exc:
                    self.fail(str(exc), wpos)
                if not monoid.is_zero(w):
                    items.append((key, w))
                if self.peek() != ",":
                    break
                self.pos += 1
        self.expect("}")
        if isinstance(term, Dist):
            total = sum((w for _, w in items), Fraction(0))
            if total != 1:
                self.fail(f"distribution sums to {total}, not 1", self.pos - 1)
        return WeightMap(items)

    def exponent(self, sub, names):
        if self.peek() == "(":
            self.pos += 1
            vals = []
            for i in range(len(names)):
                if i:
                    self.expect(",")
                vals.append(self.value(sub))
            self.expect(")")
            return tuple(vals)
        self.expect("{")
        got: dict[str, Any] = {}
        while True:
            start = self.pos
            key = self.atom("an exponent name")
            if key not in names:
                self.fail(f"{key!r} is not one of {{{','.join(names)}}}", start)
            if key in got:
                self.fail(f"duplicate key {key!r}", start)
            self.expect(":")
            got[key] = self.value(sub)
            if self.peek() != ",":
                break
            self.pos += 1
        self.expect("}")
        missing = [n for n in names if n not in got]
        if missing:
            self.fail(f"missing exponent keys {missing}", self.pos - 1)
        return tuple(got[n] for n in names)


def parse_coalgebra(term: FunctorTerm, text: str, first_line: int = 2) -> Coalgebra:
    """Parse the state lines of a coalgebra file.

    ``first_line`` is the file line number of the first line of ``text``,
    used only in error messages.
    """
    lines = [(first_line + i, raw) for i, raw in enumerate(text.splitlines()) if raw.strip()]
    names: list[str] = []
    index: dict[str, int] = {}
    for lineno, raw in lines:
        head, sep, _ = raw.partition(":")
        name = head.strip()
        if not sep:
            raise ParseError("expected 'state: value'", lineno, 1)
        if not NAME_RE.fullmatch(name):
            raise ParseError(f"invalid state name {name!r}", lineno, 1)
        if name in index:
            raise ParseError(f"state {name!r} defined twice", lineno, 1)
        index[name] = len(names)
        names.append(name)
    values = []
    for lineno, raw in lines:
        head, _, rest = raw.partition(":")
        offset = len(head) + 1
        p = _BodyParser(rest, lineno, index)
        p.cols = [c + offset for c in p.cols]
        p.end_col += offset
        v = p.value(term)
        if p.pos != len(p.toks):
            p.fail(f"unexpected {p.peek()!r}")
        values.append(v)
    return Coalgebra(term, names, values)


def read_coalgebra(text: str) -> Coalgebra:
    """Parse a whole coalgebra file (functor line plus state lines)."""
    lines = text.splitlines()
    for i, raw in enumerate(lines):
        if raw.strip():
            try:
                term = parse_functor(raw)
            except ParseError as exc:
                raise ParseError(exc.message, i + 1, exc.column) from None
            return parse_coalgebra(term, "\n".join(lines[i + 1 :]), first_line=i + 2)
    raise ParseError("empty input: no functor term", 1, 1)


def format_value(term: FunctorTerm, value, names) -> str:
    match term:
        case Var():
            return names[value]
        case Const():
            return str(value)
        case Powerset(sub):
            return "{" + ", ".join(format_value(sub, v, names) for v in value.items) + "}"
        case Bag(sub) | Dist(sub) | MonoidValued(_, sub):
            monoid = weight_monoid(term)
            body = ", ".join(f"{format_value(sub, k, names)}: {monoid.format(w)}" for k, w in value.items)
            return "{" + body + "}"
        case Product(left, right):
            return f"({format_value(left, value[0], names)}, {format_value(right, value[1], names)})"
        case Exponent(sub, exp_names):
            body = ", ".join(f"{n}: {format_value(sub, v, names)}" for n, v in zip(exp_names, value))
            return "{" + body + "}"
        case Sum(left, right):
            sub = left if value.side == 0 else right
            return ("inl " if value.side == 0 else "inr ") + format_value(sub, value.value, names)
    raise TypeError(f"not a functor term: {term!r}")


def write_coalgebra(c: Coalgebra) -> str:
    out = [pretty(c.term), ""]
    for name, v in zip(c.names, c.values):
        out.append(f"{name}: {format_value(c.term, v, c.names)}")
    return "\n".join(out) + "\n"


def write_partition(blocks, names) -> str:
    """One ``name: block`` line per state, blocks renumbered by first occurrence."""
    fresh: dict = {}
    out = []
    for name, b in zip(names, blocks):
        out.append(f"{name}: {fresh.setdefault(b, len(fresh))}")
    return "\n".join(out) + ("\n" if out else "")


def read_partition(text: str) -> dict[str, int]:
    result = {}
    for raw in text.splitlines():
        if raw.strip():
            name, _, block = raw.partition(":")
            result[name.strip()] = int(block)
    return result
