"""Functor terms: AST, parser, printer and label layouts.

Grammar (precedence from tightest to loosest: prefix functors, ``^``,
``x``, ``+``; the two infix operators associate to the right)::

    T ::= X | P T | B T | D T | M^T | N | A | T + T | T x T | T^A
    A ::= {name, ...} | n
    M ::= (Z,+) | (R,+) | (C,+) | (P64,or) | (N,max)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ParseError
from .monoid import NAT_ADD, PROBABILITY, USER_MONOIDS, Monoid


class FunctorTerm:
    __slots__ = ()


@dataclass(frozen=True)
class Var(FunctorTerm):
    pass


@dataclass(frozen=True)
class Const(FunctorTerm):
    """Constant functor; ``elements is None`` stands for the naturals."""

    elements: tuple[str, ...] | None


@dataclass(frozen=True)
class Powerset(FunctorTerm):
    sub: FunctorTerm


@dataclass(frozen=True)
class Bag(FunctorTerm):
    sub: FunctorTerm


@dataclass(frozen=True)
class Dist(FunctorTerm):
    sub: FunctorTerm


@dataclass(frozen=True)
class MonoidValued(FunctorTerm):
    monoid: Monoid
    sub: FunctorTerm


@dataclass(frozen=True)
class Sum(FunctorTerm):
    left: FunctorTerm
    right: FunctorTerm


@dataclass(frozen=True)
class Product(FunctorTerm):
    left: FunctorTerm
    right: FunctorTerm


@dataclass(frozen=True)
class Exponent(FunctorTerm):
    sub: FunctorTerm
    exponent: tuple[str, ...]


BASIC = (Powerset, Bag, Dist, MonoidValued)

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_MONOID_RE = re.compile(r"\(\s*(Z|R|C|P64|N)\s*,\s*(\+|or|max)\s*\)")
_NUMBER_RE = re.compile(r"[0-9]+")


def numbered_names(n: int) -> tuple[str, ...]:
    return tuple(str(i) for i in range(n))


def exponent_names(n: int) -> tuple[str, ...]:
    return tuple(f"e{i}" for i in range(n))


class _TermParser:
    def __init__(self, text: str):
        self.s = text
        self.i = 0

    def fail(self, message):
        raise ParseError(message, column=self.i + 1)

    def peek(self) -> str:
        s, i = self.s, self.i
        while i < len(s) and s[i].isspace():
            i += 1
        self.i = i
        return s[i] if i < len(s) else ""

    def expect(self, ch):
        if self.peek() != ch:
            self.fail(f"expected {ch!r}")
        self.i += 1

    def parse(self) -> FunctorTerm:
        if not self.peek():
            self.fail("empty functor term")
        term = self.sum()
        if self.peek():
            self.fail(f"unexpected {self.s[self.i]!r}")
        return term

    def sum(self):
        left = self.product()
        if self.peek() == "+":
            self.i += 1
            return Sum(left, self.sum())
        return left

    def product(self):
        left = self.power()
        if self.peek() in ("x", "×"):
            self.i += 1
            return Product(left, self.product())
        return left

    def power(self):
        term = self.prefix()
        while self.peek() == "^":
            self.i += 1
            names, numeric = self.finite_set()
            term = Exponent(term, exponent_names(len(names)) if numeric else names)
        return term

    def prefix(self):
        c = self.peek()
        if c == "P":
            self.i += 1
            return Powerset(self.prefix())
        if c == "B":
            self.i += 1
            return Bag(self.prefix())
        if c == "D":
            self.i += 1
            return Dist(self.prefix())
        if c == "X":
            self.i += 1
            return Var()
        if c == "N":
            self.i += 1
            return Const(None)
        if c == "(":
            m = _MONOID_RE.match(self.s, self.i)
            if m:
                symbol = f"({m.group(1)},{m.group(2)})"
                if symbol not in USER_MONOIDS:
                    self.fail(f"unknown monoid {symbol}")
                self.i = m.end()
                self.expect("^")
                return MonoidValued(USER_MONOIDS[symbol], self.prefix())
            self.i += 1
            inner = self.sum()
            self.expect(")")
            return inner
        if c == "{" or c.isdigit():
            names, numeric = self.finite_set()
            return Const(numbered_names(len(names)) if numeric else names)
        if not c:
            self.fail("unexpected end of functor term")
        self.fail(f"unexpected {c!r}")

    def finite_set(self) -> tuple[tuple[str, ...], bool]:
        c = self.peek()
        if c.isdigit():
            m = _NUMBER_RE.match(self.s, self.i)
            n = int(m.group())
            if n == 0:
                self.fail("empty finite set")
            self.i = m.end()
            return numbered_names(n), True
        if c != "{":
            self.fail("expected a finite set")
        self.i += 1
        names: list[str] = []
        if self.peek() == "}":
            self.fail("empty finite set")
        while True:
            self.peek()
            m = NAME_RE.match(self.s, self.i)
            if not m:
                self.fail("expected a name")
            if m.group() in names:
                self.fail(f"duplicate element {m.group()!r}")
            names.append(m.group())
            self.i = m.end()
            if self.peek() == ",":
                self.i += 1
                continue
            self.expect("}")
            return tuple(names), False


def parse_functor(text: str) -> FunctorTerm:
    """Parse a functor term such as ``{f,n} x X^{a,b}`` or ``DX``."""
    return _TermParser(text).parse()


def _set_text(names: tuple[str, ...], numbered: tuple[str, ...]) -> str:
    if names == numbered:
        return str(len(names))
    return "{" + ",".join(names) + "}"


def pretty(term: FunctorTerm, level: int = 0) -> str:
    """Render ``term`` so that :func:`parse_functor` gives it back."""
    match term:
        case Var():
            return "X"
        case Const(None):
            return "N"
        case Const(elements):
            return _set_text(elements, numbered_names(len(elements)))
        case Powerset(sub):
            return "P" + pretty(sub, 3)
        case Bag(sub):
            return "B" + pretty(sub, 3)
        case Dist(sub):
            return "D" + pretty(sub, 3)
        case MonoidValued(monoid, sub):
            return monoid.symbol + "^" + pretty(sub, 3)
        case Exponent(sub, names):
            text = pretty(sub, 2) + "^" + _set_text(names, exponent_names(len(names)))
            return f"({text})" if level > 2 else text
        case Product(left, right):
            text = f"{pretty(left, 2)} x {pretty(right, 1)}"
            return f"({text})" if level > 1 else text
        case Sum(left, right):
            text = f"{pretty(left, 1)} + {pretty(right, 0)}"
            return f"({text})" if level > 0 else text
    raise TypeError(f"not a functor term: {term!r}")


# -- label layouts -----------------------------------------------------------


@dataclass(frozen=True)
class Slot:
    """One place in a single-layer functor that emits edges.

    ``path`` addresses the slot through Sum/Product/Exponent nodes (0/1 for
    the binary combinators, the position for exponents). ``kind`` is one of
    ``var``, ``powerset``, ``bag``, ``dist``, ``monoid``.
    """

    path: tuple[int, ...]
    kind: str
    payload: str
    monoid: Monoid | None = None
    arg: FunctorTerm | None = None


@dataclass(frozen=True)
class LabelLayout:
    term: FunctorTerm
    slots: tuple[Slot, ...]
    by_path: dict = field(compare=False, hash=False, repr=False, default_factory=dict)

    def slot(self, path) -> Slot:
        return self.by_path[path]


def _slots(term, path, out):
    match term:
        case Var():
            out.append(Slot(path, "var", "unit"))
        case Const():
            pass
        case Powerset(sub):
            out.append(Slot(path, "powerset", "unit", None, sub))
        case Bag(sub):
            out.append(Slot(path, "bag", "natural", NAT_ADD, sub))
        case Dist(sub):
            out.append(Slot(path, "dist", "rational", PROBABILITY, sub))
        case MonoidValued(monoid, sub):
            out.append(Slot(path, "monoid", monoid.name, monoid, sub))
        case Sum(left, right) | Product(left, right):
            _slots(left, path + (0,), out)
            _slots(right, path + (1,), out)
        case Exponent(sub, names):
            for i in range(len(names)):
                _slots(sub, path + (i,), out)
        case _:
            raise TypeError(f"not a functor term: {term!r}")


def label_layout(term: FunctorTerm) -> LabelLayout:
    """Slots of the top layer of ``term`` (combinators down to basic functors)."""
    out: list[Slot] = []
    _slots(term, (), out)
    return LabelLayout(term, tuple(out), {s.path: s for s in out})


@dataclass(frozen=True)
class SortLayout:
    """A layer of a desorted functor.

    Sort 0 is the whole term. Every basic functor whose argument is not
    ``X`` opens a new sort for that argument; ``targets`` maps a slot path to
    the sort its edges point into.
    """

    index: int
    term: FunctorTerm
    layout: LabelLayout
    targets: dict = field(compare=False, hash=False)


def sort_layouts(term: FunctorTerm) -> tuple[SortLayout, ...]:
    sorts: list[SortLayout] = []

    def build(t) -> int:
        index = len(sorts)
        layout = label_layout(t)
        targets: dict = {}
        sorts.append(SortLayout(index, t, layout, targets))
        for slot in layout.slots:
            if slot.arg is None or isinstance(slot.arg, Var):
                targets[slot.path] = 0
            else:
                targets[slot.path] = build(slot.arg)
        return index

    build(term)
    return tuple(sorts)
