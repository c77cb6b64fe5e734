"""Commutative monoids used as weights of monoid-valued functors.

All arithmetic is exact: rationals are :class:`fractions.Fraction`, complex
weights are pairs of fractions, and the 64-bit monoids are plain ints with
checked ranges. Exactness is what lets independent workers agree on hashes.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .errors import MonoidOverflow

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1
UINT64_MAX = (1 << 64) - 1


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a rational number: {text!r}") from None


def format_rational(q: Fraction) -> str:
    """Shortest exact spelling: integer, terminating decimal, or ``p/q``."""
    if q.denominator == 1:
        return str(q.numerator)
    d = q.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{q.numerator}/{q.denominator}"
    places = max(twos, fives)
    scaled = abs(q.numerator) * (10**places // q.denominator)
    digits = str(scaled).rjust(places + 1, "0")
    sign = "-" if q < 0 else ""
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


_COMPLEX_SPLIT = re.compile(r"(?<=[0-9./])([+-])")


def parse_complex(text: str) -> tuple[Fraction, Fraction]:
    s = text.strip()
    if not s.endswith("i"):
        return (parse_rational(s), Fraction(0))
    body = s[:-1]
    parts = [m.start() for m in _COMPLEX_SPLIT.finditer(body) if body[m.start() - 1] not in "eE"]
    if parts:
        cut = parts[-1]
        real, imag = body[:cut], body[cut:]
    else:
        real, imag = "0", body
    if imag in ("", "+"):
        imag = "1"
    elif imag == "-":
        imag = "-1"
    return (parse_rational(real), parse_rational(imag))


def format_complex(z: tuple[Fraction, Fraction]) -> str:
    re_, im = z
    if im == 0:
        return format_rational(re_)
    sign = "-" if im < 0 else "+"
    return f"{format_rational(re_)}{sign}{format_rational(abs(im))}i"


def _parse_int(text: str) -> int:
    t = text.strip()
    try:
        return int(t, 0)
    except ValueError:
        raise ValueError(f"not an integer: {text!r}") from None


class Monoid:
    """A commutative monoid (M, +, 0) with a textual and binary representation."""

    name: str
    symbol: str
    code: int
    zero: object

    def add(self, a, b):
        raise NotImplementedError

    def parse(self, text: str):
        raise NotImplementedError

    def format(self, value) -> str:
        return str(value)

    def is_zero(self, value) -> bool:
        return value == self.zero

    def total(self, values):
        acc = self.zero
        for v in values:
            acc = self.add(acc, v)
        return acc

    def __repr__(self):
        return self.name


class IntAdd(Monoid):
    name, symbol, code, zero = "IntAdd", "(Z,+)", 1, 0

    def add(self, a, b):
        r = a + b
        if not INT64_MIN <= r <= INT64_MAX:
            raise MonoidOverflow(f"(Z,+) sum {r} outside signed 64-bit range")
        return r

    def parse(self, text):
        v = _parse_int(text)
        if not INT64_MIN <= v <= INT64_MAX:
            raise ValueError(f"{text!r} outside signed 64-bit range")
        return v


class RatAdd(Monoid):
    name, symbol, code, zero = "RatAdd", "(R,+)", 2, Fraction(0)

    def add(self, a, b):
        return a + b

    def parse(self, text):
        return parse_rational(text)

    def format(self, value):
        return format_rational(value)


class ComplexRatAdd(Monoid):
    name, symbol, code, zero = "ComplexRatAdd", "(C,+)", 3, (Fraction(0), Fraction(0))

    def add(self, a, b):
        return (a[0] + b[0], a[1] + b[1])

    def parse(self, text):
        return parse_complex(text)

    def format(self, value):
        return format_complex(value)


class Word64Or(Monoid):
    name, symbol, code, zero = "Word64Or", "(P64,or)", 4, 0

    def add(self, a, b):
        return a | b

    def parse(self, text):
        v = _parse_int(text)
        if not 0 <= v <= UINT64_MAX:
            raise ValueError(f"{text!r} is not a 64-bit word")
        return v


class NatMax(Monoid):
    name, symbol, code, zero = "NatMax", "(N,max)", 5, 0

    def add(self, a, b):
        return a if a >= b else b

    def parse(self, text):
        v = _parse_int(text)
        if not 0 <= v <= UINT64_MAX:
            raise ValueError(f"{text!r} is not a 64-bit natural")
        return v


class NatAdd(Monoid):
    """Multiplicities of the bag functor."""

    name, symbol, code, zero = "NatAdd", "(N,+)", 6, 0

    def add(self, a, b):
        r = a + b
        if r > UINT64_MAX:
            raise MonoidOverflow(f"bag multiplicity {r} outside unsigned 64-bit range")
        return r

    def parse(self, text):
        v = _parse_int(text)
        if not 0 <= v <= UINT64_MAX:
            raise ValueError(f"{text!r} is not a 64-bit natural")
        return v


class Probability(RatAdd):
    """Rational addition restricted to weights in (0, 1]; used by the distribution functor."""

    name, symbol, code = "Probability", "(D)", 7

    def parse(self, text):
        v = parse_rational(text)
        if not 0 <= v <= 1:
            raise ValueError(f"probability {text!r} outside [0, 1]")
        return v


INT_ADD = IntAdd()
RAT_ADD = RatAdd()
COMPLEX_ADD = ComplexRatAdd()
WORD64_OR = Word64Or()
NAT_MAX = NatMax()
NAT_ADD = NatAdd()
PROBABILITY = Probability()

#: Monoids a user may name in a functor term, keyed by their spelling.
USER_MONOIDS = {m.symbol: m for m in (INT_ADD, RAT_ADD, COMPLEX_ADD, WORD64_OR, NAT_MAX)}
BY_CODE = {m.code: m for m in (INT_ADD, RAT_ADD, COMPLEX_ADD, WORD64_OR, NAT_MAX, NAT_ADD, PROBABILITY)}
BY_NAME = {m.name: m for m in BY_CODE.values()}
