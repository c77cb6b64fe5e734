import zlib
from fractions import Fraction

import pytest
from conftest import BASIC_SHAPES, COMBINATOR_SHAPES, corpus_files, load, random_instances
from hypothesis import given
from hypothesis import strategies as st

from sigrefine.coalgebra import ElemSet, Inj, WeightMap, read_coalgebra, read_partition, write_coalgebra, write_partition
from sigrefine.encoding import desort
from sigrefine.errors import MonoidOverflow, ParseError
from sigrefine.functor import parse_functor
from sigrefine.oracle import random_coalgebra


def test_markov_chain(markov_chain):
    assert markov_chain.names == ["q", "p", "r"]
    assert markov_chain.values[0] == WeightMap([(1, Fraction(1, 2)), (2, Fraction(1, 2))])
    assert markov_chain.values[2] == WeightMap([(2, Fraction(1))])


def test_dfa(dfa):
    assert dfa.values[2] == ("f", (0, 1))
    assert dfa.values[0] == ("n", (1, 2))


def test_empty_set():
    c = read_coalgebra("PX\ns: {}\n")
    assert c.values == [ElemSet([])]


def test_sets_and_maps_ignore_listing_order():
    a = read_coalgebra("PX\ns: {s, t}\nt: {}\n")
    b = read_coalgebra("PX\ns: {t, s}\nt: {}\n")
    assert a.values == b.values


def test_sum_values():
    c = read_coalgebra("X + 1\na: inl b\nb: inr 0\n")
    assert c.values == [Inj(0, 1), Inj(1, "0")]


def test_exponent_accepts_map_or_tuple():
    a = read_coalgebra("X^{a,b}\ns: {b: t, a: s}\nt: (t, s)\n")
    assert a.values == [(0, 1), (1, 0)]


def test_zero_weights_are_absent():
    c = read_coalgebra("(Z,+)^X\ns: {s: 0, t: 2}\nt: {}\n")
    assert c.values[0] == WeightMap([(1, 2)])


def test_blank_lines_are_ignored():
    c = read_coalgebra("\nPX\n\ns: {s}\n\n")
    assert c.names == ["s"]


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("PX\ns: {t}\n", 2, "undeclared"),
        ("PX\ns: {}\ns: {}\n", 3, "defined twice"),
        ("PX\ns: (s, s)\n", 2, "expected"),
        ("DX\ns: {s: 0.5}\n", 2, "sums to"),
        ("(Z,+)^X\ns: {s: x}\n", 2, ""),
        ("PX\ns: {s, s}\n", 2, "duplicate"),
        ("BX\ns: {s: 1, s: 2}\n", 2, "duplicate"),
        ("{a,b}\ns: c\n", 2, "not one of"),
        ("X + X\ns: s\n", 2, "inl or inr"),
        ("X^{a,b}\ns: {a: s}\n", 2, "missing"),
        ("PX\ns {}\n", 2, "state: value"),
        ("P(X\ns: {}\n", 1, ""),
        ("", 1, "empty"),
    ],
)
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ParseError) as err:
        read_coalgebra(text)
    assert err.value.line == line
    assert fragment in str(err.value)


def test_out_of_range_literal_is_a_parse_error():
    with pytest.raises(ParseError):
        read_coalgebra(f"(Z,+)^X\ns: {{s: {2**63}}}\n")


def test_checked_integer_overflow_when_summing():
    c = read_coalgebra(f"(Z,+)^X\ns: {{s: {2**63 - 1}, t: 1}}\nt: {{}}\n")
    with pytest.raises(MonoidOverflow):
        desort(c)


def test_write_partition_examples(dfa):
    assert write_partition([0, 0, 1], dfa.names) == "q: 0\np: 0\nr: 1\n"
    assert write_partition([7, 7, 7], ["q", "p", "r"]) == "q: 0\np: 0\nr: 0\n"
    assert write_partition([3], ["s"]) == "s: 0\n"
    assert write_partition([5, 2, 5], ["a", "b", "c"]) == "a: 0\nb: 1\nc: 0\n"


def test_read_partition_inverts_write():
    text = write_partition([4, 1, 4, 9], ["a", "b", "c", "d"])
    assert read_partition(text) == {"a": 0, "b": 1, "c": 0, "d": 2}


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_corpus_round_trips(path):
    c = load(path)
    assert read_coalgebra(write_coalgebra(c)) == c


SHAPES = list(BASIC_SHAPES.values()) + list(COMBINATOR_SHAPES.values()) + ["N x (N,max)^(4 x X^2)", "D(X + 1)", "(PX)^2"]


@pytest.mark.parametrize("shape", SHAPES)
def test_random_round_trips(shape):
    for c in random_instances(shape, 40, seed=zlib.crc32(shape.encode())):
        assert read_coalgebra(write_coalgebra(c)) == c


@given(st.sampled_from(SHAPES), st.integers(1, 8), st.randoms(use_true_random=False))
def test_round_trip_property(shape, n, rng):
    c = random_coalgebra(parse_functor(shape), n, rng)
    assert read_coalgebra(write_coalgebra(c)) == c
