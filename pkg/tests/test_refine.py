import random
import zlib

import pytest
from conftest import BASIC_SHAPES, COMBINATOR_SHAPES, corpus_files, load, random_instances
from hypothesis import given
from hypothesis import strategies as st

from sigrefine.coalgebra import read_coalgebra, write_coalgebra
from sigrefine.encoding import desort
from sigrefine.functor import parse_functor
from sigrefine.oracle import brute_force_coarsest, random_coalgebra
from sigrefine.refine import Partition, refine_sequential, refinement_step, stabilize_check


def test_dfa_golden(dfa_encoded):
    result = refine_sequential(dfa_encoded)
    assert result.partition == Partition((0, 0, 1), 2)
    assert result.iterations == 2
    assert result.history == [2, 2]


def test_markov_golden(markov_chain):
    result = refine_sequential(desort(markov_chain))
    assert result.partition == Partition((0, 0, 0), 1)
    assert result.iterations == 1
    assert result.history == [1]


def test_empty_coalgebra():
    e = desort(read_coalgebra("PX\n"))
    result = refine_sequential(e)
    assert result.partition.size == 0
    assert result.iterations == 1


def test_deadlock_and_loop_are_split():
    e = desort(read_coalgebra("PX\na: {a}\nb: {}\nc: {a}\n"))
    assert refine_sequential(e).partition.block_of == (0, 1, 0)


def test_nested_functor_merges_through_intermediates():
    c = read_coalgebra("P(2 x X)\na: {(0, a), (1, b)}\nb: {(1, b), (0, a)}\nc: {(0, a)}\n")
    assert refine_sequential(desort(c)).partition.block_of == (0, 0, 1)


def test_hashed_and_exact_modes_agree(dfa_encoded):
    exact = refine_sequential(dfa_encoded, "exact")
    hashed = refine_sequential(dfa_encoded, "hashed")
    assert exact.partition == hashed.partition
    assert exact.history == hashed.history


def test_unknown_mode():
    with pytest.raises(ValueError):
        refinement_step(desort(read_coalgebra("PX\na: {}\n")), [0], "fuzzy")


def test_exact_ids_follow_first_occurrence(dfa_encoded):
    assert refinement_step(dfa_encoded, [0, 0, 0]) == [0, 0, 1]
    assert refinement_step(dfa_encoded, [5, 5, 9]) == [0, 0, 1]


def test_stabilize_check(dfa_encoded):
    assert not stabilize_check(dfa_encoded, [0, 0, 0])
    assert stabilize_check(dfa_encoded, [0, 0, 1])
    assert stabilize_check(dfa_encoded, [0, 1, 2])
    # q and r differ in their output, so this split is not stable
    assert not stabilize_check(dfa_encoded, [0, 1, 0])


def test_rounds_are_kept_on_request(dfa_encoded):
    result = refine_sequential(dfa_encoded, keep_rounds=True)
    assert result.rounds == [[0, 0, 1], [0, 0, 1]]
    assert refine_sequential(dfa_encoded).rounds is None


def _refines(fine, coarse):
    return len(set(zip(fine, coarse))) == len(set(fine))


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_corpus_chain_is_monotone_and_bounded(path):
    c = load(path)
    e = desort(c)
    result = refine_sequential(e, keep_rounds=True)
    assert result.iterations <= len(c.names) + 1
    chain = [[0] * e.n_prime] + result.rounds
    for coarse, fine in zip(chain, chain[1:]):
        assert _refines(fine, coarse)
    counts = [1 if e.n_prime else 0] + result.history
    assert all(a < b for a, b in zip(counts[:-2], counts[1:-1]))
    assert counts[-1] == counts[-2]
    assert stabilize_check(e, result.rounds[-1])


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_corpus_matches_oracle(path):
    c = load(path)
    if len(c.names) > 6:
        pytest.skip("too large for the oracle")
    e = desort(c)
    expected = brute_force_coarsest(c)
    assert refine_sequential(e, "exact").partition == expected
    assert refine_sequential(e, "hashed").partition == expected


SHAPES = list(BASIC_SHAPES.values()) + list(COMBINATOR_SHAPES.values()) + ["D(X + 1)", "N x (N,max)^(4 x X^2)"]


@pytest.mark.parametrize("shape", SHAPES)
def test_random_instances_match_oracle(shape):
    for c in random_instances(shape, 50, seed=zlib.crc32(shape.encode())):
        e = desort(c)
        expected = brute_force_coarsest(c)
        assert refine_sequential(e, "exact").partition == expected
        assert refine_sequential(e, "hashed").partition == expected


@given(st.sampled_from(SHAPES), st.integers(1, 6), st.randoms(use_true_random=False))
def test_result_is_stable_and_coarsest(shape, n, rng):
    c = random_coalgebra(parse_functor(shape), n, rng)
    e = desort(c)
    result = refine_sequential(e, keep_rounds=True)
    assert stabilize_check(e, result.rounds[-1])
    assert result.partition == brute_force_coarsest(c)


@given(st.sampled_from(SHAPES), st.integers(2, 6), st.randoms(use_true_random=False))
def test_state_order_does_not_change_the_partition(shape, n, rng):
    c = random_coalgebra(parse_functor(shape), n, rng)
    perm = list(range(n))
    random.Random(n).shuffle(perm)
    header, *body = [line for line in write_coalgebra(c).splitlines() if line]
    shuffled = read_coalgebra("\n".join([header] + [body[s] for s in perm]) + "\n")
    base = refine_sequential(desort(c)).partition.block_of
    moved = refine_sequential(desort(shuffled)).partition.block_of
    by_name = {shuffled.names[i]: moved[i] for i in range(n)}
    pairs = {(base[i], by_name[c.names[i]]) for i in range(n)}
    assert len(pairs) == len(set(base)) == len(set(moved))
