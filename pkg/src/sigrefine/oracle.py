"""Brute-force behavioural equivalence for tiny coalgebras, plus random instances.

The oracle never touches encodings or signature interfaces: it applies the
functor to a partition directly on parsed values and searches every
partition of the state set for the coarsest stable one.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .coalgebra import Coalgebra, ElemSet, Inj, WeightMap, weight_monoid
from .functor import Bag, Const, Dist, Exponent, FunctorTerm, MonoidValued, Powerset, Product, Sum, Var
from .refine import Partition

MAX_ORACLE_STATES = 6


def image(term: FunctorTerm, value, pi):
    """``F pi`` applied to ``value``: a hashable canonical form."""
    match term:
        case Var():
            return pi[value]
        case Const():
            return ("const", value)
        case Powerset(sub):
            return frozenset(image(sub, x, pi) for x in value.items)
        case Bag(sub) | Dist(sub) | MonoidValued(_, sub):
            monoid = weight_monoid(term)
            acc: dict = {}
            for k, w in value.items:
                key = image(sub, k, pi)
                acc[key] = monoid.add(acc[key], w) if key in acc else w
            return frozenset((k, w) for k, w in acc.items() if not monoid.is_zero(w))
        case Product(left, right):
            return (image(left, value[0], pi), image(right, value[1], pi))
        case Exponent(sub, names):
            return tuple(image(sub, value[i], pi) for i in range(len(names)))
        case Sum(left, right):
            return (value.side, image(left if value.side == 0 else right, value.value, pi))
    raise TypeError(f"not a functor term: {term!r}")


def set_partitions(n: int):
    """All partitions of ``range(n)`` as restricted growth strings."""
    if n == 0:
        yield ()
        return
    blocks = [0] * n

    def grow(i, top):
        if i == n:
            yield tuple(blocks)
            return
        for b in range(top + 2):
            blocks[i] = b
            yield from grow(i + 1, max(top, b))

    blocks[0] = 0
    yield from grow(1, 0)


def is_stable(c: Coalgebra, pi) -> bool:
    seen: dict = {}
    for s, v in enumerate(c.values):
        sig = image(c.term, v, pi)
        b = pi[s]
        if b in seen:
            if seen[b] != sig:
                return False
        else:
            seen[b] = sig
    return True


def _refines(fine, coarse) -> bool:
    return len(set(zip(fine, coarse))) == len(set(fine))


def brute_force_coarsest(c: Coalgebra) -> Partition:
    n = len(c.names)
    if n > MAX_ORACLE_STATES:
        raise ValueError(f"oracle limited to {MAX_ORACLE_STATES} states, got {n}")
    stable = [pi for pi in set_partitions(n) if is_stable(c, pi)]
    if not stable:
        raise AssertionError("no stable partition; the discrete partition is always stable")
    coarsest = min(stable, key=lambda p: len(set(p)))
    for pi in stable:
        if not _refines(pi, coarsest):
            raise AssertionError(f"stable partition {pi} does not refine {coarsest}")
    return Partition.from_ids(coarsest)


# -- random instances -----------------------------------------------------------

_WEIGHT_POOLS = {
    "IntAdd": [-2, -1, 1, 2],
    "RatAdd": [Fraction(1, 2), Fraction(1), Fraction(-1, 2), Fraction(3, 2)],
    "ComplexRatAdd": [(Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)), (Fraction(1), Fraction(1)), (Fraction(-1), Fraction(0))],
    "Word64Or": [1, 2, 3, 4],
    "NatMax": [1, 2, 3],
    "NatAdd": [1, 2, 3],
}


def random_value(term: FunctorTerm, n: int, rng: random.Random, width: int = 3):
    """Random element of ``F(range(n))`` with small supports, so collisions are common."""
    match term:
        case Var():
            return rng.randrange(n)
        case Const(None):
            return rng.randrange(3)
        case Const(elements):
            return rng.choice(elements)
        case Powerset(sub):
            items: list = []
            for _ in range(rng.randint(0, width)):
                x = random_value(sub, n, rng, width)
                if x not in items:
                    items.append(x)
            return ElemSet(items)
        case Dist(sub):
            keys = _distinct_keys(sub, n, rng, width, minimum=1)
            raw = [rng.randint(1, 3) for _ in keys]
            total = sum(raw)
            return WeightMap((k, Fraction(r, total)) for k, r in zip(keys, raw))
        case Bag(sub) | MonoidValued(_, sub):
            pool = _WEIGHT_POOLS[weight_monoid(term).name]
            keys = _distinct_keys(sub, n, rng, width, minimum=0)
            return WeightMap((k, rng.choice(pool)) for k in keys)
        case Product(left, right):
            return (random_value(left, n, rng, width), random_value(right, n, rng, width))
        case Exponent(sub, names):
            return tuple(random_value(sub, n, rng, width) for _ in names)
        case Sum(left, right):
            side = rng.randrange(2)
            return Inj(side, random_value(left if side == 0 else right, n, rng, width))
    raise TypeError(f"not a functor term: {term!r}")


def _distinct_keys(sub, n, rng, width, minimum):
    keys: list = []
    for _ in range(rng.randint(minimum, width)):
        k = random_value(sub, n, rng, width)
        if k not in keys:
            keys.append(k)
    if minimum and not keys:
        keys.append(random_value(sub, n, rng, width))
    return keys


def random_coalgebra(term: FunctorTerm, n: int, rng: random.Random, width: int = 3) -> Coalgebra:
    names = [f"s{i}" for i in range(n)]
    return Coalgebra(term, names, [random_value(term, n, rng, width) for _ in range(n)])
