import random
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from sigrefine.coalgebra import read_coalgebra, weight_monoid
from sigrefine.encoding import desort
from sigrefine.functor import Bag, Const, Dist, Exponent, MonoidValued, Powerset, Product, Sum, Var, parse_functor
from sigrefine.oracle import random_coalgebra
from sigrefine.signature import SigBlock, SigConst, SigMap, SigSet, SigTagged, SigTuple

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CORPUS = Path(__file__).parent / "corpus"

MARKOV_CHAIN = """DX

q: {p: 0.5, r: 0.5}
p: {q: 0.4, r: 0.6}
r: {r: 1}
"""

DFA = """{f,n} x X^{a,b}

q: (n, {a: p, b: r})
p: (n, {a: q, b: r})
r: (f, {a: q, b: p})
"""

# one shape per basic functor, each with an observable output so partitions vary
BASIC_SHAPES = {
    "powerset": "PX",
    "bag": "BX",
    "dist": "DX",
    "dist-observed": "2 x DX",
    "int-add": "(Z,+)^(X)",
    "rat-add": "(R,+)^(X)",
    "complex-add": "(C,+)^(X)",
    "word-or": "(P64,or)^(X)",
    "nat-max": "(N,max)^(X)",
    "const": "{a,b,c}",
}

COMBINATOR_SHAPES = {
    "sum": "PX + {a,b}",
    "product": "2 x BX",
    "exponent": "2 x X^{a,b}",
    "nested": "P({a,b} x DX)",
}

# single-layer shapes: desorting adds no intermediates, so signatures compare directly with images
FLAT_SHAPES = list(BASIC_SHAPES.values()) + ["PX + {a,b}", "2 x BX", "2 x X^{a,b}", "DX x (Z,+)^X + X^3", "(PX)^2"]

# results of the acceptance criteria, reported at the end of the session
ACCEPTANCE: list[str] = []


def corpus_files():
    return sorted(CORPUS.glob("*.coalg"))


def load(path):
    return read_coalgebra(Path(path).read_text(encoding="utf-8"))


def random_instances(shape: str, count: int, seed: int, max_states: int = 6):
    term = parse_functor(shape)
    rng = random.Random(seed)
    for _ in range(count):
        yield random_coalgebra(term, rng.randint(1, max_states), rng)


@pytest.fixture
def markov_chain():
    return read_coalgebra(MARKOV_CHAIN)


@pytest.fixture
def dfa():
    return read_coalgebra(DFA)


@pytest.fixture
def dfa_encoded(dfa):
    return desort(dfa)


def to_sig(term, value):
    """The oracle's plain ``F pi`` image rewritten as a signature value."""
    match term:
        case Var():
            return SigBlock(value)
        case Const():
            return SigConst(value[1])
        case Powerset():
            return SigSet(tuple(sorted(value)))
        case Bag() | Dist() | MonoidValued():
            return SigMap(weight_monoid(term), tuple(sorted(value)))
        case Product(left, right):
            return SigTuple((to_sig(left, value[0]), to_sig(right, value[1])))
        case Exponent(sub, names):
            return SigTuple(tuple(to_sig(sub, v) for v in value))
        case Sum(left, right):
            return SigTagged(value[0], to_sig(left if value[0] == 0 else right, value[1]))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
