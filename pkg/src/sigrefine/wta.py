"""Random weighted tree automata in the benchmark family ``M x M^(4 x X^r)``."""

from __future__ import annotations

import io
import math
import random
from dataclasses import dataclass

SYMBOLS = 4
TRANSITIONS_PER_STATE = 50
ALPHABET_SIZE = 50
MONOIDS = ("max", "or", "bool")


@dataclass(frozen=True)
class WtaSpec:
    n: int
    rank: int
    monoid: str = "max"
    seed: int = 0

    @property
    def k(self) -> int:
        return TRANSITIONS_PER_STATE * self.n

    @property
    def universe(self) -> int:
        return SYMBOLS * self.n ** (self.rank + 1)


def sample_sorted(k: int, universe: int, rng: random.Random):
    """Yield ``k`` distinct integers of ``range(universe)`` in increasing order.

    Vitter's sequential method D: each step draws the gap to the next
    selected index directly, so time and memory are O(k) regardless of the
    universe size. Falls back to method A once the remaining universe is
    small relative to the remaining sample.
    """
    if not 0 <= k <= universe:
        raise ValueError(f"cannot sample {k} of {universe} elements")
    n, N = k, universe
    pos = -1
    alpha_inv = 13
    threshold = -alpha_inv * n
    if n > 0:
        vprime = math.exp(math.log(_unit(rng)) / n)
    qu1 = N - n + 1
    while n > 1 and threshold < N:
        nmin1inv = 1.0 / (n - 1)
        while True:
            while True:
                x = N * (1.0 - vprime)
                s = int(x)
                if s < qu1:
                    break
                vprime = math.exp(math.log(_unit(rng)) / n)
            u = _unit(rng)
            y1 = math.exp(math.log(u * N / qu1) * nmin1inv)
            vprime = y1 * (1.0 - x / N) * (qu1 / (qu1 - s))
            if vprime <= 1.0:
                break
            y2 = 1.0
            top = N - 1
            if n - 1 > s:
                bottom, limit = N - n, N - s
            else:
                bottom, limit = N - s - 1, qu1
            for _ in range(N - 1, limit - 1, -1):
                y2 = y2 * top / bottom
                top -= 1
                bottom -= 1
            if N / (N - x) >= y1 * math.exp(math.log(y2) * nmin1inv):
                vprime = math.exp(math.log(_unit(rng)) * nmin1inv)
                break
            vprime = math.exp(math.log(_unit(rng)) / n)
        pos += s + 1
        yield pos
        N -= s + 1
        n -= 1
        qu1 -= s
        threshold += alpha_inv
    if n > 1:
        for gap in _method_a(n, N, rng):
            pos += gap
            yield pos
    elif n == 1:
        # vprime lies in (0, 1]; the upper end would step past the universe
        pos += min(int(N * vprime), N - 1) + 1
        yield pos


def _method_a(n: int, N: int, rng: random.Random):
    top = N - n
    remaining = N
    while n >= 2:
        v = rng.random()
        s = 0
        quot = top / remaining
        while quot > v:
            s += 1
            top -= 1
            remaining -= 1
            quot = quot * top / remaining
        yield s + 1
        remaining -= 1
        n -= 1
    yield int(remaining * rng.random()) + 1


def _unit(rng: random.Random) -> float:
    # strictly positive, so logarithms are finite
    return 1.0 - rng.random()


def decode_transition(index: int, n: int, rank: int):
    """``(symbol, target, sources)`` at position ``index`` of the lexicographic universe."""
    sources = []
    for _ in range(rank):
        index, s = divmod(index, n)
        sources.append(s)
    symbol, target = divmod(index, n)
    return symbol, target, tuple(reversed(sources))


def weight_alphabet(monoid: str, rng: random.Random) -> list[int]:
    if monoid == "max":
        return list(range(1, ALPHABET_SIZE + 1))
    if monoid == "or":
        words: list[int] = []
        while len(words) < ALPHABET_SIZE:
            w = rng.getrandbits(64)
            if w and w not in words:
                words.append(w)
        return words
    if monoid == "bool":
        return [0, 1]
    raise ValueError(f"unknown WTA monoid {monoid!r}; expected one of {', '.join(MONOIDS)}")


def functor_text(monoid: str, rank: int) -> str:
    inner = f"{SYMBOLS} x X^{rank}"
    if monoid == "bool":
        return f"2 x P({inner})"
    symbol = "(N,max)" if monoid == "max" else "(P64,or)"
    return f"N x {symbol}^({inner})"


def generate_wta(spec: WtaSpec) -> str:
    """Coalgebra file text of a random automaton, deterministic in ``spec``.

    Transitions ``symbol(sources) -> target`` are sampled without
    replacement from all ``4 * n^(r+1)`` candidates; each is listed at its
    target state with a weight from the alphabet (Boolean transitions are
    simply present). Every state also gets an output weight.
    """
    if spec.n < 1:
        raise ValueError("need at least one state")
    if not 1 <= spec.rank <= 5:
        raise ValueError("rank must be in 1..5")
    rng = random.Random(spec.seed)
    alphabet = weight_alphabet(spec.monoid, rng)
    outputs = [rng.choice(alphabet) for _ in range(spec.n)]
    per_state: list[list[str]] = [[] for _ in range(spec.n)]
    boolean = spec.monoid == "bool"
    for index in sample_sorted(spec.k, spec.universe, rng):
        symbol, target, sources = decode_transition(index, spec.n, spec.rank)
        key = f"({symbol}, ({', '.join(f's{s}' for s in sources)}))"
        per_state[target].append(key if boolean else f"{key}: {rng.choice(alphabet)}")
    out = io.StringIO()
    out.write(functor_text(spec.monoid, spec.rank) + "\n")
    for s in range(spec.n):
        out.write(f"s{s}: ({outputs[s]}, {{{', '.join(per_state[s])}}})\n")
    return out.getvalue()
