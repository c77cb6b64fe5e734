"""Edge encodings of coalgebras and desorting of composite functors.

An encoded state carries an observable output (its value under ``F!``) and
a list of labelled edges. A label is ``(path, payload)``: ``path`` locates
the emitting slot (sort index first, then Sum/Product/Exponent positions)
and ``payload`` is ``None`` for unit labels or the weight for weighted ones.
"""

from __future__ import annotations

from array import array
from collections import deque
from dataclasses import dataclass

from .coalgebra import Coalgebra
from .functor import (
    Bag,
    Const,
    Dist,
    Exponent,
    FunctorTerm,
    MonoidValued,
    Powerset,
    Product,
    SortLayout,
    Sum,
    Var,
    sort_layouts,
)
from .monoid import NAT_ADD


def encode_layer(term: FunctorTerm, value, path: tuple = ()):
    """Encode one layer of ``value``.

    Returns ``(f1, edges)`` where ``edges`` holds ``(path, payload, child)``
    triples; ``child`` is whatever sits below the emitting slot (a state
    index for ``X``, an inner value for a basic functor over a composite
    argument).
    """
    edges: list = []
    f1 = _encode(term, value, path, edges)
    return f1, edges


def _encode(term, value, path, edges):
    match term:
        case Var():
            edges.append((path, None, value))
            return None
        case Const():
            return value
        case Powerset():
            for x in value.items:
                edges.append((path, None, x))
            return len(value.items) > 0
        case Bag():
            total = 0
            for k, w in value.items:
                edges.append((path, w, k))
                total = NAT_ADD.add(total, w)
            return total
        case Dist():
            for k, w in value.items:
                edges.append((path, w, k))
            return None
        case MonoidValued(monoid, _):
            total = monoid.zero
            for k, w in value.items:
                edges.append((path, w, k))
                total = monoid.add(total, w)
            return total
        case Product(left, right):
            return (_encode(left, value[0], path + (0,), edges), _encode(right, value[1], path + (1,), edges))
        case Exponent(sub, names):
            return tuple(_encode(sub, value[i], path + (i,), edges) for i in range(len(names)))
        case Sum(left, right):
            sub = left if value.side == 0 else right
            return (value.side, _encode(sub, value.value, path + (value.side,), edges))
    raise TypeError(f"not a functor term: {term!r}")


def encode_flat(term: FunctorTerm, value):
    """Output and edge bag of a single-layer value.

    The bag is a list of ``((path, payload), target)`` pairs, each with
    multiplicity one.
    """
    f1, edges = encode_layer(term, value)
    return f1, [((path, payload), child) for path, payload, child in edges]


@dataclass
class EncodedCoalgebra:
    """A desorted coalgebra in compressed-row form.

    States ``0..n-1`` are the original states in input order; states
    ``n..n_prime-1`` are intermediates created by desorting. The output of
    state ``s`` is ``f1_table[f1_index[s]]``, a pair ``(sort, output)``.
    The edges of ``s`` occupy ``offsets[s]:offsets[s+1]`` in
    ``edge_labels`` (indices into ``labels``) and ``edge_targets``.
    """

    term: FunctorTerm
    sorts: tuple[SortLayout, ...]
    n: int
    names: list[str]
    f1_table: list
    f1_index: array
    labels: list
    offsets: array
    edge_labels: array
    edge_targets: array

    @property
    def n_prime(self) -> int:
        return len(self.f1_index)

    @property
    def m(self) -> int:
        return len(self.edge_targets)

    def f1(self, s: int):
        return self.f1_table[self.f1_index[s]]

    def sort_of(self, s: int) -> int:
        return self.f1_table[self.f1_index[s]][0]

    def edges_of(self, s: int):
        lo, hi = self.offsets[s], self.offsets[s + 1]
        labels = self.labels
        return [(labels[a], t) for a, t in zip(self.edge_labels[lo:hi], self.edge_targets[lo:hi])]

    def out_degree(self, s: int) -> int:
        return self.offsets[s + 1] - self.offsets[s]


class _Interner:
    def __init__(self):
        self.table: list = []
        self.ids: dict = {}

    def __call__(self, x) -> int:
        i = self.ids.get(x)
        if i is None:
            i = self.ids[x] = len(self.table)
            self.table.append(x)
        return i


def desort(c: Coalgebra) -> EncodedCoalgebra:
    """Flatten ``c`` into a single-layer encoded coalgebra.

    Every value below a basic functor whose argument is not ``X`` becomes a
    fresh intermediate state (one per occurrence) of the sort opened by
    that argument. States are numbered in creation order, so the edge rows
    are emitted sequentially.
    """
    sorts = sort_layouts(c.term)
    n = len(c.names)
    f1s, labels = _Interner(), _Interner()
    f1_index = array("q")
    offsets = array("q", [0])
    edge_labels = array("q")
    edge_targets = array("q")
    pending: deque = deque()
    next_id = n
    for s in range(n):
        pending.append((0, c.values[s]))
    while pending:
        k, value = pending.popleft()
        layer = sorts[k]
        f1, edges = encode_layer(layer.term, value)
        f1_index.append(f1s((k, f1)))
        for path, payload, child in edges:
            target_sort = layer.targets[path]
            if target_sort == 0:
                target = child
            else:
                target = next_id
                next_id += 1
                pending.append((target_sort, child))
            edge_labels.append(labels(((k,) + path, payload)))
            edge_targets.append(target)
        offsets.append(len(edge_targets))
    return EncodedCoalgebra(
        term=c.term,
        sorts=sorts,
        n=n,
        names=list(c.names),
        f1_table=f1s.table,
        f1_index=f1_index,
        labels=labels.table,
        offsets=offsets,
        edge_labels=edge_labels,
        edge_targets=edge_targets,
    )


def _ignores_multiplicity(c: EncodedCoalgebra, label) -> bool:
    path, payload = label
    slot = c.sorts[path[0]].layout.slot(path[1:])
    if slot.kind == "powerset":
        return True
    return slot.kind == "monoid" and slot.monoid.add(payload, payload) == payload


def with_repeated_edges(c: EncodedCoalgebra, times: int) -> EncodedCoalgebra:
    """Copy of ``c`` in which every edge whose multiplicity is unobservable occurs ``times`` times.

    Those are edges of powerset slots and of slots over an idempotent
    monoid (max, bitwise or): repeating them leaves every signature
    unchanged, so they probe message redundancy. Other edges are kept once.
    """
    repeat = [times if _ignores_multiplicity(c, label) else 1 for label in c.labels]
    offsets = array("q", [0])
    labels, targets = array("q"), array("q")
    for s in range(c.n_prime):
        lo, hi = c.offsets[s], c.offsets[s + 1]
        for copy in range(times):
            for i in range(lo, hi):
                a = c.edge_labels[i]
                if copy < repeat[a]:
                    labels.append(a)
                    targets.append(c.edge_targets[i])
        offsets.append(len(targets))
    return EncodedCoalgebra(c.term, c.sorts, c.n, c.names, c.f1_table, c.f1_index, c.labels, offsets, labels, targets)
