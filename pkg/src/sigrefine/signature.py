"""Signatures of states relative to a partition, and their canonical bytes.

A signature is the one-step behaviour of a state observed through the
current partition: the state's value with every successor replaced by its
block id. It is assembled from the encoding (output plus labelled edges)
by one interface per basic functor, combined along products, coproducts
and exponents.
"""

from __future__ import annotations

import hashlib
import struct
from fractions import Fraction

from .errors import SignatureError
from .functor import Bag, Const, Dist, Exponent, MonoidValued, Powerset, Product, Sum, Var
from .monoid import BY_CODE, NAT_ADD, PROBABILITY, Monoid

CANONICAL_VERSION = 1
SIG_PERSON = b"sigrefine-sig-v1"


class SigValue:
    __slots__ = ()

    def __repr__(self):
        fields = ", ".join(repr(getattr(self, f)) for f in self.__slots__)
        return f"{type(self).__name__}({fields})"


class SigConst(SigValue):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def __eq__(self, other):
        return type(other) is SigConst and type(self.value) is type(other.value) and self.value == other.value

    def __hash__(self):
        return hash(("c", self.value))


class SigBlock(SigValue):
    __slots__ = ("block",)

    def __init__(self, block: int):
        self.block = block

    def __eq__(self, other):
        return type(other) is SigBlock and self.block == other.block

    def __hash__(self):
        return hash(("b", self.block))


class SigSet(SigValue):
    """Set of block ids, sorted ascending."""

    __slots__ = ("blocks",)

    def __init__(self, blocks: tuple):
        self.blocks = blocks

    def __eq__(self, other):
        return type(other) is SigSet and self.blocks == other.blocks

    def __hash__(self):
        return hash(("s", self.blocks))


class SigMap(SigValue):
    """Block id to monoid element, sorted by block, no zero entries."""

    __slots__ = ("monoid", "items")

    def __init__(self, monoid: Monoid, items: tuple):
        self.monoid = monoid
        self.items = items

    def __eq__(self, other):
        return type(other) is SigMap and self.monoid is other.monoid and self.items == other.items

    def __hash__(self):
        return hash(("m", self.monoid.code, self.items))


class SigTagged(SigValue):
    __slots__ = ("index", "child")

    def __init__(self, index: int, child: SigValue):
        self.index = index
        self.child = child

    def __eq__(self, other):
        return type(other) is SigTagged and self.index == other.index and self.child == other.child

    def __hash__(self):
        return hash(("t", self.index, self.child))


class SigTuple(SigValue):
    __slots__ = ("children",)

    def __init__(self, children: tuple):
        self.children = children

    def __eq__(self, other):
        return type(other) is SigTuple and self.children == other.children

    def __hash__(self):
        return hash(("p", self.children))


# -- signature interfaces -----------------------------------------------------


def _monoid_map(monoid: Monoid, edges) -> SigMap:
    acc: dict = {}
    add = monoid.add
    for w, b in edges:
        acc[b] = add(acc[b], w) if b in acc else w
    zero = monoid.zero
    return SigMap(monoid, tuple(sorted((b, w) for b, w in acc.items() if w != zero)))


def sig_basic(kind: str, f1, edges, monoid: Monoid | None = None) -> SigValue:
    """Signature of a basic functor from its output and ``(payload, block)`` edges.

    ``kind`` is ``var``, ``const``, ``powerset``, ``bag``, ``dist`` or
    ``monoid`` (the last needs ``monoid``).
    """
    if kind == "const":
        if edges:
            raise SignatureError("constant functor has no edges")
        return SigConst(f1)
    if kind == "powerset":
        return SigSet(tuple(sorted({b for _, b in edges})))
    if kind == "var":
        if len(edges) != 1:
            raise SignatureError(f"identity functor needs exactly one edge, got {len(edges)}")
        return SigBlock(edges[0][1])
    if kind == "bag":
        return _monoid_map(NAT_ADD, edges)
    if kind == "dist":
        return _monoid_map(PROBABILITY, edges)
    if kind == "monoid":
        return _monoid_map(monoid, edges)
    raise ValueError(f"unknown functor kind {kind!r}")


def filter_edges(i: int, edges) -> list:
    """Edges tagged with injection ``i``, with that tag removed."""
    return [(path[1:], p, b) for path, p, b in edges if path[0] == i]


def tag_edges(i: int, edges) -> list:
    return [((i,) + path, p, b) for path, p, b in edges]


def sig_product(left, right, f1, edges) -> SigTuple:
    return SigTuple((sig_layer(left, f1[0], filter_edges(0, edges)), sig_layer(right, f1[1], filter_edges(1, edges))))


def sig_coproduct(summands, f1, edges) -> SigTagged:
    i, inner = f1
    for path, _, _ in edges:
        if path[0] != i:
            raise SignatureError(f"edge tagged {path[0]} on a state of summand {i}")
    return SigTagged(i, sig_layer(summands[i], inner, [(path[1:], p, b) for path, p, b in edges]))


def sig_layer(term, f1, edges) -> SigValue:
    """Signature of a single-layer functor term; ``edges`` are ``(path, payload, block)``."""
    match term:
        case Var():
            if len(edges) != 1 or edges[0][0]:
                raise SignatureError("identity functor needs exactly one untagged edge")
            return SigBlock(edges[0][2])
        case Const():
            return sig_basic("const", f1, edges)
        case Powerset():
            return sig_basic("powerset", f1, [(p, b) for _, p, b in edges])
        case Bag():
            return sig_basic("bag", f1, [(p, b) for _, p, b in edges])
        case Dist():
            return sig_basic("dist", f1, [(p, b) for _, p, b in edges])
        case MonoidValued(monoid, _):
            return sig_basic("monoid", f1, [(p, b) for _, p, b in edges], monoid)
        case Product(left, right):
            return sig_product(left, right, f1, edges)
        case Exponent(sub, names):
            return SigTuple(tuple(sig_layer(sub, f1[i], filter_edges(i, edges)) for i in range(len(names))))
        case Sum(left, right):
            return sig_coproduct((left, right), f1, edges)
    raise TypeError(f"not a functor term: {term!r}")


def sort_signature(sorts, f1, edges) -> SigTagged:
    """Signature in the coproduct of all sorts; ``f1`` is ``(sort, output)``."""
    return sig_coproduct([s.term for s in sorts], f1, edges)


def compute_signature(c, s: int, block_of) -> SigTagged:
    """Signature of state ``s`` of encoded coalgebra ``c``.

    ``block_of`` maps a state id to its block id; it may be a sequence or
    any object supporting ``[]``.
    """
    lo, hi = c.offsets[s], c.offsets[s + 1]
    labels = c.labels
    try:
        edges = [labels[a] + (block_of[t],) for a, t in zip(c.edge_labels[lo:hi], c.edge_targets[lo:hi])]
    except (KeyError, IndexError) as exc:
        raise SignatureError(f"no block id for successor {exc.args[0]} of state {s}") from None
    return sort_signature(c.sorts, c.f1(s), edges)


# -- canonical bytes ------------------------------------------------------------

_CONST_STR, _CONST_NAT, _BLOCK, _SET, _MAP, _TAGGED, _TUPLE = range(1, 8)

_u32 = struct.Struct("<I").pack
_u64 = struct.Struct("<Q").pack
_i64 = struct.Struct("<q").pack


def _put_block(out: bytearray, b: int):
    if not 0 <= b < 1 << 128:
        raise SignatureError(f"block id {b} out of 128-bit range")
    out += b.to_bytes(16, "little")


def _put_natural(out: bytearray, v: int):
    raw = v.to_bytes((v.bit_length() + 7) // 8, "little")
    out += _u32(len(raw))
    out += raw


def _put_rational(out: bytearray, q: Fraction):
    out.append(1 if q < 0 else 0)
    _put_natural(out, abs(q.numerator))
    _put_natural(out, q.denominator)


def put_weight(out: bytearray, monoid: Monoid, w):
    code = monoid.code
    if code == 1:
        out += _i64(w)
    elif code in (4, 5, 6):
        out += _u64(w)
    elif code in (2, 7):
        _put_rational(out, w)
    elif code == 3:
        _put_rational(out, w[0])
        _put_rational(out, w[1])
    else:
        raise ValueError(f"unknown monoid code {code}")


def _put(out: bytearray, v: SigValue):
    t = type(v)
    if t is SigBlock:
        out.append(_BLOCK)
        _put_block(out, v.block)
    elif t is SigTagged:
        out.append(_TAGGED)
        out += _u32(v.index)
        _put(out, v.child)
    elif t is SigTuple:
        out.append(_TUPLE)
        out += _u32(len(v.children))
        for child in v.children:
            _put(out, child)
    elif t is SigSet:
        out.append(_SET)
        out += _u32(len(v.blocks))
        for b in v.blocks:
            _put_block(out, b)
    elif t is SigMap:
        out.append(_MAP)
        out.append(v.monoid.code)
        out += _u32(len(v.items))
        for b, w in v.items:
            _put_block(out, b)
            put_weight(out, v.monoid, w)
    elif t is SigConst:
        if isinstance(v.value, str):
            raw = v.value.encode("utf-8")
            out.append(_CONST_STR)
            out += _u32(len(raw))
            out += raw
        else:
            out.append(_CONST_NAT)
            _put_natural(out, v.value)
    else:
        raise TypeError(f"not a signature value: {v!r}")


def canonical_bytes(v: SigValue) -> bytes:
    """Injective byte encoding: version byte, then tag-prefixed nodes, little-endian."""
    out = bytearray([CANONICAL_VERSION])
    _put(out, v)
    return bytes(out)


def hash_id(data: bytes) -> int:
    """128-bit digest of canonical bytes, as an unsigned int."""
    return int.from_bytes(hashlib.blake2b(data, digest_size=16, person=SIG_PERSON).digest(), "little")


def _read_natural(data, i):
    (n,) = struct.unpack_from("<I", data, i)
    i += 4
    return int.from_bytes(data[i : i + n], "little"), i + n


def _read_rational(data, i):
    neg = data[i]
    num, i = _read_natural(data, i + 1)
    den, i = _read_natural(data, i)
    return Fraction(-num if neg else num, den), i


def _read_weight(data, i, code):
    if code == 1:
        return struct.unpack_from("<q", data, i)[0], i + 8
    if code in (4, 5, 6):
        return struct.unpack_from("<Q", data, i)[0], i + 8
    if code in (2, 7):
        return _read_rational(data, i)
    re_, i = _read_rational(data, i)
    im, i = _read_rational(data, i)
    return (re_, im), i


def _get(data, i):
    tag = data[i]
    i += 1
    if tag == _BLOCK:
        return SigBlock(int.from_bytes(data[i : i + 16], "little")), i + 16
    if tag == _TAGGED:
        (index,) = struct.unpack_from("<I", data, i)
        child, i = _get(data, i + 4)
        return SigTagged(index, child), i
    if tag == _TUPLE:
        (k,) = struct.unpack_from("<I", data, i)
        i += 4
        children = []
        for _ in range(k):
            child, i = _get(data, i)
            children.append(child)
        return SigTuple(tuple(children)), i
    if tag == _SET:
        (k,) = struct.unpack_from("<I", data, i)
        i += 4
        blocks = tuple(int.from_bytes(data[i + 16 * j : i + 16 * j + 16], "little") for j in range(k))
        return SigSet(blocks), i + 16 * k
    if tag == _MAP:
        monoid = BY_CODE[data[i]]
        (k,) = struct.unpack_from("<I", data, i + 1)
        i += 5
        items = []
        for _ in range(k):
            b = int.from_bytes(data[i : i + 16], "little")
            w, i = _read_weight(data, i + 16, monoid.code)
            items.append((b, w))
        return SigMap(monoid, tuple(items)), i
    if tag == _CONST_STR:
        (n,) = struct.unpack_from("<I", data, i)
        return SigConst(bytes(data[i + 4 : i + 4 + n]).decode("utf-8")), i + 4 + n
    if tag == _CONST_NAT:
        v, i = _read_natural(data, i)
        return SigConst(v), i
    raise ValueError(f"bad signature tag {tag} at offset {i - 1}")


def from_canonical_bytes(data: bytes) -> SigValue:
    if not data or data[0] != CANONICAL_VERSION:
        raise ValueError("unsupported canonical signature version")
    v, end = _get(data, 1)
    if end != len(data):
        raise ValueError("trailing bytes after signature")
    return v
