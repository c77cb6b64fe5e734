"""Sequential signature refinement (the final chain algorithm)."""

from __future__ import annotations

from dataclasses import dataclass, field

from .encoding import EncodedCoalgebra
from .signature import canonical_bytes, compute_signature, hash_id


@dataclass(frozen=True)
class Partition:
    """Dense block assignment: ``block_of[s]`` is in ``range(size)``."""

    block_of: tuple[int, ...]
    size: int

    @classmethod
    def from_ids(cls, ids) -> Partition:
        """Renumber arbitrary block ids densely in first-occurrence order."""
        fresh: dict = {}
        blocks = tuple(fresh.setdefault(b, len(fresh)) for b in ids)
        return cls(blocks, len(fresh))

    def blocks(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.size)]
        for s, b in enumerate(self.block_of):
            out[b].append(s)
        return out


@dataclass
class RefineResult:
    partition: Partition
    iterations: int
    history: list[int]
    rounds: list[list[int]] | None = field(default=None, repr=False)

    @property
    def splitting_rounds(self) -> int:
        return self.iterations - 1


def refinement_step(c: EncodedCoalgebra, pi, mode: str = "exact") -> list[int]:
    """New block ids for every state from signatures under ``pi``.

    Exact mode numbers distinct signatures densely in order of first
    occurrence; hashed mode uses the 128-bit digest of each signature.
    """
    if mode == "exact":
        table: dict[bytes, int] = {}
        return [table.setdefault(canonical_bytes(compute_signature(c, s, pi)), len(table)) for s in range(c.n_prime)]
    if mode == "hashed":
        return [hash_id(canonical_bytes(compute_signature(c, s, pi))) for s in range(c.n_prime)]
    raise ValueError(f"unknown mode {mode!r}")


def refine_sequential(c: EncodedCoalgebra, mode: str = "exact", keep_rounds: bool = False) -> RefineResult:
    """Coarsest partition on which the signatures are constant.

    Starts from the one-block partition and refines until two consecutive
    partitions have the same number of blocks. ``history`` lists the block
    count after every round over all ``n_prime`` states; the returned
    partition is restricted to the original states.
    """
    pi_new = [0] * c.n_prime
    size_old, size_new = -1, (1 if c.n_prime else 0)
    history: list[int] = []
    rounds: list[list[int]] = []
    while size_old != size_new:
        pi = pi_new
        pi_new = refinement_step(c, pi, mode)
        size_old, size_new = size_new, len(set(pi_new))
        history.append(size_new)
        if keep_rounds:
            rounds.append(pi_new)
    return RefineResult(
        partition=Partition.from_ids(pi_new[: c.n]),
        iterations=len(history),
        history=history,
        rounds=rounds if keep_rounds else None,
    )


def stabilize_check(c: EncodedCoalgebra, pi) -> bool:
    """True when one refinement step splits no block of ``pi``.

    ``pi`` covers all ``n_prime`` states. The step is intersected with
    ``pi`` itself, so for partitions outside the refinement chain this is
    the plain stability test.
    """
    step = refinement_step(c, pi, "exact")
    return len(set(zip(pi, step))) == len(set(pi))
