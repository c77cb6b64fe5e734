"""Generic partition refinement for coalgebras: sequential and distributed signature refinement."""

from .coalgebra import Coalgebra, parse_coalgebra, read_coalgebra, write_coalgebra, write_partition
from .distributed import orchestrate
from .encoding import EncodedCoalgebra, desort, encode_flat
from .errors import MonoidOverflow, ParseError, ProtocolError, SignatureError, SigrefineError
from .functor import parse_functor, pretty
from .oracle import brute_force_coarsest
from .refine import Partition, RefineResult, refine_sequential
from .signature import canonical_bytes, compute_signature, hash_id
from .wta import WtaSpec, generate_wta

__all__ = [
    "Coalgebra",
    "EncodedCoalgebra",
    "MonoidOverflow",
    "ParseError",
    "Partition",
    "ProtocolError",
    "RefineResult",
    "SignatureError",
    "SigrefineError",
    "WtaSpec",
    "brute_force_coarsest",
    "canonical_bytes",
    "compute_signature",
    "desort",
    "encode_flat",
    "generate_wta",
    "hash_id",
    "orchestrate",
    "parse_coalgebra",
    "parse_functor",
    "pretty",
    "read_coalgebra",
    "refine_sequential",
    "write_coalgebra",
    "write_partition",
]
