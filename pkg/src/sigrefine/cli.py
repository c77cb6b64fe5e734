"""Command-line interface: ``sigrefine {minimize,generate-wta,split,worker,oracle-check}``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .coalgebra import read_coalgebra, write_partition
from .distributed import load_slice, orchestrate, peak_rss, run_tcp_worker, write_slices
from .encoding import desort
from .errors import MonoidOverflow, ParseError, ProtocolError, SignatureError
from .oracle import MAX_ORACLE_STATES, brute_force_coarsest
from .refine import refine_sequential
from .transport import read_roster
from .wta import MONOIDS, WtaSpec, generate_wta

EXIT_OK, EXIT_INPUT, EXIT_PROTOCOL, EXIT_OVERFLOW, EXIT_MISMATCH = 0, 1, 2, 3, 4
ENGINES = ("seq-exact", "seq-hashed", "dist-inproc", "dist-tcp")


def _load(path):
    return read_coalgebra(Path(path).read_text(encoding="utf-8"))


def _emit(text: str, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def write_stats(path, stats: dict):
    lines = []
    for key, value in stats.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_stats(path) -> dict[str, str]:
    stats = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, sep, value = line.partition("=")
        if sep:
            stats[key.strip()] = value.strip()
    return stats


def cmd_minimize(args) -> int:
    start = time.perf_counter()
    c = _load(args.input)
    enc = desort(c)
    roster = None
    workers = args.workers
    if args.engine == "dist-tcp" and args.roster:
        roster = args.roster
        size = len(read_roster(roster))
        if workers is None:
            workers = size
        elif workers != size:
            raise ProtocolError(f"roster lists {size} workers but -W is {workers}")
    workers = workers or 1
    if workers < 1:
        raise ValueError("-W must be at least 1")
    match args.engine:
        case "seq-exact" | "seq-hashed":
            result = refine_sequential(enc, mode=args.engine.removeprefix("seq-"))
            rss = [peak_rss()]
        case "dist-inproc":
            result = orchestrate(enc, workers, "inproc", seed=args.seed)
            # all workers share one process here
            rss = result.peak_rss_per_worker
        case "dist-tcp":
            result = orchestrate(enc, workers, "tcp", roster=roster)
            rss = result.peak_rss_per_worker
    wall_ms = round((time.perf_counter() - start) * 1000)
    _emit(write_partition(result.partition.block_of, c.names), args.output)
    if args.stats:
        write_stats(
            args.stats,
            {
                "n": enc.n,
                "m": enc.m,
                "n_prime": enc.n_prime,
                "iterations": result.iterations,
                "blocks": result.partition.size,
                "wall_ms": wall_ms,
                "peak_rss_bytes_per_worker": rss,
            },
        )
    return EXIT_OK


def cmd_generate(args) -> int:
    spec = WtaSpec(args.states, args.rank, args.monoid, args.seed)
    _emit(generate_wta(spec), args.out)
    return EXIT_OK


def cmd_split(args) -> int:
    enc = desort(_load(args.input))
    manifest = write_slices(enc, args.workers, args.out)
    print(manifest)
    return EXIT_OK


def cmd_worker(args) -> int:
    roster = read_roster(args.roster)
    report = run_tcp_worker(args.manifest, args.id, roster)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_json()) + "\n", encoding="utf-8")
    if args.output and report.blocks is not None:
        manifest, _ = load_slice(args.manifest, args.id, len(roster))
        _emit(write_partition(report.blocks, manifest["names"]), args.output)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    c = _load(args.input)
    if len(c.names) > MAX_ORACLE_STATES:
        print(f"error: the oracle handles at most {MAX_ORACLE_STATES} states, input has {len(c.names)}", file=sys.stderr)
        return EXIT_INPUT
    expected = brute_force_coarsest(c)
    enc = desort(c)
    ok = True
    for mode in ("exact", "hashed"):
        got = refine_sequential(enc, mode).partition
        agree = got == expected
        ok &= agree
        print(f"{mode}: {'agree' if agree else 'MISMATCH'}")
    sys.stdout.write(write_partition(expected.block_of, c.names))
    return EXIT_OK if ok else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sigrefine", description="Minimize coalgebras by signature refinement.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("minimize", help="compute the coarsest behavioural equivalence")
    p.add_argument("input")
    p.add_argument("--engine", choices=ENGINES, default="seq-exact")
    p.add_argument("-W", "--workers", type=int, default=None, help="number of workers for dist engines")
    p.add_argument("--seed", type=int, default=0, help="scheduler seed for dist-inproc")
    p.add_argument("--roster", help="roster file for dist-tcp (default: free localhost ports)")
    p.add_argument("-o", "--output", help="partition file (default: stdout)")
    p.add_argument("--stats", help="write key=value run statistics here")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("generate-wta", help="write a random weighted tree automaton")
    p.add_argument("--states", type=int, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--monoid", choices=MONOIDS, default="max")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("split", help="write per-worker slice files and a manifest")
    p.add_argument("input")
    p.add_argument("-W", "--workers", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("worker", help="run one worker of a TCP cluster")
    p.add_argument("--manifest", required=True)
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--roster", required=True)
    p.add_argument("--report", help="write this worker's JSON report here")
    p.add_argument("-o", "--output", help="worker 0 writes the partition here")
    p.set_defaults(func=cmd_worker)

    p = sub.add_parser("oracle-check", help="compare refinement with brute force on a tiny input")
    p.add_argument("input")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {args_input(args)}{exc}", file=sys.stderr)
        return EXIT_INPUT
    except MonoidOverflow as exc:
        print(f"error: monoid overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except (ProtocolError, SignatureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def args_input(args) -> str:
    path = getattr(args, "input", None)
    return f"{path}: " if path else ""
