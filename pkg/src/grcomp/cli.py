"""Command-line front end: ``compress``, ``decompress``, ``stat`` and ``gen``.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 corrupt or divergent
stream, 4 recovered length differs from the header.
"""
from __future__ import annotations

import argparse
import json
import sys
from contextlib import ExitStack
from typing import BinaryIO, Sequence

from .decompressor import Decompressor
from .errors import GrcompError, IntegrityError
from .parser import compress_stream
from .strategies import Mode, StrategyConfig
from .testkit.corpora import generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_CORRUPT = 3
EXIT_INTEGRITY = 4

DEFAULT_K = 1 << 16
DEFAULT_EPS = 0.3
DEFAULT_ELL = 1 << 20

_SUFFIXES = {"K": 1 << 10, "M": 1 << 20, "G": 1 << 30}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for I/O errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_size(text: str) -> int:
    """Parse ``1M``, ``64K``, ``3G`` or a plain integer (suffixes are binary)."""
    s = text.strip()
    mult = 1
    if s and s[-1].upper() in _SUFFIXES:
        mult = _SUFFIXES[s[-1].upper()]
        s = s[:-1]
    try:
        value = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a size: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"size must be non-negative: {text!r}")
    return value * mult


def _rate(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError("mutation rate must be in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="grcomp", description="Streaming grammar compressor with bounded dictionaries.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compress", help="compress a byte stream")
    c.add_argument("-m", "--mode", choices=[m.name.lower() for m in Mode], default="lossy")
    c.add_argument("--k", type=parse_size, help=f"freq: dictionary size (default {DEFAULT_K})")
    c.add_argument("--eps", type=float, help=f"freq: vacancy rate in percent (default {DEFAULT_EPS})")
    c.add_argument("--ell", type=parse_size, help="lossy/block: interval length (default 1M)")
    c.add_argument("--alpha", type=float, default=1.0, help="hash table load factor")
    c.add_argument("-i", "--input", default="-")
    c.add_argument("-o", "--output", default="-")
    c.add_argument("--stats", action="store_true", help="print a JSON record on stderr")

    d = sub.add_parser("decompress", help="restore the original bytes")
    d.add_argument("--alpha", type=float, default=1.0)
    d.add_argument("-i", "--input", default="-")
    d.add_argument("-o", "--output", default="-")
    d.add_argument("--stats", action="store_true")

    s = sub.add_parser("stat", help="decode a container and report its statistics")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("-i", "--input", default="-")

    g = sub.add_parser("gen", help="write a noisy repetitive DNA corpus")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--base-size", type=parse_size, default=1 << 20)
    g.add_argument("--copies", type=int, default=1)
    g.add_argument("--mutation-rate", type=_rate, default=0.09)
    g.add_argument("-o", "--output", default="-")
    return p


def config_from_args(args: argparse.Namespace) -> StrategyConfig:
    """Resolve mode parameters, rejecting ones the mode does not use."""
    mode = Mode[args.mode.upper()]
    given = {name for name in ("k", "eps", "ell") if getattr(args, name) is not None}
    used = {Mode.PLAIN: set(), Mode.FREQ: {"k", "eps"}, Mode.LOSSY: {"ell"}, Mode.BLOCK: {"ell"}}[mode]
    extra = sorted(given - used)
    if extra:
        raise UsageError(f"{args.mode} mode does not take " + ", ".join("--" + e for e in extra))
    try:
        if mode == Mode.FREQ:
            k = DEFAULT_K if args.k is None else args.k
            eps = DEFAULT_EPS if args.eps is None else args.eps
            return StrategyConfig.freq(k, eps)
        if mode in (Mode.LOSSY, Mode.BLOCK):
            ell = DEFAULT_ELL if args.ell is None else args.ell
            return StrategyConfig(mode, ell=ell)
        return StrategyConfig.plain()
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _open_in(stack: ExitStack, path: str) -> BinaryIO:
    if path == "-":
        return sys.stdin.buffer
    return stack.enter_context(open(path, "rb"))


def _open_out(stack: ExitStack, path: str) -> BinaryIO:
    if path == "-":
        return sys.stdout.buffer
    return stack.enter_context(open(path, "wb"))


def _report(record: dict, stream) -> None:
    stream.write(json.dumps(record, sort_keys=True) + "\n")
    stream.flush()


def _compress(args, stack: ExitStack) -> None:
    config = config_from_args(args)
    src = _open_in(stack, args.input)
    dst = _open_out(stack, args.output)
    stats = compress_stream(src, config, dst, alpha=args.alpha)
    dst.flush()
    if args.stats:
        _report(stats.record(), sys.stderr)


def _decompress(args, stack: ExitStack) -> None:
    src = _open_in(stack, args.input)
    dst = _open_out(stack, args.output)
    stats = Decompressor(src, dst, alpha=args.alpha).run()
    dst.flush()
    if args.stats:
        _report(stats.record(), sys.stderr)


def _stat(args, stack: ExitStack) -> None:
    dec = Decompressor(_open_in(stack, args.input), None, alpha=args.alpha)
    stats = dec.run()
    header = dec.header
    record = stats.record()
    record.update(
        mode=header.mode.name.lower(),
        k=header.k,
        eps=header.eps_ppm / 10_000,
        ell=header.ell,
        original_length=header.original_length,
        leaves=stats.leaves,
        internals=stats.internals,
        structure_bits=stats.structure_bits,
    )
    _report(record, sys.stdout)


def _gen(args, stack: ExitStack) -> None:
    dst = _open_out(stack, args.output)
    for copy in generate(args.seed, args.base_size, args.copies, args.mutation_rate):
        dst.write(copy)
    dst.flush()


_COMMANDS = {"compress": _compress, "decompress": _decompress, "stat": _stat, "gen": _gen}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if getattr(args, "alpha", 1.0) <= 0:
        print("grcomp: error: --alpha must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        # parameter checks happen before any file is opened
        if args.command == "compress":
            config_from_args(args)
        with ExitStack() as stack:
            _COMMANDS[args.command](args, stack)
    except UsageError as exc:
        print(f"grcomp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrityError as exc:
        print(f"grcomp: integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except GrcompError as exc:
        print(f"grcomp: corrupt stream: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except OSError as exc:
        print(f"grcomp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())
