"""Command-line front end: ``castore put|get|verify|scrub|stats|analyze``.

Exit codes: 0 success, 1 usage error, 2 not found, 3 integrity failure.
Every global flag can also be set through the environment variable named
in its help text.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Sequence

from castore import probability as prob
from castore import reports
from castore.errors import ContentTooLarge, IntegrityError, ObjectNotFound, SchemeMismatch
from castore.naming import MAX_CONTENT_BYTES, ContentAddress, NamingScheme
from castore.store import ClusterConfig, Store

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_FOUND = 2
EXIT_INTEGRITY = 3

ENV_PREFIX = "CASTORE_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_number(text: str):
    """Parse ``1000``, ``3.15e13`` or ``2^124``; integral values come back as int."""
    text = text.strip()
    try:
        if "^" in text:
            base, _, exp = text.partition("^")
            value = float(base) ** float(exp)
            if float(base).is_integer() and float(exp).is_integer() and float(exp) >= 0:
                return int(float(base)) ** int(float(exp))
            return value
        try:
            return int(text)
        except ValueError:
            value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value.is_integer() and abs(value) < 2**53:
        return int(value)
    return value


def _env_default(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def default(name, fallback=None):
        return argparse.SUPPRESS if suppress else _env_default(name, fallback)

    parser.add_argument("--store", default=default("store"), help="store root directory [CASTORE_STORE]")
    parser.add_argument("--scheme", default=default("scheme"), help="naming scheme m|gm|mpp [CASTORE_SCHEME]")
    parser.add_argument("--seed", default=default("seed"), help="fixed generator seed for reproducible runs [CASTORE_SEED]")
    parser.add_argument("--clock", default=default("clock"), help="frozen clock in Unix milliseconds [CASTORE_CLOCK]")
    parser.add_argument(
        "--format", default=default("format", "text"), help="output format text|rows [CASTORE_FORMAT]"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="castore", description="Content-addressed object store and collision calculators.")
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("put", parents=[common], help="store a file and print its address")
    p.add_argument("path")
    p.add_argument("--kind", choices=("blob", "clip"), default="blob")

    p = sub.add_parser("get", parents=[common], help="write an object's verified content to a file")
    p.add_argument("ca")
    p.add_argument("out", help="output path, or - for stdout")

    p = sub.add_parser("verify", parents=[common], help="check every replica of one object")
    p.add_argument("ca")

    sub.add_parser("scrub", parents=[common], help="verify all replicas and repair damaged ones")
    sub.add_parser("stats", parents=[common], help="object counts and current collision bound")

    a = sub.add_parser("analyze", parents=[common], help="collision and attack-cost calculators")
    asub = a.add_subparsers(dest="analysis", required=True, parser_class=_Parser)

    p = asub.add_parser("m", parents=[common], help="M scheme collision bound")
    p.add_argument("--files", "-q", type=parse_number, required=True)

    p = asub.add_parser("mpp", parents=[common], help="M++ scheme collision bound")
    p.add_argument("--files", "-q", type=parse_number, required=True)

    p = asub.add_parser("gm", parents=[common], help="GM scheme collision probability")
    p.add_argument("-A", dest="A", type=parse_number, required=True, help="access nodes")
    p.add_argument("-S", dest="S", type=parse_number, required=True, help="peak files/second/node")
    p.add_argument("-Z", dest="Z", type=parse_number, default=None, help="duration in milliseconds")

    p = asub.add_parser("birthday", parents=[common], help="birthday problem")
    p.add_argument("-q", type=parse_number, required=True, help="balls (people)")
    p.add_argument("-N", type=parse_number, required=True, help="buckets (days)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--any-pair", dest="mode", action="store_const", const="any-pair")
    mode.add_argument("--same-as-you", dest="mode", action="store_const", const="same-as-you")
    mode.add_argument("--bound", dest="mode", action="store_const", const="bound")

    p = asub.add_parser("montecarlo", parents=[common], help="simulated birthday collisions")
    p.add_argument("-q", type=parse_number, required=True)
    p.add_argument("-N", type=parse_number, required=True)
    p.add_argument("--trials", type=parse_number, default=10_000)

    p = asub.add_parser("preimage", parents=[common], help="long-message second-preimage cost")
    p.add_argument("-n", type=int, default=128, help="hash width in bits")
    p.add_argument("-k", type=int, default=None, help="log2 of message blocks (default: from the 100 MB limit)")

    asub.add_parser("table1", parents=[common], help="M collision probability by object count")
    asub.add_parser("table2", parents=[common], help="summary of naming-scheme strength")
    return parser


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt_prob(p: prob.Probability) -> str:
    if not p.is_zero and p.value >= 1e-4:
        return f"{p.value:.6f} = {p.decimal()} = {p.power_of_two()}"
    return f"{p.decimal()} = {p.power_of_two()}"


def _emit_quantities(args, title: str, items: list[tuple[str, object]]) -> None:
    if args.format == "rows":
        print("quantity,decimal,log2")
        for name, value in items:
            if isinstance(value, prob.Probability):
                print(f"{name},{value.decimal()},{value.power_of_two()}")
            else:
                print(f"{name},{value},")
        return
    print(title)
    width = max(len(name) for name, _ in items)
    for name, value in items:
        shown = _fmt_prob(value) if isinstance(value, prob.Probability) else str(value)
        print(f"  {name.ljust(width)}  {shown}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _open_store(args) -> Store:
    if not args.store:
        raise UsageError("no store given (use --store or CASTORE_STORE)")
    scheme = NamingScheme.parse(args.scheme) if args.scheme else None
    clock = None
    if args.clock is not None:
        try:
            clock = int(args.clock)
        except ValueError:
            raise UsageError(f"--clock must be an integer millisecond count, got {args.clock!r}") from None
    config = ClusterConfig(
        root=args.store,
        scheme=scheme,
        test_seed=args.seed.encode() if args.seed else None,
        frozen_clock=clock,
    )
    return Store(config)


def _parse_ca(text: str, store: Store) -> ContentAddress:
    try:
        return ContentAddress.parse(text, None if ":" in text else store.scheme)
    except ValueError as exc:
        raise UsageError(f"bad content address {text!r}: {exc}") from None


def cmd_put(args) -> int:
    try:
        size = os.path.getsize(args.path)
        if size > MAX_CONTENT_BYTES:
            raise ContentTooLarge(f"{args.path} is {size} bytes; limit is {MAX_CONTENT_BYTES}")
        with open(args.path, "rb") as fh:
            content = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.path}: {exc.strerror or exc}") from None
    with _open_store(args) as store:
        ca = store.write(content, args.kind)
    if args.format == "rows":
        print(f"{ca},{args.kind},{len(content)}")
    else:
        print(ca)
    return EXIT_OK


def cmd_get(args) -> int:
    with _open_store(args) as store:
        content = store.read(_parse_ca(args.ca, store))
    if args.out == "-":
        sys.stdout.buffer.write(content)
        sys.stdout.buffer.flush()
    else:
        with open(args.out, "wb") as fh:
            fh.write(content)
    return EXIT_OK


def cmd_verify(args) -> int:
    with _open_store(args) as store:
        ca = _parse_ca(args.ca, store)
        statuses = store.verify(ca)
    for st in statuses:
        state = "ok" if st.healthy else "CORRUPT"
        if args.format == "rows":
            print(f"{ca},{st.index},{state.lower()},{st.path}")
        else:
            extra = f" ({st.reason})" if st.reason else ""
            print(f"replica {st.index} {st.path}: {state}{extra}")
    return EXIT_OK if all(st.healthy for st in statuses) else EXIT_INTEGRITY


def cmd_scrub(args) -> int:
    with _open_store(args) as store:
        report = store.scrub()
    n_bad = len(report.corruptions_detected)
    if args.format == "rows":
        print(f"objects_checked,{report.objects_checked}")
        print(f"corruptions,{n_bad}")
        print(f"repairs,{report.repairs_made}")
        print(f"unrecoverable,{len(report.unrecoverable)}")
        for ca, idx in report.corruptions_detected:
            print(f"corruption,{ca},{idx}")
        for ca in report.unrecoverable:
            print(f"unrecoverable_object,{ca}")
    else:
        print(
            f"checked {report.objects_checked} replicas: {n_bad} corruptions, "
            f"{report.repairs_made} repaired, {len(report.unrecoverable)} unrecoverable"
        )
        for ca, idx in report.corruptions_detected:
            print(f"  corrupt replica {idx} of {ca}")
        for ca in report.unrecoverable:
            print(f"  UNRECOVERABLE {ca}")
    return EXIT_INTEGRITY if report.unrecoverable else EXIT_OK


def cmd_stats(args) -> int:
    with _open_store(args) as store:
        st = store.stats()
    p = st.collision_probability
    items: list[tuple[str, object]] = [
        ("scheme", st.scheme.value),
        ("objects", st.objects),
        ("bytes", st.bytes),
        *((f"kind_{k}", v) for k, v in st.by_kind.items()),
        *((f"scheme_{k}", v) for k, v in st.by_scheme.items()),
    ]
    if args.format == "rows":
        for name, value in items:
            print(f"{name},{value}")
        if p is None:
            print("collision_probability,n/a,n/a")
        else:
            print(f"collision_probability,{p.decimal()},{p.power_of_two()}")
        return EXIT_OK
    for name, value in items:
        print(f"{name}: {value}")
    print(f"collision probability: {'n/a (GM)' if p is None else _fmt_prob(p)}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    kind = args.analysis
    if kind == "table1":
        print(reports.emit_table1().render(args.format), end="")
    elif kind == "table2":
        print(reports.emit_table2().render(args.format), end="")
    elif kind == "m":
        _emit_quantities(args, f"M collision bound for {args.files} files", [("m_collision", prob.m_collision(args.files))])
    elif kind == "mpp":
        _emit_quantities(
            args, f"M++ collision bound for {args.files} files", [("mpp_collision", prob.mpp_collision(args.files))]
        )
    elif kind == "gm":
        items: list[tuple[str, object]] = []
        if isinstance(args.A, int) and isinstance(args.S, int):
            items.append(("gm_set_size", prob.gm_set_size(args.A, args.S)))
        items.append(("gm_collision_per_ms", prob.gm_collision_per_ms(args.A, args.S)))
        if args.Z is not None:
            items.append(("gm_collision_over", prob.gm_collision_over(args.A, args.S, args.Z)))
        _emit_quantities(args, f"GM collision probability (A={args.A}, S={args.S}, Z={args.Z} ms)", items)
    elif kind == "birthday":
        mode = args.mode or "any-pair"
        if mode == "any-pair":
            if not isinstance(args.q, int):
                raise UsageError("-q must be an integer for the exact computation")
            p = prob.exact_birthday(args.q, args.N)
            name = "exact_birthday"
        elif mode == "same-as-you":
            p = prob.same_birthday_as_you(args.q, args.N)
            name = "same_birthday_as_you"
        else:
            p = prob.collision_bound(args.q, args.N)
            name = "collision_bound"
        _emit_quantities(args, f"Birthday problem ({mode}), q={args.q}, N={args.N}", [(name, p)])
    elif kind == "montecarlo":
        seed = args.seed if args.seed is not None else "0"
        res = prob.monte_carlo_birthday(args.q, args.N, args.trials, seed=seed.encode())
        items = [
            ("collisions", res.collisions),
            ("trials", res.trials),
            ("empirical_rate", f"{res.rate:.6f}"),
            ("standard_error", f"{res.stderr:.6f}"),
        ]
        if args.q <= args.N and args.q <= prob.EXACT_PRODUCT_LIMIT:
            items.append(("exact_birthday", prob.exact_birthday(args.q, args.N)))
        if args.N > args.q > 1:
            items.append(("collision_bound", prob.collision_bound(args.q, args.N)))
        _emit_quantities(args, f"Monte Carlo birthday, q={args.q}, N={args.N}", items)
    elif kind == "preimage":
        k = args.k if args.k is not None else prob.block_count_exponent(MAX_CONTENT_BYTES)
        cost = prob.second_preimage_cost(args.n, k)
        items = [
            ("k", k),
            ("log2_work_full", f"{cost.log2_full:.4f}"),
            ("log2_work_dominant", f"{cost.log2_dominant:.4f}"),
        ]
        _emit_quantities(args, f"Second-preimage work for n={args.n}, 2^{k} blocks", items)
    return EXIT_OK


COMMANDS = {
    "put": cmd_put,
    "get": cmd_get,
    "verify": cmd_verify,
    "scrub": cmd_scrub,
    "stats": cmd_stats,
    "analyze": cmd_analyze,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format not in ("text", "rows"):
        parser.error(f"--format must be text or rows, got {args.format!r}")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ContentTooLarge, SchemeMismatch, ValueError, TypeError) as exc:
        print(f"castore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ObjectNotFound as exc:
        print(f"castore: not found: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except IntegrityError as exc:
        print(f"castore: integrity failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY


if __name__ == "__main__":
    sys.exit(main())
