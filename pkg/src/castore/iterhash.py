"""Iterated hashing over a pluggable compression function.

Two constructions are provided:

* :func:`iterate` - the plain chain ``H_0 = IV``, ``H_i = f(H_{i-1}, X_i)``,
  ``h = g(H_t)`` after padding the message into ``b``-bit blocks.
* :func:`md_construct` - the Damgård/Merkle variant in which the first
  block is fed as ``0^(n+1) || X_1``, later ones as ``H || 1 || X_i``, and a
  final block carries the message length.

Messages are bit strings written as ``str`` of ``'0'``/``'1'``; chaining
values and blocks passed to the compression function are unsigned ints.
This is a testbed for small widths and a readable restatement of MD5's
outer loop, not a fast hashing path.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable


@dataclass(frozen=True)
class CompressionFn:
    """``fn(chain, block)`` mapping an ``n``-bit chain and ``b``-bit block to ``n`` bits."""

    n: int
    b: int
    fn: Callable[[int, int], int]
    name: str = "f"

    @property
    def l(self) -> int:  # noqa: E743 - conventional name for the input width
        return self.n + self.b

    def __call__(self, chain: int, block: int) -> int:
        out = self.fn(chain, block)
        if out < 0 or out >> self.n:
            raise ValueError(f"{self.name} produced a value wider than {self.n} bits")
        return out


class TracingCompression:
    """Wraps a :class:`CompressionFn` and records every call as ``(chain, block, out)``."""

    def __init__(self, f: CompressionFn) -> None:
        self.f = f
        self.n, self.b = f.n, f.b
        self.calls: list[tuple[int, int, int]] = []

    def __call__(self, chain: int, block: int) -> int:
        out = self.f(chain, block)
        self.calls.append((chain, block, out))
        return out


# ---------------------------------------------------------------------------
# bit-string helpers
# ---------------------------------------------------------------------------


def bytes_to_bits(data: bytes) -> str:
    return "".join(f"{byte:08b}" for byte in data)


def bits_to_bytes(bits: str) -> bytes:
    if len(bits) % 8:
        raise ValueError("bit string length is not a multiple of 8")
    return bytes(int(bits[i:i + 8], 2) for i in range(0, len(bits), 8))


def int_to_bits(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def split_blocks(bits: str, b: int) -> list[str]:
    if len(bits) % b:
        raise ValueError(f"padded length {len(bits)} is not a multiple of {b}")
    return [bits[i:i + b] for i in range(0, len(bits), b)]


# ---------------------------------------------------------------------------
# padding rules for iterate()
# ---------------------------------------------------------------------------


def pad_zeros(msg: str, b: int, length_bits: int = 0) -> str:
    """Zero-fill to a block boundary.  Ambiguous; kept as a counterexample."""
    return msg + "0" * (-len(msg) % b)


def pad_md_strengthen(msg: str, b: int, length_bits: int = 64) -> str:
    """Append 1, zeros, then the message bit length in ``length_bits`` bits (big-endian)."""
    if len(msg) >> length_bits:
        raise ValueError(f"message too long for a {length_bits}-bit length field")
    body = msg + "1"
    body += "0" * (-(len(body) + length_bits) % b)
    return body + int_to_bits(len(msg), length_bits)


def pad_md5(msg: str, b: int = 512, length_bits: int = 64) -> str:
    """RFC 1321 padding: like MD-strengthening but the 64-bit length is little-endian."""
    if b != 512 or length_bits != 64:
        raise ValueError("MD5 padding is defined for 512-bit blocks only")
    body = msg + "1"
    body += "0" * (-(len(body) + 64) % 512)
    length = (len(msg) & ((1 << 64) - 1)).to_bytes(8, "little")
    return body + bytes_to_bits(length)


PADDING_RULES: dict[str, Callable[..., str]] = {
    "zero": pad_zeros,
    "md-strengthen": pad_md_strengthen,
    "md5": pad_md5,
}


def _output_identity(value: int, n: int) -> int:
    return value


def _output_base32(value: int, n: int) -> str:
    from castore.base32 import encode_base32

    return encode_base32(value, n)


OUTPUT_TRANSFORMS: dict[str, Callable[[int, int], object]] = {
    "identity": _output_identity,
    "base32": _output_base32,
}


@dataclass(frozen=True)
class IteratedHashSpec:
    iv: int
    n: int
    b: int
    padding_rule: str = "md-strengthen"
    output_transform: str = "identity"
    length_bits: int = 64

    def __post_init__(self) -> None:
        if self.padding_rule not in PADDING_RULES:
            raise ValueError(f"unknown padding rule {self.padding_rule!r}")
        if self.output_transform not in OUTPUT_TRANSFORMS:
            raise ValueError(f"unknown output transform {self.output_transform!r}")
        if self.iv < 0 or self.iv >> self.n:
            raise ValueError(f"IV does not fit in {self.n} bits")

    def pad(self, msg: str) -> str:
        return PADDING_RULES[self.padding_rule](msg, self.b, self.length_bits)


def iterate(spec: IteratedHashSpec, f, msg: str):
    """Pad ``msg``, fold ``f`` over its blocks starting from ``spec.iv`` and apply g."""
    if (f.n, f.b) != (spec.n, spec.b):
        raise ValueError(
            f"compression function widths (n={f.n}, b={f.b}) do not match spec (n={spec.n}, b={spec.b})"
        )
    h = spec.iv
    for block in split_blocks(spec.pad(msg), spec.b):
        h = f(h, int(block, 2))
    return OUTPUT_TRANSFORMS[spec.output_transform](h, spec.n)


# ---------------------------------------------------------------------------
# Damgård/Merkle construction
# ---------------------------------------------------------------------------


def md_encode(msg: str, n: int, l: int) -> list[str]:  # noqa: E741
    """Split ``msg`` into ``l - n - 1``-bit data blocks plus a trailing length block.

    The last data block is zero-filled; the length block holds ``len(msg)``
    as an ``l - n - 1``-bit big-endian integer, which makes the encoding
    injective and suffix-free.
    """
    r = l - n - 1
    if r < 1:
        raise ValueError(f"need l - n > 1, got l={l}, n={n}")
    if len(msg) >> r:
        raise ValueError(f"message of {len(msg)} bits does not fit the {r}-bit length block")
    data = msg + "0" * (-len(msg) % r)
    return split_blocks(data, r) + [int_to_bits(len(msg), r)] if data else [int_to_bits(0, r)]


def md_construct(f, msg: str) -> int:
    """Damgård/Merkle chaining.

    ``f`` is called as ``f(chain, marker_and_block)``: the first call gets
    chain 0 and marker bit 0 (together the ``0^(n+1)`` prefix), every later
    call gets the previous output and marker bit 1.
    """
    n, b = f.n, f.b
    if b <= 1:
        raise ValueError(f"compression input must exceed output by more than 1 bit (l - n = {b})")
    r = b - 1
    blocks = md_encode(msg, n, n + b)
    h = f(0, int(blocks[0], 2))
    for block in blocks[1:]:
        h = f(h, (1 << r) | int(block, 2))
    return h


def md_inputs(f, msg: str) -> list[tuple[int, int]]:
    """The sequence of ``(chain, block)`` inputs md_construct feeds to ``f``."""
    tracer = TracingCompression(f)
    md_construct(tracer, msg)
    return [(chain, block) for chain, block, _ in tracer.calls]


@dataclass(frozen=True)
class StageCollision:
    stage: int
    input_a: tuple[int, int]
    input_b: tuple[int, int]
    output: int


def compression_collision_witness(f, msg_a: str, msg_b: str) -> StageCollision:
    """Given colliding messages, find the stage where ``f`` itself collides.

    Walks both input traces backwards from the final call.  Equal outputs
    with unequal inputs is the witness; equal inputs mean the previous
    chaining values were equal too, so the walk steps back a stage.
    """
    if msg_a == msg_b:
        raise ValueError("messages are identical")
    trace_a, trace_b = TracingCompression(f), TracingCompression(f)
    out_a = md_construct(trace_a, msg_a)
    out_b = md_construct(trace_b, msg_b)
    if out_a != out_b:
        raise ValueError("messages do not collide")
    ia, ib = len(trace_a.calls) - 1, len(trace_b.calls) - 1
    while ia >= 0 and ib >= 0:
        ca, ba, oa = trace_a.calls[ia]
        cb, bb, ob = trace_b.calls[ib]
        assert oa == ob
        if (ca, ba) != (cb, bb):
            return StageCollision(stage=ia + 1, input_a=(ca, ba), input_b=(cb, bb), output=oa)
        ia, ib = ia - 1, ib - 1
    # Only reachable if one encoding is a suffix of the other.
    raise AssertionError("no stage collision found; encoding is not suffix-free")


# ---------------------------------------------------------------------------
# toy compression functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SboxCompression:
    """Compression ``l -> n`` bits built from fixed random byte substitution tables.

    For n = 8 the ``l``-bit input is cut into bytes that are absorbed one
    at a time through a random permutation, so the result depends on every
    input bit yet collisions are plentiful.
    """

    n: int = 8
    b: int = 16
    seed: int = 2004
    tables: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n != 8:
            raise ValueError("toy S-box compression is defined for n = 8 only")
        rng = random.Random(self.seed)
        nbytes = -(-(self.n + self.b) // 8)
        tables = []
        for _ in range(nbytes):
            perm = list(range(256))
            rng.shuffle(perm)
            tables.append(tuple(perm))
        object.__setattr__(self, "tables", tuple(tables))

    def __call__(self, chain: int, block: int) -> int:
        x = (chain << self.b) | block
        acc = 0
        for i, table in enumerate(self.tables):
            acc = table[acc ^ ((x >> (8 * i)) & 0xFF)]
        return acc


def md5_compression() -> CompressionFn:
    """MD5's compression function over 128-bit chains and 512-bit blocks.

    Chains and blocks are the big-endian readings of the byte strings MD5
    works on, so they line up with :func:`bytes_to_bits`.
    """
    from castore.digests import Md5State, md5_compress

    def fn(chain: int, block: int) -> int:
        state = Md5State.from_bytes(chain.to_bytes(16, "big"))
        out = md5_compress(state, block.to_bytes(64, "big"))
        return int.from_bytes(out.to_bytes(), "big")

    return CompressionFn(n=128, b=512, fn=fn, name="md5_compress")


def md5_spec() -> IteratedHashSpec:
    from castore.digests import Md5State

    iv = int.from_bytes(Md5State.initial().to_bytes(), "big")
    return IteratedHashSpec(iv=iv, n=128, b=512, padding_rule="md5")
