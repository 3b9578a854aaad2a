"""MD5 (RFC 1321) and SHA-256 (FIPS 180-2) written out in pure Python.

MD5 internals (round functions, step constants, shift amounts, IV and the
compression function) are public so they can be inspected and tested on
their own.  Both digests have a hashlib-style streaming object and a
one-shot helper.

The ``native`` switches on :func:`md5` and :func:`sha256` route to
:mod:`hashlib` instead; the outputs are identical, the native path is just
much faster on large inputs.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

MASK32 = 0xFFFFFFFF

# Practical ceiling on digest input; enforced by the naming/store layers.
MAX_INPUT_BYTES = 100_000_000


# ---------------------------------------------------------------------------
# MD5
# ---------------------------------------------------------------------------

# Step constants: floor(abs(sin(i + 1)) * 2**32).
MD5_K = tuple(int(abs(math.sin(i + 1)) * 2**32) & MASK32 for i in range(64))

MD5_SHIFTS = (
    (7, 12, 17, 22) * 4
    + (5, 9, 14, 20) * 4
    + (4, 11, 16, 23) * 4
    + (6, 10, 15, 21) * 4
)

# Which message word each step consumes.
MD5_WORD_INDEX = tuple(
    [i for i in range(16)]
    + [(5 * i + 1) % 16 for i in range(16)]
    + [(3 * i + 5) % 16 for i in range(16)]
    + [(7 * i) % 16 for i in range(16)]
)


def md5_phi(round_index: int, x: int, y: int, z: int) -> int:
    """Round function for MD5 round ``round_index`` (1..4).

    1: if x then y else z; 2: if z then x else y; 3: parity; 4: y ^ (x | ~z).
    """
    if round_index == 1:
        return ((x & y) | (~x & z)) & MASK32
    if round_index == 2:
        return ((x & z) | (y & ~z)) & MASK32
    if round_index == 3:
        return x ^ y ^ z
    if round_index == 4:
        return (y ^ (x | (~z & MASK32))) & MASK32
    raise ValueError(f"MD5 round index must be 1..4, got {round_index!r}")


@dataclass(frozen=True)
class Md5State:
    """The four 32-bit chaining variables A, B, C, D."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        for name in "abcd":
            v = getattr(self, name)
            if not 0 <= v <= MASK32:
                raise ValueError(f"chaining variable {name} out of 32-bit range: {v!r}")

    @classmethod
    def initial(cls) -> Md5State:
        # Byte strings 01 23 45 67 / 89 ab cd ef / ... read as little-endian words.
        return cls(0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476)

    def to_bytes(self) -> bytes:
        return struct.pack("<4I", self.a, self.b, self.c, self.d)

    @classmethod
    def from_bytes(cls, raw: bytes) -> Md5State:
        if len(raw) != 16:
            raise ValueError(f"MD5 state is 16 bytes, got {len(raw)}")
        return cls(*struct.unpack("<4I", raw))


def md5_compress(state: Md5State, block: bytes) -> Md5State:
    """Run the 64 MD5 steps over one 64-byte block and add in the input state."""
    if len(block) != 64:
        raise ValueError(f"MD5 block must be 64 bytes, got {len(block)}")
    return Md5State(*_md5_compress_words(state.a, state.b, state.c, state.d, block))


def _md5_compress_words(a0: int, b0: int, c0: int, d0: int, block: bytes) -> tuple[int, int, int, int]:
    x = struct.unpack("<16I", block)
    a, b, c, d = a0, b0, c0, d0
    K, S, W = MD5_K, MD5_SHIFTS, MD5_WORD_INDEX
    for i in range(16):
        f = (b & c) | (~b & d)
        t = (a + f + K[i] + x[i]) & MASK32
        a, d, c, b = d, c, b, (b + ((t << S[i]) | (t >> (32 - S[i])))) & MASK32
    for i in range(16, 32):
        f = (d & b) | (~d & c)
        t = (a + f + K[i] + x[W[i]]) & MASK32
        a, d, c, b = d, c, b, (b + ((t << S[i]) | (t >> (32 - S[i])))) & MASK32
    for i in range(32, 48):
        f = b ^ c ^ d
        t = (a + f + K[i] + x[W[i]]) & MASK32
        a, d, c, b = d, c, b, (b + ((t << S[i]) | (t >> (32 - S[i])))) & MASK32
    for i in range(48, 64):
        f = c ^ (b | (~d & MASK32))
        t = (a + f + K[i] + x[W[i]]) & MASK32
        a, d, c, b = d, c, b, (b + ((t << S[i]) | (t >> (32 - S[i])))) & MASK32
    return (
        (a0 + a) & MASK32,
        (b0 + b) & MASK32,
        (c0 + c) & MASK32,
        (d0 + d) & MASK32,
    )


def md5_pad(message_length: int) -> bytes:
    """Padding appended to a message of ``message_length`` bytes."""
    zeros = (55 - message_length) % 64
    return b"\x80" + b"\x00" * zeros + struct.pack("<Q", (message_length * 8) & 0xFFFFFFFFFFFFFFFF)


class Md5:
    """Streaming MD5 context with a hashlib-like interface."""

    name = "md5"
    digest_size = 16
    block_size = 64

    def __init__(self, data: bytes = b"") -> None:
        s = Md5State.initial()
        self._h = (s.a, s.b, s.c, s.d)
        self._buf = b""
        self._length = 0
        if data:
            self.update(data)

    def update(self, data: bytes) -> None:
        data = bytes(data)
        self._length += len(data)
        buf = self._buf + data
        h = self._h
        end = len(buf) - len(buf) % 64
        for off in range(0, end, 64):
            h = _md5_compress_words(*h, buf[off:off + 64])
        self._h = h
        self._buf = buf[end:]

    def copy(self) -> Md5:
        other = Md5.__new__(Md5)
        other._h, other._buf, other._length = self._h, self._buf, self._length
        return other

    def digest(self) -> bytes:
        tail = self._buf + md5_pad(self._length)
        h = self._h
        for off in range(0, len(tail), 64):
            h = _md5_compress_words(*h, tail[off:off + 64])
        return struct.pack("<4I", *h)

    def hexdigest(self) -> str:
        return self.digest().hex()


def md5(data: bytes, *, native: bool = False) -> bytes:
    """16-byte MD5 digest of ``data``."""
    if native:
        return hashlib.md5(data).digest()
    return Md5(data).digest()


# ---------------------------------------------------------------------------
# SHA-256
# ---------------------------------------------------------------------------

SHA256_K = (
    0x428A2F98, 0x71374491, 0xB5C0FBCF, 0xE9B5DBA5, 0x3956C25B, 0x59F111F1, 0x923F82A4, 0xAB1C5ED5,
    0xD807AA98, 0x12835B01, 0x243185BE, 0x550C7DC3, 0x72BE5D74, 0x80DEB1FE, 0x9BDC06A7, 0xC19BF174,
    0xE49B69C1, 0xEFBE4786, 0x0FC19DC6, 0x240CA1CC, 0x2DE92C6F, 0x4A7484AA, 0x5CB0A9DC, 0x76F988DA,
    0x983E5152, 0xA831C66D, 0xB00327C8, 0xBF597FC7, 0xC6E00BF3, 0xD5A79147, 0x06CA6351, 0x14292967,
    0x27B70A85, 0x2E1B2138, 0x4D2C6DFC, 0x53380D13, 0x650A7354, 0x766A0ABB, 0x81C2C92E, 0x92722C85,
    0xA2BFE8A1, 0xA81A664B, 0xC24B8B70, 0xC76C51A3, 0xD192E819, 0xD6990624, 0xF40E3585, 0x106AA070,
    0x19A4C116, 0x1E376C08, 0x2748774C, 0x34B0BCB5, 0x391C0CB3, 0x4ED8AA4A, 0x5B9CCA4F, 0x682E6FF3,
    0x748F82EE, 0x78A5636F, 0x84C87814, 0x8CC70208, 0x90BEFFFA, 0xA4506CEB, 0xBEF9A3F7, 0xC67178F2,
)

SHA256_IV = (
    0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A,
    0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19,
)


def sha256_compress(state: tuple[int, ...], block: bytes) -> tuple[int, ...]:
    if len(block) != 64:
        raise ValueError(f"SHA-256 block must be 64 bytes, got {len(block)}")
    M = MASK32
    w = list(struct.unpack(">16I", block))
    for i in range(16, 64):
        x, y = w[i - 15], w[i - 2]
        s0 = ((x >> 7) | (x << 25)) ^ ((x >> 18) | (x << 14)) ^ (x >> 3)
        s1 = ((y >> 17) | (y << 15)) ^ ((y >> 19) | (y << 13)) ^ (y >> 10)
        w.append((w[i - 16] + s0 + w[i - 7] + s1) & M)

    a, b, c, d, e, f, g, h = state
    for k, wi in zip(SHA256_K, w):
        # Rotations are left unmasked; bits above 32 fall off in the final mask.
        S1 = ((e >> 6) | (e << 26)) ^ ((e >> 11) | (e << 21)) ^ ((e >> 25) | (e << 7))
        t1 = h + (S1 & M) + ((e & f) ^ (~e & g)) + k + wi
        S0 = ((a >> 2) | (a << 30)) ^ ((a >> 13) | (a << 19)) ^ ((a >> 22) | (a << 10))
        t2 = (S0 & M) + ((a & b) ^ (a & c) ^ (b & c))
        h, g, f = g, f, e
        e = (d + t1) & M
        d, c, b = c, b, a
        a = (t1 + t2) & M

    return tuple((x + y) & M for x, y in zip(state, (a, b, c, d, e, f, g, h)))


class Sha256:
    """Streaming SHA-256 context with a hashlib-like interface."""

    name = "sha256"
    digest_size = 32
    block_size = 64

    def __init__(self, data: bytes = b"") -> None:
        self._h = SHA256_IV
        self._buf = b""
        self._length = 0
        if data:
            self.update(data)

    def update(self, data: bytes) -> None:
        data = bytes(data)
        self._length += len(data)
        buf = self._buf + data
        h = self._h
        end = len(buf) - len(buf) % 64
        for off in range(0, end, 64):
            h = sha256_compress(h, buf[off:off + 64])
        self._h = h
        self._buf = buf[end:]

    def copy(self) -> Sha256:
        other = Sha256.__new__(Sha256)
        other._h, other._buf, other._length = self._h, self._buf, self._length
        return other

    def digest(self) -> bytes:
        zeros = (55 - self._length) % 64
        tail = self._buf + b"\x80" + b"\x00" * zeros + struct.pack(">Q", self._length * 8)
        h = self._h
        for off in range(0, len(tail), 64):
            h = sha256_compress(h, tail[off:off + 64])
        return struct.pack(">8I", *h)

    def hexdigest(self) -> str:
        return self.digest().hex()


def sha256(data: bytes, *, native: bool = False) -> bytes:
    """32-byte SHA-256 digest of ``data``."""
    if native:
        return hashlib.sha256(data).digest()
    return Sha256(data).digest()
