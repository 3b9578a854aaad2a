"""Seedable pseudorandom bit generator: SHA-256 in counter mode.

Output block ``i`` is ``sha256(seed || i)`` with ``i`` as an 8-byte
big-endian integer.  Blocks are concatenated most-significant-bit first
and handed out in order, so drawing 35 bits twice yields the same bits as
drawing 70 bits once.
"""

from __future__ import annotations

import hashlib
import os

from castore import digests

BLOCK_BITS = 256
PRODUCTION_SEED_BYTES = 32


class Prbg:
    """Deterministic bit stream expanded from ``seed``.

    ``native=False`` expands with the in-repo SHA-256 instead of hashlib;
    both give the same stream.
    """

    def __init__(self, seed: bytes, *, native: bool = True) -> None:
        self.seed = bytes(seed)
        self.counter = 0
        self._native = native
        self._pool = 0
        self._pool_bits = 0
        self._position = 0

    @classmethod
    def from_entropy(cls) -> Prbg:
        return cls(os.urandom(PRODUCTION_SEED_BYTES))

    @classmethod
    def resume(cls, seed: bytes, position: int, *, native: bool = True) -> Prbg:
        """Rebuild a generator that has already emitted ``position`` bits."""
        gen = cls(seed, native=native)
        gen.counter = position // BLOCK_BITS
        gen._position = gen.counter * BLOCK_BITS
        if position % BLOCK_BITS:
            gen.next_bits(position % BLOCK_BITS)
        return gen

    @property
    def position(self) -> int:
        """Number of bits emitted so far."""
        return self._position

    def _block(self, counter: int) -> bytes:
        msg = self.seed + counter.to_bytes(8, "big")
        if self._native:
            return hashlib.sha256(msg).digest()
        return digests.sha256(msg)

    def _refill(self) -> None:
        block = self._block(self.counter)
        self.counter += 1
        self._pool = (self._pool << BLOCK_BITS) | int.from_bytes(block, "big")
        self._pool_bits += BLOCK_BITS

    def next_bits(self, n: int) -> int:
        """Return the next ``n`` bits of the stream as an unsigned integer."""
        if n < 1:
            raise ValueError(f"bit count must be >= 1, got {n}")
        while self._pool_bits < n:
            self._refill()
        self._pool_bits -= n
        out = self._pool >> self._pool_bits
        self._pool &= (1 << self._pool_bits) - 1
        self._position += n
        return out

    def next_bytes(self, n: int) -> bytes:
        if n < 1:
            raise ValueError(f"byte count must be >= 1, got {n}")
        if self._pool_bits == 0:
            # Aligned fast path for bulk consumers.
            full, rest = divmod(n, BLOCK_BITS // 8)
            chunks = [self._block(self.counter + i) for i in range(full)]
            self.counter += full
            self._position += full * BLOCK_BITS
            out = b"".join(chunks)
            if rest:
                out += self.next_bits(rest * 8).to_bytes(rest, "big")
            return out
        return self.next_bits(8 * n).to_bytes(n, "big")


def prbg_new(seed: bytes, *, native: bool = True) -> Prbg:
    return Prbg(seed, native=native)


def next_bits(state: Prbg, n: int) -> int:
    return state.next_bits(n)
