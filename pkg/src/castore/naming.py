"""Content addresses under the M, GM and M++ naming schemes.

Bit layouts, most significant bit first:

    M    md5(content)                                         128 bits
    GM   m:128 | g:70 | t:35 | c:10 | h:13                    256 bits
    M++  md5(content) | format byte | sha256(content)[:120]   256 bits

The GM header ``h`` is scheme id (3 bits), format version (4 bits) and six
reserved zero bits.  The GM timestamp counts 1024 ms units since the Unix
epoch, modulo 2**35.
"""

from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass
from typing import Callable

from castore import digests
from castore.base32 import decode_base32, encode_base32, encoded_length
from castore.errors import ContentTooLarge
from castore.prng import Prbg

MAX_CONTENT_BYTES = digests.MAX_INPUT_BYTES


class NamingScheme(enum.Enum):
    M = "m"
    GM = "gm"
    MPP = "mpp"

    @property
    def width(self) -> int:
        return 128 if self is NamingScheme.M else 256

    @property
    def scheme_id(self) -> int:
        return _SCHEME_IDS[self]

    @classmethod
    def parse(cls, name: str) -> NamingScheme:
        key = name.strip().lower()
        if key in ("m++", "mplusplus"):
            key = "mpp"
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown naming scheme {name!r} (expected m, gm or mpp)") from None


_SCHEME_IDS = {NamingScheme.M: 1, NamingScheme.GM: 2, NamingScheme.MPP: 3}

# GM field widths in layout order.
GM_FIELDS = (("m", 128), ("g", 70), ("t", 35), ("c", 10), ("h", 13))
GM_FORMAT_VERSION = 1
GM_HEADER = (NamingScheme.GM.scheme_id << 10) | (GM_FORMAT_VERSION << 6)
TIMESTAMP_UNIT_MS = 1024
TIMESTAMP_BITS = 35
COUNTER_BITS = 10
RANDOM_BITS = 70

MPP_FORMAT_BYTE = 0x01
MPP_SHA_BITS = 120


@dataclass(frozen=True)
class ContentAddress:
    scheme: NamingScheme
    value: int

    def __post_init__(self) -> None:
        if self.value < 0 or self.value >> self.scheme.width:
            raise ValueError(f"address value does not fit in {self.scheme.width} bits")

    @property
    def width(self) -> int:
        return self.scheme.width

    @property
    def text(self) -> str:
        return encode_base32(self.value, self.width)

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(self.width // 8, "big")

    @classmethod
    def from_bytes(cls, scheme: NamingScheme, raw: bytes) -> ContentAddress:
        if len(raw) * 8 != scheme.width:
            raise ValueError(f"{scheme.name} address is {scheme.width // 8} bytes, got {len(raw)}")
        return cls(scheme, int.from_bytes(raw, "big"))

    @property
    def md5_field(self) -> int:
        """The leading 128 bits, which are md5(content) under every scheme."""
        return self.value >> (self.width - 128)

    @classmethod
    def parse(cls, text: str, scheme: NamingScheme | None = None) -> ContentAddress:
        """Parse ``scheme:BASE32`` or bare base32 text.

        Bare 26-character text is taken as M; bare 52-character text needs
        ``scheme`` to tell GM from M++.
        """
        text = text.strip()
        if ":" in text:
            prefix, _, text = text.partition(":")
            named = NamingScheme.parse(prefix)
            if scheme is not None and scheme is not named:
                raise ValueError(f"address prefix {prefix!r} does not match scheme {scheme.value}")
            scheme = named
        if scheme is None:
            if len(text) == encoded_length(128):
                scheme = NamingScheme.M
            else:
                raise ValueError("256-bit address text needs a scheme prefix (gm: or mpp:)")
        return cls(scheme, decode_base32(text, scheme.width))

    def __str__(self) -> str:
        return f"{self.scheme.value}:{self.text}"


@dataclass(frozen=True)
class GmComponents:
    m: int
    g: int
    t: int
    c: int
    h: int

    def __post_init__(self) -> None:
        for name, width in GM_FIELDS:
            v = getattr(self, name)
            if v < 0 or v >> width:
                raise ValueError(f"GM field {name} does not fit in {width} bits")

    def to_int(self) -> int:
        v = 0
        for name, width in GM_FIELDS:
            v = (v << width) | getattr(self, name)
        return v

    def to_address(self) -> ContentAddress:
        return ContentAddress(NamingScheme.GM, self.to_int())


def parse_gm(ca: ContentAddress) -> GmComponents:
    if ca.scheme is not NamingScheme.GM:
        raise ValueError(f"expected a GM address, got {ca.scheme.name}")
    v = ca.value
    fields = {}
    for name, width in reversed(GM_FIELDS):
        fields[name] = v & ((1 << width) - 1)
        v >>= width
    return GmComponents(**fields)


def _wall_clock_ms() -> int:
    return time.time_ns() // 1_000_000


class AccessNodeContext:
    """Per-access-node state for GM naming: generator, clock and 10-bit counter.

    The counter starts at a value drawn from the node's generator unless
    ``counter`` is given.  A context is meant to have one owner; the
    internal lock only keeps concurrent misuse from corrupting it.
    """

    def __init__(
        self,
        node_id: int,
        prng: Prbg | None = None,
        clock: Callable[[], int] | None = None,
        counter: int | None = None,
    ) -> None:
        self.node_id = node_id
        self.prng = prng if prng is not None else Prbg.from_entropy()
        self.clock = clock or _wall_clock_ms
        if counter is None:
            counter = self.prng.next_bits(COUNTER_BITS)
        self.counter = counter % (1 << COUNTER_BITS)
        self._lock = threading.Lock()

    def next_fields(self) -> tuple[int, int, int]:
        """Draw (g, t, c) for one write and advance the counter."""
        with self._lock:
            g = self.prng.next_bits(RANDOM_BITS)
            t = timestamp_units(self.clock())
            c = self.counter
            self.counter = (self.counter + 1) % (1 << COUNTER_BITS)
            return g, t, c


def timestamp_units(now_ms: int) -> int:
    return (now_ms // TIMESTAMP_UNIT_MS) % (1 << TIMESTAMP_BITS)


def _check_size(content: bytes) -> None:
    if len(content) > MAX_CONTENT_BYTES:
        raise ContentTooLarge(f"content is {len(content)} bytes; limit is {MAX_CONTENT_BYTES}")


def compute_m(content: bytes, *, native: bool = False) -> ContentAddress:
    _check_size(content)
    return ContentAddress.from_bytes(NamingScheme.M, digests.md5(content, native=native))


def compute_gm(
    content: bytes, ctx: AccessNodeContext, *, native: bool = False
) -> tuple[ContentAddress, GmComponents]:
    _check_size(content)
    m = int.from_bytes(digests.md5(content, native=native), "big")
    g, t, c = ctx.next_fields()
    comps = GmComponents(m=m, g=g, t=t, c=c, h=GM_HEADER)
    return comps.to_address(), comps


def compute_mpp(content: bytes, *, native: bool = False) -> ContentAddress:
    _check_size(content)
    raw = (
        digests.md5(content, native=native)
        + bytes([MPP_FORMAT_BYTE])
        + digests.sha256(content, native=native)[: MPP_SHA_BITS // 8]
    )
    return ContentAddress.from_bytes(NamingScheme.MPP, raw)


def content_matches(ca: ContentAddress, content: bytes, *, native: bool = False) -> bool:
    """Check the content-derived part of ``ca`` against ``content``.

    M and M++ addresses are recomputed in full.  For GM only the m field is
    derived from content, so only that is compared.
    """
    if ca.scheme is NamingScheme.M:
        return compute_m(content, native=native) == ca
    if ca.scheme is NamingScheme.MPP:
        return compute_mpp(content, native=native) == ca
    return int.from_bytes(digests.md5(content, native=native), "big") == ca.md5_field
