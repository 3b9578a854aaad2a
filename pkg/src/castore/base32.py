"""Base32 text form for content addresses: digits 0-9 then letters A-V.

Bits are taken five at a time, most significant first.  When the width
is not a multiple of five the last character is padded with zero bits on
the right, and decoding insists that those padding bits are zero.
"""

ALPHABET = "0123456789ABCDEFGHIJKLMNOPQRSTUV"
_VALUES = {ch: i for i, ch in enumerate(ALPHABET)}


def encoded_length(width: int) -> int:
    return -(-width // 5)


def encode_base32(value: int, width: int) -> str:
    if width <= 0:
        raise ValueError(f"width must be positive, got {width}")
    if value < 0 or value >> width:
        raise ValueError(f"value does not fit in {width} bits")
    nchars = encoded_length(width)
    v = value << (nchars * 5 - width)
    return "".join(ALPHABET[(v >> (5 * i)) & 31] for i in reversed(range(nchars)))


def decode_base32(text: str, width: int) -> int:
    nchars = encoded_length(width)
    if len(text) != nchars:
        raise ValueError(f"expected {nchars} base32 characters for {width} bits, got {len(text)}")
    v = 0
    for ch in text:
        try:
            v = (v << 5) | _VALUES[ch]
        except KeyError:
            raise ValueError(f"invalid base32 character {ch!r}") from None
    pad = nchars * 5 - width
    if v & ((1 << pad) - 1):
        raise ValueError("nonzero padding bits in base32 text")
    return v >> pad
