"""Shared helpers: deterministic seed derivation and small math utilities."""

import hashlib
import math
from fractions import Fraction


def derive_seed(master: int, *tags) -> int:
    """Derive a stable 63-bit seed from a master seed and a tag path.

    Uses sha256 so results do not depend on PYTHONHASHSEED.
    """
    text = repr((int(master),) + tuple(tags)).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "big") >> 1


def parse_value(text: str) -> Fraction:
    """Parse an integer or num/den rational token."""
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(int(text))


def format_value(v) -> str:
    f = Fraction(v)
    if f.denominator == 1:
        return str(f.numerator)
    return f"{f.numerator}/{f.denominator}"


def ceil_log2(n: int) -> int:
    return max(1, math.ceil(math.log2(max(n, 2))))
