"""Integer labels that ascend along the cycle starting at 0 on v0.

Segment reversal is a relabelling x -> f + l - x, so every node can decide on
its own whether it belongs to the reversed segment.
"""

from __future__ import annotations

from hamring.errors import GapExhausted
from hamring.graphgen import log2ceil

# initial spacing exponent, in units of ⌈log2 n⌉
SPACING_EXPONENT = 20


def spacing(n: int) -> int:
    """Gap between consecutive labels on the initial cycle: 2^(20·⌈log2 n⌉)."""
    return 1 << (SPACING_EXPONENT * log2ceil(n))


def beta_max(n: int) -> int:
    """Upper bound on the initial cycle's highest label index, ⌈4·log2 n⌉."""
    return 4 * log2ceil(n)


def wrap_bound(n: int) -> int:
    """Virtual label above every real label; v0 sits there when wrapping around."""
    return (beta_max(n) + 1) * spacing(n)


def max_label_bits(n: int) -> int:
    return wrap_bound(n).bit_length()


def midpoint_label(f: int, l: int) -> int:
    """⌈(f + l) / 2⌉, strictly between f and l; needs l - f ≥ 2."""
    if l - f < 2:
        raise GapExhausted(f"no integer strictly between {f} and {l}")
    return -((-(f + l)) // 2)


def wrap_label(y: int, upper: int) -> int:
    """Label for a node inserted between the highest label y and v0."""
    if not y < upper:
        raise ValueError(f"label {y} is not below the wrap bound {upper}")
    return midpoint_label(y, upper)


def reflect_label(x: int, f: int, l: int) -> int:
    """Mirror x inside [f, l]: f ↦ l, l ↦ f."""
    if not f <= x <= l:
        raise ValueError(f"{x} lies outside [{f}, {l}]")
    return f + l - x
