"""
Infinite values as sentinels.

Stored fields never hold floating-point infinities. Operations whose result is
infinite (the action of a path with jumps, the exponent of an extinct set, a
masked value) return one of the two singletons defined here. Arithmetic with
them is absorbing and comparisons order them against every real number.
"""

import math
from typing import Union


class Infinity:
    """Signed infinity with absorbing arithmetic."""

    __slots__ = ("sign",)

    def __init__(self, sign: int):
        self.sign = 1 if sign > 0 else -1

    def __repr__(self) -> str:
        return "POS_INF" if self.sign > 0 else "NEG_INF"

    def __str__(self) -> str:
        return "inf" if self.sign > 0 else "-inf"

    def __float__(self) -> float:
        return math.inf if self.sign > 0 else -math.inf

    def __hash__(self) -> int:
        return hash(("lineage_lab.Infinity", self.sign))

    def __eq__(self, other) -> bool:
        return isinstance(other, Infinity) and other.sign == self.sign

    def __lt__(self, other) -> bool:
        if isinstance(other, Infinity):
            return self.sign < other.sign
        return self.sign < 0

    def __le__(self, other) -> bool:
        return self == other or self < other

    def __gt__(self, other) -> bool:
        if isinstance(other, Infinity):
            return self.sign > other.sign
        return self.sign > 0

    def __ge__(self, other) -> bool:
        return self == other or self > other

    def __neg__(self) -> "Infinity":
        return NEG_INF if self.sign > 0 else POS_INF

    def __add__(self, other) -> "Infinity":
        if isinstance(other, Infinity) and other.sign != self.sign:
            raise ArithmeticError("POS_INF + NEG_INF is undefined")
        return self

    __radd__ = __add__

    def __sub__(self, other) -> "Infinity":
        return self + (-other)

    def __rsub__(self, other) -> "Infinity":
        return (-self) + other


POS_INF = Infinity(1)
NEG_INF = Infinity(-1)

Extended = Union[float, Infinity]


def is_infinite(value) -> bool:
    """Whether value is one of the sentinels."""
    return isinstance(value, Infinity)


def to_float(value: Extended) -> float:
    """Convert to a plain float, mapping sentinels to IEEE infinities (for numeric work only)."""
    return float(value)


def format_extended(value: Extended, precision: int = 12) -> str:
    """Render for CSV output."""
    if is_infinite(value):
        return str(value)
    return f"{value:.{precision}g}"
