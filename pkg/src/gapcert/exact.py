"""Exact rational scalars and outward-rounded interval arithmetic.

Rationals are `fractions.Fraction` (every IEEE-754 double is an exact dyadic
rational, so float -> Fraction is lossless).  Intervals carry double
endpoints and guarantee enclosure of the exact result through +, -, *, abs.

Endpoint rounding uses error-free transformations (2Sum / Dekker's product)
instead of switching the FPU rounding mode: the sign of the exact rounding
error decides which endpoint gets nudged by one ulp, so exact operations
stay exact and nothing depends on thread-local floating-point state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

RationalLike = Union[int, float, Fraction]

_SPLITTER = 134217729.0  # 2**27 + 1, Dekker splitting constant
_DEKKER_MIN = 2.0**-970  # outside (min, max) the error term may be inexact
_DEKKER_MAX = 2.0**970

_INF = math.inf


def two_sum(a: float, b: float) -> tuple[float, float]:
    """Return (fl(a+b), err) with a + b == fl(a+b) + err exactly."""
    s = a + b
    if math.isinf(s):
        raise OverflowError(f"interval addition overflowed: {a!r} + {b!r}")
    t = s - a
    err = (a - (s - t)) + (b - t)
    return s, err


def add_enclosure(a: float, b: float) -> tuple[float, float]:
    """Tightest (lo, hi) float pair with lo <= a + b <= hi."""
    s, err = two_sum(a, b)
    if err > 0.0:
        return s, math.nextafter(s, _INF)
    if err < 0.0:
        return math.nextafter(s, -_INF), s
    return s, s


def mul_enclosure(a: float, b: float) -> tuple[float, float]:
    """Tightest (lo, hi) float pair with lo <= a * b <= hi."""
    if a == 0.0 or b == 0.0:
        return 0.0, 0.0
    p = a * b
    if math.isinf(p):
        raise OverflowError(f"interval multiplication overflowed: {a!r} * {b!r}")
    if not (_DEKKER_MIN < abs(p) < _DEKKER_MAX):
        # Dekker's error term is only guaranteed exact in the normal range;
        # fall back to an unconditional one-ulp widening.
        return math.nextafter(p, -_INF), math.nextafter(p, _INF)
    ca = _SPLITTER * a
    a_hi = ca - (ca - a)
    a_lo = a - a_hi
    cb = _SPLITTER * b
    b_hi = cb - (cb - b)
    b_lo = b - b_hi
    err = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    if err > 0.0:
        return p, math.nextafter(p, _INF)
    if err < 0.0:
        return math.nextafter(p, -_INF), p
    return p, p


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with guaranteed enclosure semantics."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"inverted interval endpoints: [{self.lo!r}, {self.hi!r}]")

    @classmethod
    def exact(cls, x: float) -> "Interval":
        return cls(x, x)

    @classmethod
    def from_rational(cls, q: RationalLike) -> "Interval":
        return rational_to_interval(q)

    def __add__(self, other: "Interval") -> "Interval":
        lo, _ = add_enclosure(self.lo, other.lo)
        _, hi = add_enclosure(self.hi, other.hi)
        return Interval(lo, hi)

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other: "Interval") -> "Interval":
        lo, _ = add_enclosure(self.lo, -other.hi)
        _, hi = add_enclosure(self.hi, -other.lo)
        return Interval(lo, hi)

    def __mul__(self, other: "Interval") -> "Interval":
        lo = _INF
        hi = -_INF
        for x in (self.lo, self.hi):
            for y in (other.lo, other.hi):
                clo, chi = mul_enclosure(x, y)
                if clo < lo:
                    lo = clo
                if chi > hi:
                    hi = chi
        return Interval(lo, hi)

    def __abs__(self) -> "Interval":
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return Interval(-self.hi, -self.lo)
        return Interval(0.0, max(-self.lo, self.hi))

    def contains(self, value: RationalLike) -> bool:
        q = value if isinstance(value, Fraction) else Fraction(value)
        return Fraction(self.lo) <= q <= Fraction(self.hi)

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def hex_str(self) -> str:
        """Full-fidelity rendering for audit logs."""
        return f"[{self.lo.hex()}, {self.hi.hex()}]"

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"


def float_to_rational(x: float, max_denominator_bits: int | None = None) -> Fraction:
    """Exact dyadic rational of a finite float, optionally truncated to 2**-k.

    With truncation the result is the nearest multiple of 2**-k (ties to
    even), so the error is at most 2**-(k+1).
    """
    if isinstance(x, Fraction):
        exact = x
    else:
        if not math.isfinite(x):
            raise ValueError(f"cannot convert non-finite value {x!r} to a rational")
        exact = Fraction(x)
    if max_denominator_bits is None:
        return exact
    k = int(max_denominator_bits)
    if k < 0:
        raise ValueError("max_denominator_bits must be non-negative")
    return Fraction(round(exact * (1 << k)), 1 << k)


def rational_to_interval(q: RationalLike) -> Interval:
    """Tightest float interval containing the rational q (width <= 1 ulp)."""
    q = q if isinstance(q, Fraction) else Fraction(q)
    try:
        f = float(q)  # correctly rounded to nearest
    except OverflowError as exc:
        raise OverflowError(f"rational {q} exceeds the double range") from exc
    if math.isinf(f):
        raise OverflowError(f"rational {q} exceeds the double range")
    fq = Fraction(f)
    if fq == q:
        return Interval(f, f)
    if fq < q:
        return Interval(f, math.nextafter(f, _INF))
    return Interval(math.nextafter(f, -_INF), f)


def round_down_to_float(q: RationalLike) -> float:
    """Greatest double <= q."""
    return rational_to_interval(q).lo


def round_up_to_float(q: RationalLike) -> float:
    """Smallest double >= q."""
    return rational_to_interval(q).hi


def sqrt_rounded_down(q: RationalLike) -> float:
    """Greatest double f >= 0 with f*f <= q, for a non-negative rational q."""
    q = q if isinstance(q, Fraction) else Fraction(q)
    if q < 0:
        raise ValueError(f"square root of negative value {q}")
    if q == 0:
        return 0.0
    f = math.sqrt(float(q))
    if math.isinf(f):
        raise OverflowError(f"square root of {q} exceeds the double range")
    while f > 0.0 and Fraction(f) * Fraction(f) > q:
        f = math.nextafter(f, 0.0)
    while True:
        g = math.nextafter(f, _INF)
        if math.isinf(g) or Fraction(g) * Fraction(g) > q:
            return f
        f = g


def format_rational(q: Fraction) -> str:
    """Canonical "num/den" rendering used by all serialized artifacts."""
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text: str) -> Fraction:
    num, _, den = text.partition("/")
    if not den:
        raise ValueError(f"malformed rational {text!r}, expected 'num/den'")
    return Fraction(int(num), int(den))
