"""Group-ring elements supported on a ball, generic over the scalar.

Three coefficient kinds share one element type: float64 arrays for solver
I/O, Fraction object arrays for exact arithmetic, and IntervalVector for
validated enclosures.  Mixing kinds or supports is an error; embeddings
between balls are explicit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

import numpy as np

from . import _kernels
from .balls import Ball, MultiplicationTable
from .exact import Interval, add_enclosure, rational_to_interval
from .groups import GeneratingSet


@dataclass(frozen=True)
class IntervalVector:
    """Dense vector of intervals stored as endpoint arrays."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        if self.lo.shape != self.hi.shape:
            raise ValueError("endpoint arrays must have equal shape")
        if np.isnan(self.lo).any() or np.isnan(self.hi).any():
            raise ValueError("interval endpoints must not be NaN")
        if (self.lo > self.hi).any():
            raise ValueError("inverted interval endpoints")

    def __len__(self) -> int:
        return self.lo.shape[0]

    def __getitem__(self, i: int) -> Interval:
        return Interval(float(self.lo[i]), float(self.hi[i]))

    @classmethod
    def zeros(cls, n: int) -> "IntervalVector":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def exact(cls, values) -> "IntervalVector":
        arr = np.asarray(values, dtype=np.float64)
        return cls(arr.copy(), arr.copy())

    @classmethod
    def from_rationals(cls, values: Iterable) -> "IntervalVector":
        ivs = [rational_to_interval(Fraction(v)) for v in values]
        return cls(np.array([iv.lo for iv in ivs]), np.array([iv.hi for iv in ivs]))

    def __add__(self, other: "IntervalVector") -> "IntervalVector":
        lo, hi = _kernels.interval_add_arrays(self.lo, self.hi, other.lo, other.hi)
        return IntervalVector(lo, hi)

    def __sub__(self, other: "IntervalVector") -> "IntervalVector":
        lo, hi = _kernels.interval_add_arrays(self.lo, self.hi, -other.hi, -other.lo)
        return IntervalVector(lo, hi)

    def scale(self, s: Interval) -> "IntervalVector":
        lo, hi = _kernels.interval_mul_arrays(
            np.full(len(self), s.lo), np.full(len(self), s.hi), self.lo, self.hi
        )
        return IntervalVector(lo, hi)

    def __abs__(self) -> "IntervalVector":
        lo = np.where(self.lo >= 0.0, self.lo, np.where(self.hi <= 0.0, -self.hi, 0.0))
        hi = np.where(
            self.lo >= 0.0, self.hi, np.where(self.hi <= 0.0, -self.lo, np.maximum(-self.lo, self.hi))
        )
        return IntervalVector(lo, hi)

    def sum(self) -> Interval:
        acc_lo = 0.0
        acc_hi = 0.0
        for i in range(len(self)):
            acc_lo, _ = add_enclosure(acc_lo, float(self.lo[i]))
            _, acc_hi = add_enclosure(acc_hi, float(self.hi[i]))
        return Interval(acc_lo, acc_hi)

    def contains(self, values: Iterable) -> bool:
        return all(
            Fraction(self.lo[i]) <= Fraction(v) <= Fraction(self.hi[i])
            for i, v in enumerate(values)
        )

    def take(self, indices: np.ndarray) -> "IntervalVector":
        return IntervalVector(self.lo[indices], self.hi[indices])


Coeffs = Union[np.ndarray, IntervalVector]

RATIONAL = "rational"
FLOAT = "float"
INTERVAL = "interval"


def _coerce_coeffs(coeffs, size: int) -> Coeffs:
    if isinstance(coeffs, IntervalVector):
        if len(coeffs) != size:
            raise ValueError("coefficient length does not match the support")
        return coeffs
    arr = np.asarray(coeffs)
    if arr.shape != (size,):
        raise ValueError("coefficient length does not match the support")
    if arr.dtype == object:
        return np.array([Fraction(v) for v in arr], dtype=object)
    return arr.astype(np.float64)


@dataclass(frozen=True)
class GroupRingElement:
    """A group-ring element with dense coefficients over a fixed ball."""

    ball: Ball
    coeffs: Coeffs

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", _coerce_coeffs(self.coeffs, len(self.ball)))

    @property
    def kind(self) -> str:
        if isinstance(self.coeffs, IntervalVector):
            return INTERVAL
        return RATIONAL if self.coeffs.dtype == object else FLOAT

    @classmethod
    def zero(cls, ball: Ball, kind: str = RATIONAL) -> "GroupRingElement":
        if kind == INTERVAL:
            return cls(ball, IntervalVector.zeros(len(ball)))
        if kind == RATIONAL:
            return cls(ball, np.array([Fraction(0)] * len(ball), dtype=object))
        return cls(ball, np.zeros(len(ball)))

    @classmethod
    def from_index_coeffs(
        cls, ball: Ball, pairs: Iterable[tuple[int, Fraction]]
    ) -> "GroupRingElement":
        coeffs = np.array([Fraction(0)] * len(ball), dtype=object)
        for i, v in pairs:
            coeffs[i] = Fraction(v)
        return cls(ball, coeffs)

    def _require_same_support(self, other: "GroupRingElement") -> None:
        if self.ball is not other.ball:
            raise ValueError(
                "elements live on different supports; embed explicitly first"
            )

    def __add__(self, other: "GroupRingElement") -> "GroupRingElement":
        self._require_same_support(other)
        if self.kind != other.kind:
            raise ValueError(f"cannot mix {self.kind} and {other.kind} coefficients")
        return GroupRingElement(self.ball, self.coeffs + other.coeffs)

    def __sub__(self, other: "GroupRingElement") -> "GroupRingElement":
        self._require_same_support(other)
        if self.kind != other.kind:
            raise ValueError(f"cannot mix {self.kind} and {other.kind} coefficients")
        return GroupRingElement(self.ball, self.coeffs - other.coeffs)

    def to_interval(self) -> "GroupRingElement":
        if self.kind == INTERVAL:
            return self
        if self.kind == RATIONAL:
            return GroupRingElement(self.ball, IntervalVector.from_rationals(self.coeffs))
        return GroupRingElement(self.ball, IntervalVector.exact(self.coeffs))

    def to_float(self) -> "GroupRingElement":
        if self.kind == FLOAT:
            return self
        if self.kind == RATIONAL:
            return GroupRingElement(self.ball, np.array([float(v) for v in self.coeffs]))
        raise ValueError("interval coefficients have no canonical float projection")

    def embed_into(self, target: Ball) -> "GroupRingElement":
        index_map = self.ball.embedding_into(target)
        if self.kind == INTERVAL:
            lo = np.zeros(len(target))
            hi = np.zeros(len(target))
            lo[index_map] = self.coeffs.lo
            hi[index_map] = self.coeffs.hi
            return GroupRingElement(target, IntervalVector(lo, hi))
        if self.kind == RATIONAL:
            out = np.array([Fraction(0)] * len(target), dtype=object)
        else:
            out = np.zeros(len(target))
        out[index_map] = self.coeffs
        return GroupRingElement(target, out)


def star(a: GroupRingElement) -> GroupRingElement:
    """Involution g -> g^-1, a coefficient permutation on a symmetric ball."""
    perm = a.ball.inverse_permutation
    if isinstance(a.coeffs, IntervalVector):
        return GroupRingElement(a.ball, a.coeffs.take(perm))
    return GroupRingElement(a.ball, a.coeffs[perm])


def augmentation(a: GroupRingElement):
    """Coefficient sum (the ring homomorphism onto the scalars)."""
    if isinstance(a.coeffs, IntervalVector):
        return a.coeffs.sum()
    if a.kind == RATIONAL:
        return sum(a.coeffs, Fraction(0))
    return float(np.sum(a.coeffs))


def l1_norm(a: GroupRingElement):
    """Sum of absolute coefficients; an enclosure for interval scalars."""
    if isinstance(a.coeffs, IntervalVector):
        return abs(a.coeffs).sum()
    if a.kind == RATIONAL:
        return sum((abs(v) for v in a.coeffs), Fraction(0))
    return float(np.sum(np.abs(a.coeffs)))


def _star_scatter(u: GroupRingElement, v: GroupRingElement, table: MultiplicationTable,
                  product: Ball) -> Coeffs:
    """Coefficients of u^* . v via the star-multiplication table."""
    m = len(product)
    if isinstance(u.coeffs, IntervalVector):
        lo, hi = _kernels.interval_outer_scatter(
            u.coeffs.lo, u.coeffs.hi, v.coeffs.lo, v.coeffs.hi, table.rows, m
        )
        return IntervalVector(lo, hi)
    if u.kind == RATIONAL:
        out = [Fraction(0)] * m
        rows = table.rows
        uc = u.coeffs
        vc = v.coeffs
        nb = len(uc)
        for i in range(nb):
            ui = uc[i]
            if not ui:
                continue
            ti = rows[i]
            for j in range(nb):
                if vc[j]:
                    out[ti[j]] += ui * vc[j]
        return np.array(out, dtype=object)
    return _kernels.float_outer_scatter(u.coeffs, v.coeffs, table.rows, m)


def convolve(
    a: GroupRingElement,
    b: GroupRingElement,
    table: MultiplicationTable,
    product: Ball,
) -> GroupRingElement:
    """Exact convolution (a . b)(g) = sum over h k = g of a(h) b(k)."""
    a._require_same_support(b)
    if a.kind != b.kind:
        raise ValueError(f"cannot convolve {a.kind} with {b.kind} coefficients")
    if table.rows.shape[0] != len(a.ball):
        raise ValueError("table does not match the element support")
    # The table encodes x_i^-1 x_j, so a . b = star(star(a)) . b is evaluated
    # by scattering star(a) against b.
    return GroupRingElement(product, _star_scatter(star(a), b, table, product))


@dataclass(frozen=True)
class Laplacian:
    """|S| - sum of generators; hermitian with zero augmentation."""

    element: GroupRingElement
    generating_set: GeneratingSet


def laplacian(S: GeneratingSet, support: Ball | None = None) -> Laplacian:
    """Group Laplacian of a symmetric generating set over B_1 (or a given ball)."""
    if len(S) == 0:
        raise ValueError("the generating set is empty")
    if not S.symmetric:
        raise ValueError("the Laplacian needs a symmetric generating set")
    from .balls import generate_ball

    ball = support if support is not None else generate_ball(S, 1)
    coeffs = np.array([Fraction(0)] * len(ball), dtype=object)
    coeffs[0] = Fraction(len(S))
    for g in S:
        coeffs[ball.index_of(g)] = Fraction(-1)
    return Laplacian(GroupRingElement(ball, coeffs), S)
