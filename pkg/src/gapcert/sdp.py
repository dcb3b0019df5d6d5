"""Conic-program models for the sum-of-squares spectral-gap problem.

Variables are x = (lam, svec(P)); cone rows follow Ax + s = b with
s in {0}^mz x R+^mn x PSD.  Off-diagonal svec coordinates carry the usual
sqrt(2) scaling so the PSD cone stays self-dual; since sqrt(2) is
irrational, every A/c entry is stored as an exact dyadic float plus a
"times sqrt(2)" flag.  That keeps the whole program exactly re-checkable
in rational arithmetic (the sqrt(2) factors cancel against svec).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .balls import Ball, MultiplicationTable, generate_ball, multiplication_table
from .groupring import GroupRingElement, augmentation, convolve
from .groups import GeneratingSet

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ZeroCone:
    dim: int


@dataclass(frozen=True)
class NonnegativeCone:
    dim: int


@dataclass(frozen=True)
class PsdCone:
    side: int

    @property
    def dim(self) -> int:
        return self.side * (self.side + 1) // 2


Cone = ZeroCone | NonnegativeCone | PsdCone


def svec_length(side: int) -> int:
    return side * (side + 1) // 2


def svec_index(i: int, j: int) -> int:
    """Packed index of entry (i, j), i <= j, column-major upper triangle."""
    if i > j:
        i, j = j, i
    return j * (j + 1) // 2 + i


def svec(M: np.ndarray) -> np.ndarray:
    side = M.shape[0]
    out = np.empty(svec_length(side))
    for j in range(side):
        base = j * (j + 1) // 2
        out[base : base + j] = M[:j, j] * SQRT2
        out[base + j] = M[j, j]
    return out


def smat(v: np.ndarray, side: int) -> np.ndarray:
    M = np.empty((side, side))
    inv = 1.0 / SQRT2
    for j in range(side):
        base = j * (j + 1) // 2
        col = v[base : base + j] * inv
        M[:j, j] = col
        M[j, :j] = col
        M[j, j] = v[base + j]
    return M


@dataclass
class SosInstance:
    """Exact data of the SOS problem over V = <B_d(e, S)>."""

    generating_set: GeneratingSet
    basis: Ball
    product: Ball
    table: MultiplicationTable
    delta_basis: GroupRingElement
    delta_product: GroupRingElement
    delta_sq_product: GroupRingElement

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.basis.content_hash().encode())
        h.update(self.product.content_hash().encode())
        h.update(self.table.content_hash().encode())
        return h.hexdigest()

    def describe(self) -> dict:
        return {
            "ring": str(self.generating_set.ring),
            "dimension": self.generating_set.n,
            "generators": len(self.generating_set),
            "d": self.basis.radius,
            "basis_size": len(self.basis),
            "product_size": len(self.product),
        }


def _laplacian_coeffs(S: GeneratingSet, ball: Ball) -> GroupRingElement:
    pairs = [(0, Fraction(len(S)))]
    pairs.extend((ball.index_of(g), Fraction(-1)) for g in S)
    return GroupRingElement.from_index_coeffs(ball, pairs)


def build_instance(
    S: GeneratingSet, d: int, element_cap: Optional[int] = None
) -> SosInstance:
    """Generate B_d, B_2d, the star table and exact Laplacian data."""
    if d < 1:
        raise ValueError(f"basis radius must be >= 1, got {d}")
    kwargs = {} if element_cap is None else {"element_cap": element_cap}
    basis = generate_ball(S, d, **kwargs)
    product = generate_ball(S, 2 * d, **kwargs)
    table = multiplication_table(basis, product)
    delta_basis = _laplacian_coeffs(S, basis)
    delta_product = _laplacian_coeffs(S, product)
    delta_sq = convolve(delta_basis, delta_basis, table, product)
    if augmentation(delta_product) != 0 or augmentation(delta_sq) != 0:
        raise AssertionError("Laplacian data lost the zero-augmentation invariant")
    return SosInstance(S, basis, product, table, delta_basis, delta_product, delta_sq)


@dataclass
class ConicProgram:
    """min c.x  s.t.  Ax + s = b,  s in ZeroCone x NonnegativeCone x PsdCones."""

    num_vars: int
    a_rows: np.ndarray
    a_cols: np.ndarray
    a_vals: np.ndarray
    a_sqrt2: np.ndarray
    b: np.ndarray
    c_vals: np.ndarray
    c_sqrt2: np.ndarray
    cones: tuple
    var_spans: dict
    metadata: dict = field(default_factory=dict)
    _a_cache: object = field(default=None, repr=False, compare=False)

    @property
    def num_rows(self) -> int:
        return sum(_cone_dim(c) for c in self.cones)

    def validate(self) -> None:
        if len(self.a_rows) != len(self.a_cols) or len(self.a_rows) != len(self.a_vals):
            raise ValueError("triplet arrays disagree in length")
        if len(self.a_vals) != len(self.a_sqrt2):
            raise ValueError("triplet flag array disagrees in length")
        if len(self.b) != self.num_rows:
            raise ValueError("b length does not match the cone layout")
        if len(self.c_vals) != self.num_vars or len(self.c_sqrt2) != self.num_vars:
            raise ValueError("c length does not match the variable count")
        if len(self.a_rows) and (self.a_rows.min() < 0 or self.a_rows.max() >= self.num_rows):
            raise ValueError("triplet row out of range")
        if len(self.a_cols) and (self.a_cols.min() < 0 or self.a_cols.max() >= self.num_vars):
            raise ValueError("triplet column out of range")

    def a_matrix(self) -> sp.csc_matrix:
        if self._a_cache is None:
            vals = np.where(self.a_sqrt2, self.a_vals * SQRT2, self.a_vals)
            A = sp.coo_matrix(
                (vals, (self.a_rows, self.a_cols)), shape=(self.num_rows, self.num_vars)
            )
            self._a_cache = A.tocsc()
        return self._a_cache

    def c_vector(self) -> np.ndarray:
        return np.where(self.c_sqrt2, self.c_vals * SQRT2, self.c_vals)

    def cone_slices(self):
        out = []
        at = 0
        for cone in self.cones:
            dim = _cone_dim(cone)
            out.append((cone, slice(at, at + dim)))
            at += dim
        return out

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.a_rows, self.a_cols, self.a_vals, self.a_sqrt2, self.b,
                    self.c_vals, self.c_sqrt2):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr(self.cones).encode())
        h.update(repr(sorted(self.var_spans.items())).encode())
        return h.hexdigest()


def _cone_dim(cone) -> int:
    return cone.dim


class _Assembler:
    def __init__(self, num_vars: int):
        self.num_vars = num_vars
        self.rows: list = []
        self.cols: list = []
        self.vals: list = []
        self.flags: list = []

    def add(self, row, col, val, times_sqrt2=False) -> None:
        self.rows.append(row)
        self.cols.append(col)
        self.vals.append(val)
        self.flags.append(times_sqrt2)

    def extend(self, rows, cols, vals, flags) -> None:
        self.rows.extend(np.asarray(rows, dtype=np.int64))
        self.cols.extend(np.asarray(cols, dtype=np.int64))
        self.vals.extend(np.asarray(vals, dtype=np.float64))
        self.flags.extend(np.asarray(flags, dtype=bool))

    def arrays(self):
        return (
            np.asarray(self.rows, dtype=np.int64),
            np.asarray(self.cols, dtype=np.int64),
            np.asarray(self.vals, dtype=np.float64),
            np.asarray(self.flags, dtype=bool),
        )


def _gram_row_triplets(inst: SosInstance, num_vars: int):
    """Coefficients of sum_{x_i^-1 x_j = g} P_ij over svec columns, per row g."""
    nb = len(inst.basis)
    flat = inst.table.rows.ravel()
    k = np.arange(nb * nb, dtype=np.int64)
    i_idx = k // nb
    j_idx = k % nb
    lo = np.minimum(i_idx, j_idx)
    hi = np.maximum(i_idx, j_idx)
    svec_cols = hi * (hi + 1) // 2 + lo + 1  # +1 skips the lambda column
    key = flat * np.int64(num_vars) + svec_cols
    uniq, counts = np.unique(key, return_counts=True)
    rows = uniq // num_vars
    cols = uniq % num_vars
    diag_cols = (np.arange(nb, dtype=np.int64) * (np.arange(nb, dtype=np.int64) + 3)) // 2 + 1
    is_diag = np.isin(cols, diag_cols)
    vals = np.where(is_diag, counts.astype(np.float64), counts.astype(np.float64) * 0.5)
    return rows, cols, vals, ~is_diag


def _base_program(inst: SosInstance) -> tuple[_Assembler, int, int]:
    nb = len(inst.basis)
    mz = len(inst.product)
    num_vars = 1 + svec_length(nb)
    asm = _Assembler(num_vars)
    # lambda column on the Gram equality rows
    for g, coeff in enumerate(inst.delta_product.coeffs):
        if coeff:
            asm.add(g, 0, float(coeff))
    rows, cols, vals, flags = _gram_row_triplets(inst, num_vars)
    asm.extend(rows, cols, vals, flags)
    return asm, num_vars, mz


def _psd_rows(asm: _Assembler, nb: int, first_row: int) -> None:
    sv = svec_length(nb)
    for k in range(sv):
        asm.add(first_row + k, 1 + k, -1.0)


def build_unconstrained(inst: SosInstance) -> ConicProgram:
    """Eq-per-product-element feasibility with objective max lambda."""
    nb = len(inst.basis)
    asm, num_vars, mz = _base_program(inst)
    asm.add(mz, 0, -1.0)  # s = lambda >= 0
    _psd_rows(asm, nb, mz + 1)
    b = np.zeros(mz + 1 + svec_length(nb))
    b[:mz] = [float(v) for v in inst.delta_sq_product.coeffs]
    c_vals = np.zeros(num_vars)
    c_vals[0] = -1.0
    rows, cols, vals, flags = asm.arrays()
    program = ConicProgram(
        num_vars=num_vars,
        a_rows=rows,
        a_cols=cols,
        a_vals=vals,
        a_sqrt2=flags,
        b=b,
        c_vals=c_vals,
        c_sqrt2=np.zeros(num_vars, dtype=bool),
        cones=(ZeroCone(mz), NonnegativeCone(1), PsdCone(nb)),
        var_spans={"lambda": (0, 1), "svec_gram": (1, num_vars)},
        metadata={
            "variant": "unconstrained",
            "instance": inst.describe(),
            "instance_hash": inst.content_hash(),
        },
    )
    program.validate()
    return program


def build_constrained(inst: SosInstance, lambda0: float, delta: float) -> ConicProgram:
    """Tightened rerun: lambda <= (1-delta) lambda0 and sum_ij P_ij = 0."""
    if not (lambda0 > 0.0 and math.isfinite(lambda0)):
        raise ValueError(f"lambda0 must be positive and finite, got {lambda0}")
    if not (0.0 <= delta < 1.0):
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    nb = len(inst.basis)
    asm, num_vars, mz = _base_program(inst)
    # sum_ij P_ij = 0: diagonal svec entries count once, off-diagonals sqrt(2).
    for col in range(1, num_vars):
        k = col - 1
        j = int((math.isqrt(8 * k + 1) - 1) // 2)
        is_diag = k == j * (j + 1) // 2 + j
        asm.add(mz, col, 1.0, times_sqrt2=not is_diag)
    asm.add(mz + 1, 0, -1.0)  # s = lambda >= 0
    upper = (1.0 - float(delta)) * float(lambda0)
    asm.add(mz + 2, 0, 1.0)  # s = upper - lambda >= 0
    _psd_rows(asm, nb, mz + 3)
    b = np.zeros(mz + 3 + svec_length(nb))
    b[:mz] = [float(v) for v in inst.delta_sq_product.coeffs]
    b[mz + 2] = upper
    c_vals = np.zeros(num_vars)
    c_vals[0] = -1.0
    rows, cols, vals, flags = asm.arrays()
    program = ConicProgram(
        num_vars=num_vars,
        a_rows=rows,
        a_cols=cols,
        a_vals=vals,
        a_sqrt2=flags,
        b=b,
        c_vals=c_vals,
        c_sqrt2=np.zeros(num_vars, dtype=bool),
        cones=(ZeroCone(mz + 1), NonnegativeCone(2), PsdCone(nb)),
        var_spans={"lambda": (0, 1), "svec_gram": (1, num_vars)},
        metadata={
            "variant": "constrained",
            "lambda0": lambda0,
            "delta": delta,
            "lambda_upper": upper,
            "instance": inst.describe(),
            "instance_hash": inst.content_hash(),
        },
    )
    program.validate()
    return program


@dataclass
class SolverSolution:
    """lambda and Gram matrix extracted from a conic solve."""

    lambda0: float
    P0: np.ndarray
    primal_residual: float
    dual_residual: float
    gap: float
    status: object
    precision: float
    iterations: int

    @property
    def is_optimal(self) -> bool:
        return getattr(self.status, "name", str(self.status)) == "OPTIMAL"


def extract_solution(program: ConicProgram, conic_solution) -> SolverSolution:
    start, stop = program.var_spans["svec_gram"]
    side = next(c.side for c in program.cones if isinstance(c, PsdCone))
    P = smat(np.asarray(conic_solution.x[start:stop]), side)
    P = 0.5 * (P + P.T)
    return SolverSolution(
        lambda0=float(conic_solution.x[program.var_spans["lambda"][0]]),
        P0=P,
        primal_residual=conic_solution.primal_residual,
        dual_residual=conic_solution.dual_residual,
        gap=conic_solution.gap,
        status=conic_solution.status,
        precision=conic_solution.precision,
        iterations=conic_solution.iterations,
    )
