"""Exact spectral gaps of finite groups via the regular representation.

The regular representation contains every irreducible, and any nontrivial
irreducible gives the Laplacian a strictly positive spectrum, so the gap of
the |G| x |G| Laplacian on the orthocomplement of constants is the group's
spectral gap.  This is the ground truth the certification pipeline is
tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .balls import BallCapExceeded, generate_ball
from .groups import GeneratingSet

EIG_TOLERANCE_FACTOR = 1e-10


class NotGeneratingError(RuntimeError):
    pass


@dataclass
class FiniteGroupTable:
    """Full multiplication table of a finite group, 0-based, identity first."""

    order: int
    product: np.ndarray
    inverse: np.ndarray
    generator_indices: np.ndarray

    def __post_init__(self) -> None:
        n = self.order
        if self.product.shape != (n, n):
            raise ValueError("product table has the wrong shape")
        if not np.array_equal(self.product[0], np.arange(n)):
            raise ValueError("row 0 must be the identity row")
        if not np.array_equal(self.product[:, 0], np.arange(n)):
            raise ValueError("column 0 must be the identity column")
        if not np.array_equal(self.product[np.arange(n), self.inverse], np.zeros(n, dtype=np.int64)):
            raise ValueError("inverse permutation is inconsistent with the table")

    def spot_check_associativity(self, samples: int = 64, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        n = self.order
        for _ in range(samples):
            a, b, c = rng.integers(0, n, size=3)
            if self.product[self.product[a, b], c] != self.product[a, self.product[b, c]]:
                raise ValueError("associativity failed on the table")

    def to_json(self) -> dict:
        return {
            "format_version": 1,
            "kind": "finite_group_table",
            "order": self.order,
            "product": self.product.tolist(),
            "inverse": self.inverse.tolist(),
            "generator_indices": self.generator_indices.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "FiniteGroupTable":
        if data.get("kind") != "finite_group_table":
            raise ValueError("not a serialized finite group table")
        return cls(
            int(data["order"]),
            np.asarray(data["product"], dtype=np.int64),
            np.asarray(data["inverse"], dtype=np.int64),
            np.asarray(data["generator_indices"], dtype=np.int64),
        )


def enumerate_group(S: GeneratingSet, cap: int = 200_000) -> FiniteGroupTable:
    """Close S under multiplication; errors out if the group exceeds cap."""
    try:
        ball = generate_ball(S, d=2**31, element_cap=cap)
    except BallCapExceeded as exc:
        raise BallCapExceeded(
            f"group generated by S is infinite or larger than the cap {cap}"
        ) from exc
    n = len(ball)
    product = np.empty((n, n), dtype=np.int64)
    p = S.ring.modulus
    mats = ball.matrices
    for i in range(n):
        prods = np.einsum("jk,bkl->bjl", mats[i], mats)
        if p is not None:
            prods %= p
        product[i] = ball.lookup_matrices(prods)
    inverse = ball.inverse_permutation
    gen_idx = np.array([ball.index_of(g) for g in S], dtype=np.int64)
    table = FiniteGroupTable(n, product, inverse, gen_idx)
    table.spot_check_associativity()
    return table


def laplacian_matrix(table: FiniteGroupTable) -> np.ndarray:
    """Matrix of the Laplacian acting on l^2(G) by left translation."""
    n = table.order
    L = np.zeros((n, n))
    np.fill_diagonal(L, float(len(table.generator_indices)))
    cols = np.arange(n)
    for s in table.generator_indices:
        L[table.product[s, cols], cols] -= 1.0
    return L


def spectral_gap_exact(table: FiniteGroupTable) -> float:
    """Smallest nonzero Laplacian eigenvalue; the spectral gap of (G, S)."""
    L = laplacian_matrix(table)
    if not np.allclose(L, L.T):
        raise ValueError("Laplacian matrix is not symmetric; S is not symmetric")
    eigs = np.linalg.eigvalsh(L)
    tol = EIG_TOLERANCE_FACTOR * float(np.abs(L).sum(axis=0).max())
    if eigs[0] < -tol:
        raise ValueError(f"negative Laplacian eigenvalue {eigs[0]}")
    zero_count = int(np.sum(np.abs(eigs) <= tol))
    if zero_count != 1:
        raise NotGeneratingError(
            f"zero eigenvalue has multiplicity {zero_count}; S does not generate"
        )
    return float(eigs[1])
