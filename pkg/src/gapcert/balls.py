"""Word-metric balls in a matrix group and their multiplication tables.

generate_ball runs a breadth-first search from the identity; layer k holds
exactly the elements of geodesic word length k, ordered lexicographically
by the row-major entry tuple within the layer.  That ordering is part of
the artifact contract: constraint matrices, certificates and hashes all
depend on it.

The element store is a packed (N, n, n) int64 array so that layer
expansion and table construction run as batched numpy matrix products.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .groups import GeneratingSet, GroupElement, Ring

DEFAULT_ELEMENT_CAP = 5_000_000
_MATMUL_GUARD = 2**61


class BallCapExceeded(RuntimeError):
    pass


@dataclass
class Ball:
    """Ordered, indexed ball B_d(e, S); the identity is always index 0."""

    generating_set: GeneratingSet
    radius: int
    matrices: np.ndarray
    word_lengths: np.ndarray
    _index: dict = field(repr=False)

    def __len__(self) -> int:
        return self.matrices.shape[0]

    @property
    def ring(self) -> Ring:
        return self.generating_set.ring

    @property
    def dimension(self) -> int:
        return self.matrices.shape[1]

    def element(self, i: int) -> GroupElement:
        rows = tuple(tuple(int(x) for x in row) for row in self.matrices[i])
        return GroupElement(rows, self.ring)

    def __getitem__(self, i: int) -> GroupElement:
        return self.element(i)

    def index_of(self, g: GroupElement) -> int:
        key = np.asarray(g.entries, dtype=np.int64).tobytes()
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"element {g!r} is not in this ball") from None

    def __contains__(self, g: GroupElement) -> bool:
        return np.asarray(g.entries, dtype=np.int64).tobytes() in self._index

    def lookup_matrices(self, mats: np.ndarray) -> np.ndarray:
        """Indices of a batch of canonical matrices; raises on a miss."""
        n = self.dimension
        flat = np.ascontiguousarray(mats.reshape(-1, n * n), dtype=np.int64)
        out = np.empty(flat.shape[0], dtype=np.int64)
        index = self._index
        for pos, row in enumerate(flat):
            key = row.tobytes()
            try:
                out[pos] = index[key]
            except KeyError:
                raise KeyError("matrix not present in the ball (inconsistent balls?)") from None
        return out

    @cached_property
    def inverse_permutation(self) -> np.ndarray:
        """Permutation i -> index of x_i^-1; requires a symmetric ball."""
        if not self.generating_set.symmetric:
            raise ValueError("inverse permutation needs a symmetric generating set")
        perm = np.empty(len(self), dtype=np.int64)
        for i in range(len(self)):
            perm[i] = self.index_of(self.element(i).inverse())
        return perm

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.ring).encode())
        h.update(str(self.radius).encode())
        h.update(self.matrices.tobytes())
        h.update(self.word_lengths.tobytes())
        return h.hexdigest()

    def embedding_into(self, larger: "Ball") -> np.ndarray:
        """Index map of this ball into a larger one (explicit, never implied)."""
        return larger.lookup_matrices(self.matrices)

    def to_json(self) -> dict:
        return {
            "format_version": 1,
            "kind": "ball",
            "ring": self.ring.to_json(),
            "dimension": self.dimension,
            "generators": self.generating_set.to_json()["elements"],
            "radius": self.radius,
            "elements": self.matrices.reshape(len(self), -1).tolist(),
            "word_lengths": self.word_lengths.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Ball":
        if data.get("kind") != "ball":
            raise ValueError("not a serialized ball")
        ring = Ring.from_json(data["ring"])
        n = int(data["dimension"])
        gens = GeneratingSet.from_json({"ring": data["ring"], "elements": data["generators"]})
        mats = np.asarray(data["elements"], dtype=np.int64).reshape(-1, n, n)
        wl = np.asarray(data["word_lengths"], dtype=np.int64)
        return _ball_from_arrays(gens, int(data["radius"]), mats, wl)


def _ball_from_arrays(
    gens: GeneratingSet, radius: int, mats: np.ndarray, wl: np.ndarray
) -> Ball:
    n = mats.shape[1]
    if mats.shape[0] != wl.shape[0]:
        raise ValueError("element and word-length counts disagree")
    if not np.array_equal(mats[0], np.eye(n, dtype=np.int64)) or wl[0] != 0:
        raise ValueError("ball must start with the identity at word length 0")
    if np.any(np.diff(wl) < 0) or (len(wl) and wl.max(initial=0) > radius):
        raise ValueError("word lengths must be sorted and bounded by the radius")
    p = gens.ring.modulus
    if p is not None and (mats.min() < 0 or mats.max() >= p):
        raise ValueError(f"entries must be reduced residues mod {p}")
    flat = mats.reshape(len(mats), -1)
    index = {row.tobytes(): i for i, row in enumerate(flat)}
    if len(index) != len(mats):
        raise ValueError("duplicate elements in ball")
    return Ball(gens, radius, mats, wl, index)


def generate_ball(
    S: GeneratingSet, d: int, element_cap: int = DEFAULT_ELEMENT_CAP
) -> Ball:
    """BFS ball of radius d; deterministic layer-then-lexicographic order."""
    if d < 0:
        raise ValueError(f"ball radius must be non-negative, got {d}")
    n = S.n
    p = S.ring.modulus
    gen_mats = np.stack(
        [np.asarray(g.entries, dtype=np.int64) for g in S.elements]
    )
    identity = np.eye(n, dtype=np.int64)[None]
    chunks = [identity]
    wl_chunks = [np.zeros(1, dtype=np.int64)]
    index: dict = {identity[0].reshape(-1).tobytes(): 0}
    frontier = identity
    total = 1
    gen_max = int(np.abs(gen_mats).max())
    # Expansion is chunked so the candidate buffer stays ~100 MB even for
    # balls with hundreds of thousands of frontier elements.
    chunk_rows = max(1, 4_000_000 // (len(S) * n * n))
    for layer in range(1, d + 1):
        if frontier.shape[0] == 0:
            break
        front_max = int(np.abs(frontier).max())
        if front_max * gen_max * n >= _MATMUL_GUARD:
            raise OverflowError(
                f"ball entries would exceed the 64-bit range at radius {layer}"
            )
        new_rows: dict = {}
        for start in range(0, frontier.shape[0], chunk_rows):
            block = frontier[start : start + chunk_rows]
            products = np.einsum("fij,sjk->sfik", block, gen_mats).reshape(-1, n * n)
            if p is not None:
                products %= p
            for row in np.unique(products, axis=0):
                key = row.tobytes()
                if key not in index and key not in new_rows:
                    new_rows[key] = row
        if not new_rows:
            break
        fresh = np.unique(np.stack(list(new_rows.values())), axis=0)
        total += fresh.shape[0]
        if total > element_cap:
            raise BallCapExceeded(
                f"ball exceeded the element cap ({element_cap}) at radius {layer}"
            )
        base = len(index)
        for offset, row in enumerate(fresh):
            index[row.tobytes()] = base + offset
        chunks.append(fresh.reshape(-1, n, n))
        wl_chunks.append(np.full(fresh.shape[0], layer, dtype=np.int64))
        frontier = chunks[-1]
    mats = np.concatenate(chunks)
    wl = np.concatenate(wl_chunks)
    return Ball(S, d, mats, wl, index)


@dataclass
class MultiplicationTable:
    """rows[i][j] = index of x_i^-1 x_j in the product ball."""

    rows: np.ndarray
    basis_radius: int
    product_radius: int

    @property
    def basis_size(self) -> int:
        return self.rows.shape[0]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.basis_radius}:{self.product_radius}".encode())
        h.update(self.rows.tobytes())
        return h.hexdigest()

    def to_json(self) -> dict:
        return {
            "format_version": 1,
            "kind": "multiplication_table",
            "basis_radius": self.basis_radius,
            "product_radius": self.product_radius,
            "rows": self.rows.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "MultiplicationTable":
        if data.get("kind") != "multiplication_table":
            raise ValueError("not a serialized multiplication table")
        rows = np.asarray(data["rows"], dtype=np.int64)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise ValueError("table must be square")
        return cls(rows, int(data["basis_radius"]), int(data["product_radius"]))


def multiplication_table(basis: Ball, product: Ball) -> MultiplicationTable:
    """Star-multiplication table of the basis ball, indexed into the product ball."""
    if product.radius < 2 * basis.radius:
        raise ValueError(
            f"product radius {product.radius} < 2 * basis radius {basis.radius}"
        )
    if basis.generating_set != product.generating_set:
        raise ValueError("basis and product balls come from different generating sets")
    n = basis.dimension
    p = basis.ring.modulus
    nb = len(basis)
    rows = np.empty((nb, nb), dtype=np.int64)
    mats = basis.matrices
    mats_max = int(np.abs(mats).max()) if nb else 0
    for i in range(nb):
        inv = np.asarray(basis.element(i).inverse().entries, dtype=np.int64)
        inv_max = int(np.abs(inv).max())
        if inv_max * mats_max * n >= _MATMUL_GUARD:
            raise OverflowError("table products would exceed the 64-bit range")
        prods = np.einsum("ij,bjk->bik", inv, mats)
        if p is not None:
            prods %= p
        rows[i] = product.lookup_matrices(prods)
    return MultiplicationTable(rows, basis.radius, product.radius)


def dump_tables(basis: Ball, product: Ball, table: MultiplicationTable) -> dict:
    """Bundled artifact consumed by the SDP and certification stages."""
    return {
        "format_version": 1,
        "kind": "tables",
        "basis": basis.to_json(),
        "product": product.to_json(),
        "table": table.to_json(),
    }


def load_tables(data: dict) -> tuple[Ball, Ball, MultiplicationTable]:
    if data.get("kind") != "tables":
        raise ValueError("not a serialized tables bundle")
    basis = Ball.from_json(data["basis"])
    product = Ball.from_json(data["product"])
    table = MultiplicationTable.from_json(data["table"])
    if table.rows.shape[0] != len(basis):
        raise ValueError("table size does not match the basis ball")
    if table.rows.max(initial=0) >= len(product):
        raise ValueError("table indices exceed the product ball")
    return basis, product, table


def tables_json_dumps(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))
