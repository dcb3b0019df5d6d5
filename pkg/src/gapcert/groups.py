"""Matrix-group arithmetic over the integers or a prime field.

Elements are SL(n, Z) or SL(n, Z/p) matrices in canonical form (mod-p
entries reduced to [0, p)).  Entries are kept exact; anything leaving the
signed-64-bit range raises OverflowError instead of wrapping, which keeps
the fast numpy paths in balls.py sound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class Ring:
    """The integers (modulus None) or the prime field Z/p."""

    modulus: Optional[int] = None

    def __post_init__(self) -> None:
        if self.modulus is not None and not is_prime(self.modulus):
            raise ValueError(f"modulus {self.modulus} is not prime")

    @property
    def is_modular(self) -> bool:
        return self.modulus is not None

    def reduce(self, x: int) -> int:
        return x % self.modulus if self.modulus is not None else x

    def __str__(self) -> str:
        return "Z" if self.modulus is None else f"Z/{self.modulus}"

    def to_json(self):
        return {"modulus": self.modulus}

    @classmethod
    def from_json(cls, data) -> "Ring":
        return cls(modulus=data["modulus"])


INTEGERS = Ring(None)


def _check_int64(entries: tuple[tuple[int, ...], ...]) -> None:
    for row in entries:
        for x in row:
            if not (INT64_MIN <= x <= INT64_MAX):
                raise OverflowError(f"matrix entry {x} exceeds the signed 64-bit range")


@dataclass(frozen=True)
class GroupElement:
    """An SL(n) matrix in canonical form."""

    entries: tuple[tuple[int, ...], ...]
    ring: Ring

    @property
    def n(self) -> int:
        return len(self.entries)

    @classmethod
    def from_entries(cls, entries: Iterable[Iterable[int]], ring: Ring) -> "GroupElement":
        rows = tuple(tuple(ring.reduce(int(x)) for x in row) for row in entries)
        n = len(rows)
        if any(len(row) != n for row in rows):
            raise ValueError("matrix must be square")
        _check_int64(rows)
        g = cls(rows, ring)
        det = g.determinant()
        if ring.reduce(det - 1) != 0:
            raise ValueError(f"determinant is {det}, not 1 in {ring}")
        return g

    @classmethod
    def identity(cls, n: int, ring: Ring) -> "GroupElement":
        return cls(tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n)), ring)

    def key(self) -> tuple[int, ...]:
        """Row-major entry tuple; canonical hash/order key."""
        return tuple(x for row in self.entries for x in row)

    def determinant(self) -> int:
        return self.ring.reduce(_det(self.entries))

    def multiply(self, other: "GroupElement") -> "GroupElement":
        if self.n != other.n or self.ring != other.ring:
            raise ValueError("dimension or ring mismatch in group multiplication")
        n = self.n
        red = self.ring.reduce
        a = self.entries
        b = other.entries
        rows = tuple(
            tuple(red(sum(a[i][k] * b[k][j] for k in range(n))) for j in range(n))
            for i in range(n)
        )
        _check_int64(rows)
        return GroupElement(rows, self.ring)

    def inverse(self) -> "GroupElement":
        """Exact inverse: the adjugate over Z, scaled by det^-1 mod p."""
        n = self.n
        adj = _adjugate(self.entries)
        if self.ring.is_modular:
            p = self.ring.modulus
            det = _det(self.entries) % p
            det_inv = pow(det, -1, p)
            rows = tuple(tuple((x * det_inv) % p for x in row) for row in adj)
        else:
            rows = adj
        _check_int64(rows)
        return GroupElement(rows, self.ring)

    def is_identity(self) -> bool:
        return all(
            self.entries[i][j] == (1 if i == j else 0) for i in range(self.n) for j in range(self.n)
        )

    def has_order_two(self) -> bool:
        return not self.is_identity() and self.multiply(self).is_identity()

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return self.multiply(other)

    def __repr__(self) -> str:
        return f"GroupElement({list(map(list, self.entries))}, {self.ring})"


def _det(entries) -> int:
    n = len(entries)
    if n == 1:
        return entries[0][0]
    if n == 2:
        return entries[0][0] * entries[1][1] - entries[0][1] * entries[1][0]
    total = 0
    rest = entries[1:]
    for j in range(n):
        minor = tuple(row[:j] + row[j + 1 :] for row in rest)
        term = entries[0][j] * _det(minor)
        total += term if j % 2 == 0 else -term
    return total


def _adjugate(entries) -> tuple[tuple[int, ...], ...]:
    n = len(entries)
    if n == 1:
        return ((1,),)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            # adj[i][j] = cofactor C_ji (transposed cofactor matrix)
            minor = tuple(
                tuple(entries[r][c] for c in range(n) if c != i)
                for r in range(n)
                if r != j
            )
            sign = 1 if (i + j) % 2 == 0 else -1
            row.append(sign * _det(minor))
        out.append(tuple(row))
    return tuple(out)


def multiply(a: GroupElement, b: GroupElement) -> GroupElement:
    return a.multiply(b)


def inverse(g: GroupElement) -> GroupElement:
    return g.inverse()


@dataclass(frozen=True)
class GeneratingSet:
    """Deduplicated generators with a verified symmetry flag."""

    elements: tuple[GroupElement, ...]
    symmetric: bool

    @classmethod
    def from_elements(cls, elements: Iterable[GroupElement]) -> "GeneratingSet":
        seen = {}
        for g in elements:
            seen.setdefault(g.key(), g)
        ordered = tuple(seen[k] for k in sorted(seen))
        keys = set(seen)
        symmetric = all(g.inverse().key() in keys for g in ordered)
        return cls(ordered, symmetric)

    @property
    def ring(self) -> Ring:
        return self.elements[0].ring

    @property
    def n(self) -> int:
        return self.elements[0].n

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def to_json(self):
        return {
            "ring": self.ring.to_json(),
            "dimension": self.n,
            "elements": [list(map(list, g.entries)) for g in self.elements],
        }

    @classmethod
    def from_json(cls, data) -> "GeneratingSet":
        ring = Ring.from_json(data["ring"])
        return cls.from_elements(
            GroupElement.from_entries(rows, ring) for rows in data["elements"]
        )


def elementary_generators(n: int, ring: Ring) -> GeneratingSet:
    """All transvections I +/- E_ij (i != j), deduplicated in the ring."""
    if n < 2:
        raise ValueError(f"elementary generators need dimension >= 2, got {n}")
    gens = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            for sign in (1, -1):
                rows = [[1 if a == b else 0 for b in range(n)] for a in range(n)]
                rows[i][j] = sign
                gens.append(GroupElement.from_entries(rows, ring))
    return GeneratingSet.from_elements(gens)
