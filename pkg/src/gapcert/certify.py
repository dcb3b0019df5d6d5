"""Turn an approximate SDP solution into a certified spectral-gap bound.

Five steps: (1) real square root of the Gram matrix, (2) entrywise
rationalization with a dyadic denominator bound, (3) exact projection of
every column into the augmentation ideal, (4) validated-interval evaluation
of the residual r = Delta^2 - lambda Delta - sum xi* xi and of an upper
bound on ||r||_1, (5) downward-rounded bound

    lambda(G,S)  >  lambda_used - prec - 2^m ||r||_1.

Steps 2-3 are exact rational arithmetic (required for the order-unit
argument); step 4 runs on outward-rounded intervals; step 5 is evaluated in
exact rationals and rounded down once at the end.

Certificates serialize to a self-contained JSON document (exact rationals
as "num/den", floats as C99 hex) and can be re-verified from scratch by
`verify`, which needs nothing beyond this module's exact arithmetic.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _kernels
from .balls import Ball
from .exact import (
    Interval,
    float_to_rational,
    format_rational,
    parse_rational,
    rational_to_interval,
    round_down_to_float,
    sqrt_rounded_down,
)
from .groupring import GroupRingElement, IntervalVector
from .groups import GeneratingSet
from .sdp import SosInstance, SolverSolution

DEFAULT_DENOMINATOR_BITS = 30


class CertificationRefused(RuntimeError):
    """Raised when the solver did not report an eps-optimal solution."""


def sqrt_psd_real(P0: np.ndarray) -> np.ndarray:
    """Real square root of an approximately-PSD symmetric matrix.

    Eigenvalues below zero are clamped, which realizes Re(sqrt(P0)) for the
    small negative eigenvalues a first-order solver leaves behind; the
    result is symmetric with Q Q^T ~ P0.
    """
    P0 = 0.5 * (P0 + P0.T)
    w, V = np.linalg.eigh(P0)
    w = np.sqrt(np.maximum(w, 0.0))
    return (V * w) @ V.T


def rationalize(Q: np.ndarray, denominator_bits: int = DEFAULT_DENOMINATOR_BITS) -> np.ndarray:
    """Entrywise dyadic rationalization; error at most 2^-(bits+1) per entry."""
    if not np.isfinite(Q).all():
        raise ValueError("matrix has non-finite entries")
    out = np.empty(Q.shape, dtype=object)
    flat_in = Q.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.shape[0]):
        flat_out[i] = float_to_rational(float(flat_in[i]), denominator_bits)
    return out


def project_augmentation(Q_rational: np.ndarray) -> np.ndarray:
    """Exact orthogonal projection of each column onto zero-sum vectors."""
    nb, k = Q_rational.shape
    out = np.empty_like(Q_rational)
    for j in range(k):
        col = Q_rational[:, j]
        mean = sum(col, Fraction(0)) / nb
        out[:, j] = [v - mean for v in col]
    return out


@dataclass
class SosWitness:
    """Exact rational SOS data: columns q_i with x . q_i in the augmentation ideal."""

    q_columns: np.ndarray
    basis: Ball
    lambda_used: Fraction

    def __post_init__(self) -> None:
        nb = len(self.basis)
        if self.q_columns.shape[0] != nb:
            raise ValueError("witness rows must match the basis ball")
        for j in range(self.q_columns.shape[1]):
            if sum(self.q_columns[:, j], Fraction(0)) != 0:
                raise ValueError(f"witness column {j} does not sum to zero")

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(format_rational(self.lambda_used).encode())
        for v in self.q_columns.ravel():
            h.update(format_rational(v).encode())
            h.update(b",")
        return h.hexdigest()


def chi(S: GeneratingSet) -> int:
    """1 when S contains an element of order two, else 2."""
    return 1 if any(g.has_order_two() for g in S) else 2


def m_of(support: Ball, S: GeneratingSet) -> int:
    """m = max 2 wl(g) - chi(S) over the (conservative) residual support."""
    return 2 * int(support.word_lengths.max()) - chi(S)


def _interval_endpoints(Q_rational: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = np.empty(Q_rational.shape)
    hi = np.empty(Q_rational.shape)
    flat = Q_rational.ravel()
    flo = lo.ravel()
    fhi = hi.ravel()
    for i in range(flat.shape[0]):
        iv = rational_to_interval(flat[i])
        flo[i] = iv.lo
        fhi[i] = iv.hi
    return lo, hi


def compute_residual(
    inst: SosInstance, witness: SosWitness
) -> tuple[GroupRingElement, float]:
    """Interval enclosure of r = Delta^2 - lambda Delta - sum xi* xi.

    Returns the residual as an interval group-ring element over the product
    ball together with an upward-rounded upper bound on ||r||_1.
    """
    qlo, qhi = _interval_endpoints(witness.q_columns)
    glo, ghi = _kernels.interval_gram(qlo, qhi)
    slo, shi = _kernels.interval_scatter(glo, ghi, inst.table.rows, len(inst.product))
    sos = IntervalVector(slo, shi)
    lam = rational_to_interval(witness.lambda_used)
    delta_iv = IntervalVector.from_rationals(inst.delta_product.coeffs)
    dsq_iv = IntervalVector.from_rationals(inst.delta_sq_product.coeffs)
    r_vec = dsq_iv - delta_iv.scale(lam) - sos
    r_l1 = abs(r_vec).sum().hi
    if not math.isfinite(r_l1):
        raise OverflowError("residual l1 bound overflowed the double range")
    return GroupRingElement(inst.product, r_vec), float(r_l1)


def certified_bound(lambda_used: Fraction, prec: float, r_l1_upper: float, m: int) -> float:
    """Downward-rounded lambda_used - prec - 2^m * r_l1_upper."""
    exact = (
        Fraction(lambda_used)
        - float_to_rational(prec)
        - (Fraction(1) << m) * float_to_rational(r_l1_upper)
    )
    return round_down_to_float(exact)


def kazhdan_from_lambda(lam: float, s_size: int) -> float:
    """Downward-rounded sqrt(2 lambda / |S|)."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return sqrt_rounded_down(Fraction(2) * float_to_rational(lam) / s_size)


@dataclass
class Certificate:
    """Self-contained, re-verifiable record of a certified lower bound."""

    body: dict = field(repr=False)
    lambda_certified: float
    kappa_certified: float
    r_l1_upper: float
    m: int
    chi: int

    def to_json(self) -> dict:
        doc = dict(self.body)
        doc["integrity_sha256"] = _integrity_hash(doc)
        return doc

    def dumps(self) -> str:
        return _canonical_dumps(self.to_json())

    @classmethod
    def from_json(cls, doc: dict) -> "Certificate":
        body = {k: v for k, v in doc.items() if k != "integrity_sha256"}
        return cls(
            body=body,
            lambda_certified=float.fromhex(body["lambda_certified"]),
            kappa_certified=float.fromhex(body["kappa_certified"]),
            r_l1_upper=float.fromhex(body["r_l1_upper"]),
            m=int(body["m"]),
            chi=int(body["chi"]),
        )


def _canonical_dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _integrity_hash(doc: dict) -> str:
    body = {k: v for k, v in doc.items() if k != "integrity_sha256"}
    return hashlib.sha256(_canonical_dumps(body).encode()).hexdigest()


def _sparse_rational(coeffs) -> dict:
    return {
        str(i): format_rational(Fraction(v))
        for i, v in enumerate(coeffs)
        if Fraction(v) != 0
    }


def _settings_hash(settings_doc: Optional[dict]) -> str:
    return hashlib.sha256(_canonical_dumps(settings_doc or {}).encode()).hexdigest()


def build_witness(
    inst: SosInstance,
    solution: SolverSolution,
    denominator_bits: int = DEFAULT_DENOMINATOR_BITS,
) -> SosWitness:
    """Steps 1-3: square root, rationalization, augmentation projection."""
    if not solution.is_optimal:
        raise CertificationRefused(
            f"solver status is {solution.status}; certification needs an optimal solve"
        )
    Q = sqrt_psd_real(solution.P0)
    Q_rat = rationalize(Q, denominator_bits)
    Q_omega = project_augmentation(Q_rat)
    return SosWitness(Q_omega, inst.basis, float_to_rational(solution.lambda0))


def certify(
    inst: SosInstance,
    solution: SolverSolution,
    denominator_bits: int = DEFAULT_DENOMINATOR_BITS,
    delta_param: float = 0.0,
    settings_doc: Optional[dict] = None,
) -> Certificate:
    """Run steps 1-5 and assemble the serialized certificate."""
    witness = build_witness(inst, solution, denominator_bits)
    _, r_l1_upper = compute_residual(inst, witness)
    m = m_of(inst.product, inst.generating_set)
    chi_s = chi(inst.generating_set)
    prec = solution.precision
    bound = certified_bound(witness.lambda_used, prec, r_l1_upper, m)
    kappa = kazhdan_from_lambda(max(bound, 0.0), len(inst.generating_set))
    gen_indices = [inst.product.index_of(g) for g in inst.generating_set]
    body = {
        "format_version": 1,
        "kind": "certificate",
        "group": inst.describe(),
        "generators": inst.generating_set.to_json()["elements"],
        "ring": inst.generating_set.ring.to_json(),
        "d": inst.basis.radius,
        "basis_size": len(inst.basis),
        "product_size": len(inst.product),
        "table": inst.table.rows.tolist(),
        "word_lengths": inst.product.word_lengths.tolist(),
        "generator_indices": gen_indices,
        "s_size": len(inst.generating_set),
        "chi": chi_s,
        "m": m,
        "delta": _sparse_rational(inst.delta_product.coeffs),
        "delta_sq": _sparse_rational(inst.delta_sq_product.coeffs),
        "lambda_used": format_rational(witness.lambda_used),
        "prec": float(prec).hex(),
        "delta_param": float(delta_param).hex(),
        "denominator_bits": denominator_bits,
        "witness": [
            [format_rational(v) for v in row] for row in witness.q_columns
        ],
        "r_l1_upper": float(r_l1_upper).hex(),
        "lambda_certified": float(bound).hex(),
        "kappa_certified": float(kappa).hex(),
        "provenance": {
            "instance_sha256": inst.content_hash(),
            "settings_sha256": _settings_hash(settings_doc),
            "witness_sha256": witness.content_hash(),
        },
    }
    return Certificate(
        body=body,
        lambda_certified=bound,
        kappa_certified=kappa,
        r_l1_upper=r_l1_upper,
        m=m,
        chi=chi_s,
    )


@dataclass
class VerificationResult:
    ok: bool
    checks: list
    failed: Optional[str] = None

    def detail(self) -> str:
        lines = [f"{'PASS' if ok else 'FAIL'}  {name}{': ' + msg if msg else ''}"
                 for name, ok, msg in self.checks]
        return "\n".join(lines)


def _check(checks: list, name: str, ok: bool, msg: str = "") -> bool:
    checks.append((name, bool(ok), msg))
    return bool(ok)


def verify(doc: dict, rebuild_group: bool = False) -> VerificationResult:
    """Re-check a serialized certificate from scratch.

    Uses only exact rational arithmetic and the interval kernels; with
    rebuild_group=True the ball and table are regenerated from the embedded
    generators and compared, closing the trust gap on the group data.
    """
    checks: list = []

    def fail(name: str, msg: str = "") -> VerificationResult:
        _check(checks, name, False, msg)
        return VerificationResult(False, checks, failed=name)

    required = [
        "kind", "table", "word_lengths", "generator_indices", "delta", "delta_sq",
        "lambda_used", "prec", "witness", "r_l1_upper", "lambda_certified",
        "kappa_certified", "m", "chi", "s_size", "basis_size", "product_size",
        "integrity_sha256", "d", "generators", "ring",
    ]
    try:
        missing = [k for k in required if k not in doc]
        if missing or doc.get("kind") != "certificate":
            return fail("schema", f"missing fields {missing}")
        _check(checks, "schema", True)

        if _integrity_hash(doc) != doc["integrity_sha256"]:
            return fail("integrity-hash", "embedded content does not match its hash")
        _check(checks, "integrity-hash", True)

        nb = int(doc["basis_size"])
        mprod = int(doc["product_size"])
        table = np.asarray(doc["table"], dtype=np.int64)
        wl = np.asarray(doc["word_lengths"], dtype=np.int64)
        gen_idx = [int(i) for i in doc["generator_indices"]]
        s_size = int(doc["s_size"])
        chi_s = int(doc["chi"])
        m_claimed = int(doc["m"])

        ok = (
            table.shape == (nb, nb)
            and wl.shape == (mprod,)
            and table.min(initial=0) >= 0
            and table.max(initial=0) < mprod
            and len(gen_idx) == s_size
        )
        if not ok:
            return fail("shape", "table/word-length dimensions are inconsistent")
        _check(checks, "shape", True)

        inv = table[:, 0]
        ok = (
            np.array_equal(table[0], np.arange(nb))
            and np.all(table.diagonal() == 0)
            and np.all(inv < nb)
            and np.array_equal(inv[inv], np.arange(nb))
        )
        if not ok:
            return fail("table-structure", "identity row/diagonal/involution broken")
        _check(checks, "table-structure", True)

        ok = (
            wl[0] == 0
            and np.all(np.diff(wl) >= 0)
            and np.all(wl[inv] == wl[:nb])
            and all(0 < g < mprod and wl[g] == 1 for g in gen_idx)
        )
        if not ok:
            return fail("word-lengths", "word lengths are inconsistent")
        _check(checks, "word-lengths", True)

        chi_expected = 1 if any(inv[g] == g for g in gen_idx if g < nb) else 2
        if chi_s != chi_expected:
            return fail("chi", f"chi={chi_s}, table implies {chi_expected}")
        _check(checks, "chi", True)

        if m_claimed < 2 * int(wl.max()) - chi_s:
            return fail("m-bound", "m is smaller than the support requires")
        _check(checks, "m-bound", True)

        delta = [Fraction(0)] * mprod
        for key, val in doc["delta"].items():
            delta[int(key)] = parse_rational(val)
        ok = delta[0] == s_size and all(delta[g] == -1 for g in gen_idx)
        nonzero = {i for i, v in enumerate(delta) if v != 0}
        ok = ok and nonzero == set(gen_idx) | {0} and sum(delta, Fraction(0)) == 0
        if not ok:
            return fail("laplacian", "delta is not the Laplacian of the generators")
        _check(checks, "laplacian", True)

        delta_sq_claimed = [Fraction(0)] * mprod
        for key, val in doc["delta_sq"].items():
            delta_sq_claimed[int(key)] = parse_rational(val)
        # Recompute Delta^2 through the embedded star table: delta is
        # hermitian, so Delta^2 = star(Delta) . Delta scatters the outer
        # product of its basis restriction.
        delta_sq = [Fraction(0)] * mprod
        basis_delta = delta[:nb]
        support = [i for i, v in enumerate(basis_delta) if v != 0]
        for i in support:
            vi = basis_delta[inv[i]]
            for j in support:
                delta_sq[table[i, j]] += vi * basis_delta[j]
        if delta_sq != delta_sq_claimed:
            return fail("delta-squared", "embedded Delta^2 does not match recomputation")
        _check(checks, "delta-squared", True)

        lambda_used = parse_rational(doc["lambda_used"])
        if lambda_used <= 0:
            return fail("lambda-used", "lambda_used must be positive")
        _check(checks, "lambda-used", True)

        witness_rows = doc["witness"]
        if len(witness_rows) != nb:
            return fail("witness-shape", "witness rows do not match the basis")
        q = np.empty((nb, len(witness_rows[0])), dtype=object)
        for i, row in enumerate(witness_rows):
            for j, text in enumerate(row):
                q[i, j] = parse_rational(text)
        for j in range(q.shape[1]):
            if sum(q[:, j], Fraction(0)) != 0:
                return fail("witness-zero-sum", f"column {j} does not sum to zero")
        _check(checks, "witness-zero-sum", True)

        qlo, qhi = _interval_endpoints(q)
        glo, ghi = _kernels.interval_gram(qlo, qhi)
        slo, shi = _kernels.interval_scatter(glo, ghi, table, mprod)
        sos = IntervalVector(slo, shi)
        lam_iv = rational_to_interval(lambda_used)
        delta_iv = IntervalVector.from_rationals(delta)
        dsq_iv = IntervalVector.from_rationals(delta_sq)
        r_vec = dsq_iv - delta_iv.scale(lam_iv) - sos
        r_l1 = abs(r_vec).sum().hi
        r_l1_claimed = float.fromhex(doc["r_l1_upper"])
        if not (math.isfinite(r_l1) and Fraction(r_l1_claimed) >= Fraction(r_l1)):
            return fail(
                "residual-l1",
                f"recomputed ||r||_1 bound {r_l1!r} exceeds the claimed {r_l1_claimed!r}",
            )
        _check(checks, "residual-l1", True)

        prec = Fraction(float.fromhex(doc["prec"]))
        if prec < 0:
            return fail("prec", "negative precision")
        _check(checks, "prec", True)

        bound_claimed = Fraction(float.fromhex(doc["lambda_certified"]))
        bound_exact = lambda_used - prec - (Fraction(1) << m_claimed) * Fraction(r_l1)
        if bound_claimed > bound_exact:
            return fail("certified-bound", "claimed bound exceeds the certified value")
        _check(checks, "certified-bound", True)

        kappa = Fraction(float.fromhex(doc["kappa_certified"]))
        kappa_budget = 2 * max(bound_claimed, Fraction(0)) / s_size
        if kappa < 0 or kappa * kappa > kappa_budget:
            return fail("kappa", "kappa is inconsistent with the certified lambda")
        _check(checks, "kappa", True)

        if rebuild_group:
            from .groups import GeneratingSet, GroupElement, Ring
            from .sdp import build_instance

            ring = Ring.from_json(doc["ring"])
            gens = GeneratingSet.from_elements(
                GroupElement.from_entries(rows, ring) for rows in doc["generators"]
            )
            inst = build_instance(gens, int(doc["d"]))
            ok = (
                len(inst.basis) == nb
                and len(inst.product) == mprod
                and np.array_equal(inst.table.rows, table)
                and np.array_equal(inst.product.word_lengths, wl)
                and [inst.product.index_of(g) for g in inst.generating_set] == gen_idx
            )
            if not ok:
                return fail("group-rebuild", "embedded tables disagree with regeneration")
            _check(checks, "group-rebuild", True)
    except (KeyError, ValueError, TypeError, OverflowError) as exc:
        return fail("parse", f"{type(exc).__name__}: {exc}")
    return VerificationResult(True, checks)
