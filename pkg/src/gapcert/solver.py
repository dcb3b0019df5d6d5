"""First-order conic solver: ADMM on the homogeneous self-dual embedding.

Solves  min c.x  s.t.  Ax + s = b, s in K  (K = zero x nonneg x PSD blocks)
by operator splitting on the self-dual embedding

    Q = [[0, A^T, c], [-A, 0, b], [-c^T, -b^T, 0]],  u = (x, y, tau),

with one cached sparse LU factorization of [[I, A^T], [-A, I]] reused every
iteration.  Termination residuals are always evaluated on the original
(unscaled) problem data; Ruiz equilibration and the b/c scaling only shape
the iteration.  tau -> 0 with a Farkas-type direction yields an
infeasibility certificate instead of a solution.
"""

from __future__ import annotations

import enum
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .sdp import ConicProgram, NonnegativeCone, PsdCone, ZeroCone, smat, svec

_MIN_SCALE = 1e-6
_MAX_SCALE = 1e6
_TAU_FLOOR = 1e-12


class Status(enum.Enum):
    OPTIMAL = "optimal"
    ITERATION_LIMIT = "iteration_limit"
    STALLED = "stalled"
    INFEASIBLE_CERTIFICATE = "infeasible_certificate"


class NumericalBreakdownError(RuntimeError):
    """The cached linear solve or an eigendecomposition lost its footing."""


@dataclass
class Settings:
    """Stopping and splitting parameters (defaults match the pre-solve phase)."""

    eps: float = 1e-5
    max_iters: int = 20000
    alpha: float = 1.5
    scale: float = 1.0
    normalize: bool = True
    check_interval: int = 25
    stall_window: int = 1000
    stall_ratio: float = 10.0

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not (0.0 < self.alpha < 2.0):
            raise ValueError("alpha must lie in (0, 2)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.check_interval < 1:
            raise ValueError("check_interval must be at least 1")
        if self.stall_window < 2:
            raise ValueError("stall_window must be at least 2")
        if not self.stall_ratio > 1.0:
            raise ValueError("stall_ratio must exceed 1")


@dataclass
class SolverState:
    """Scaled HSDE iterates; reusable as a warm start for the same program."""

    u: np.ndarray
    v: np.ndarray
    iteration: int
    program_hash: str
    scaling_key: tuple
    history: deque = field(default_factory=lambda: deque(maxlen=1000))


@dataclass
class ConicSolution:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    primal_residual: float
    dual_residual: float
    gap: float
    objective: float
    dual_objective: float
    status: Status
    iterations: int
    precision: float
    infeasibility: Optional[str] = None


def project_psd(M: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix: negative eigenvalues clamped to zero."""
    M = 0.5 * (M + M.T)
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalBreakdownError(f"eigendecomposition failed: {exc}") from exc
    w = np.maximum(w, 0.0)
    out = (V * w) @ V.T
    return 0.5 * (out + out.T)


def _cone_row_blocks(program: ConicProgram):
    return program.cone_slices()


def _equilibrate(A: sp.csc_matrix, cone_blocks, iters: int = 10):
    """Ruiz equilibration with one uniform scalar per PSD block of rows."""
    m, n = A.shape
    D = np.ones(m)
    E = np.ones(n)
    work = A.copy()
    for _ in range(iters):
        row_norms = np.sqrt(np.abs(work).max(axis=1).toarray().ravel())
        col_norms = np.sqrt(np.abs(work).max(axis=0).toarray().ravel())
        row_norms[row_norms == 0.0] = 1.0
        col_norms[col_norms == 0.0] = 1.0
        for cone, sl in cone_blocks:
            if isinstance(cone, PsdCone):
                block = row_norms[sl]
                row_norms[sl] = math.exp(float(np.mean(np.log(block))))
        r = 1.0 / row_norms
        c = 1.0 / col_norms
        work = sp.diags(r) @ work @ sp.diags(c)
        D *= r
        E *= c
        if max(abs(row_norms - 1.0).max(), abs(col_norms - 1.0).max()) < 1e-3:
            break
    np.clip(D, _MIN_SCALE, _MAX_SCALE, out=D)
    np.clip(E, _MIN_SCALE, _MAX_SCALE, out=E)
    return D, E


class _Workspace:
    """Scaled problem data plus the cached factorization."""

    def __init__(self, program: ConicProgram, settings: Settings, factorize: bool = True):
        program.validate()
        self.program = program
        self.n = program.num_vars
        self.m = program.num_rows
        self.cone_blocks = _cone_row_blocks(program)
        self.A = program.a_matrix()
        self.b = program.b.astype(np.float64)
        self.c = program.c_vector()
        if settings.normalize:
            self.D, self.E = _equilibrate(self.A, self.cone_blocks)
        else:
            self.D = np.ones(self.m)
            self.E = np.ones(self.n)
        A_s = sp.diags(self.D) @ self.A @ sp.diags(self.E)
        Db = self.D * self.b
        Ec = self.E * self.c
        self.beta = settings.scale / min(max(float(np.linalg.norm(Db)), _MIN_SCALE), _MAX_SCALE)
        self.gamma = settings.scale / min(max(float(np.linalg.norm(Ec)), _MIN_SCALE), _MAX_SCALE)
        self.b_s = self.beta * Db
        self.c_s = self.gamma * Ec
        self.A_s = A_s.tocsc()
        self.scaling_key = (settings.normalize, settings.scale)
        self.h = np.concatenate([self.c_s, self.b_s])
        self.lu = None
        self.g = None
        self.denom = None
        if factorize:
            M = sp.bmat(
                [
                    [sp.identity(self.n, format="csc"), A_s.T],
                    [-A_s, sp.identity(self.m, format="csc")],
                ],
                format="csc",
            )
            try:
                self.lu = spla.splu(M)
                self.g = self.lu.solve(self.h)
            except Exception as exc:
                raise NumericalBreakdownError(f"sparse factorization failed: {exc}") from exc
            if not np.isfinite(self.g).all():
                raise NumericalBreakdownError("linear solve produced non-finite values")
            self.denom = 1.0 + float(self.h @ self.g)
            if not (math.isfinite(self.denom) and self.denom > 0.0):
                raise NumericalBreakdownError("self-dual system is numerically singular")

    # -- coordinate maps -------------------------------------------------
    def unscale_x(self, x_s: np.ndarray) -> np.ndarray:
        return self.E * x_s / self.beta

    def unscale_y(self, y_s: np.ndarray) -> np.ndarray:
        return self.D * y_s / self.gamma

    def unscale_s(self, s_s: np.ndarray) -> np.ndarray:
        return s_s / self.D / self.beta

    def scale_x(self, x: np.ndarray) -> np.ndarray:
        return self.beta * x / self.E

    def scale_y(self, y: np.ndarray) -> np.ndarray:
        return self.gamma * y / self.D

    def scale_s(self, s: np.ndarray) -> np.ndarray:
        return self.beta * self.D * s

    def project_dual_cone(self, y: np.ndarray) -> np.ndarray:
        out = y.copy()
        for cone, sl in self.cone_blocks:
            if isinstance(cone, ZeroCone):
                continue  # dual of {0} is free
            if isinstance(cone, NonnegativeCone):
                np.maximum(out[sl], 0.0, out=out[sl])
            else:
                out[sl] = svec(project_psd(smat(out[sl], cone.side)))
        return out

    def project_primal_cone(self, s: np.ndarray) -> np.ndarray:
        out = s.copy()
        for cone, sl in self.cone_blocks:
            if isinstance(cone, ZeroCone):
                out[sl] = 0.0
            elif isinstance(cone, NonnegativeCone):
                np.maximum(out[sl], 0.0, out=out[sl])
            else:
                out[sl] = svec(project_psd(smat(out[sl], cone.side)))
        return out

    def solve_linear(self, w: np.ndarray) -> np.ndarray:
        """Apply (I + Q)^-1 via the cached factorization."""
        p = self.lu.solve(w[:-1])
        z_tau = (w[-1] + float(self.h @ p)) / self.denom
        zeta = p - z_tau * self.g
        return np.concatenate([zeta, [z_tau]])


def _point_residuals(ws: _Workspace, x, y, s):
    A, b, c = ws.A, ws.b, ws.c
    pres = float(np.linalg.norm(A @ x + s - b)) / (1.0 + float(np.linalg.norm(b)))
    dres = float(np.linalg.norm(A.T @ y + c)) / (1.0 + float(np.linalg.norm(c)))
    pobj = float(c @ x)
    dobj = -float(b @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return pres, dres, gap, pobj, dobj


def residuals(program: ConicProgram, state: SolverState) -> tuple[float, float, float]:
    """Unscaled (primal, dual, gap) residuals of the state's current point."""
    normalize, scale = state.scaling_key
    ws = _Workspace(program, Settings(normalize=normalize, scale=scale), factorize=False)
    n, m = ws.n, ws.m
    tau = max(float(state.u[-1]), _TAU_FLOOR)
    x = ws.unscale_x(state.u[:n] / tau)
    y = ws.unscale_y(state.u[n : n + m] / tau)
    s = ws.unscale_s(state.v[n : n + m] / tau)
    pres, dres, gap, _, _ = _point_residuals(ws, x, y, s)
    return pres, dres, gap


def cold_state(program: ConicProgram, settings: Settings) -> SolverState:
    n, m = program.num_vars, program.num_rows
    u = np.zeros(n + m + 1)
    v = np.zeros(n + m + 1)
    u[-1] = 1.0
    v[-1] = 1.0
    return SolverState(
        u=u,
        v=v,
        iteration=0,
        program_hash=program.content_hash(),
        scaling_key=(settings.normalize, settings.scale),
        history=deque(maxlen=settings.stall_window),
    )


def warm_state_from_point(
    program: ConicProgram, settings: Settings, x: np.ndarray, y: np.ndarray, s: np.ndarray
) -> SolverState:
    """Build a warm-start state from an (x, y, s) point in original coordinates."""
    ws = _Workspace(program, settings, factorize=False)
    state = cold_state(program, settings)
    state.u[: ws.n] = ws.scale_x(np.asarray(x, dtype=np.float64))
    state.u[ws.n : ws.n + ws.m] = ws.scale_y(np.asarray(y, dtype=np.float64))
    state.u[-1] = 1.0
    state.v[ws.n : ws.n + ws.m] = ws.project_primal_cone(
        ws.scale_s(np.asarray(s, dtype=np.float64))
    )
    state.v[-1] = 0.0
    return state


def solve(
    program: ConicProgram,
    settings: Optional[Settings] = None,
    warm: Optional[SolverState] = None,
    log: Optional[Callable[[dict], None]] = None,
) -> tuple[ConicSolution, SolverState]:
    """Run the splitting iteration until eps-optimality, stall, or the cap."""
    settings = settings or Settings()
    ws = _Workspace(program, settings)
    n, m = ws.n, ws.m
    program_hash = program.content_hash()
    if warm is not None:
        if warm.program_hash != program_hash:
            raise ValueError("warm-start state belongs to a different program")
        if warm.scaling_key != ws.scaling_key:
            raise ValueError("warm-start state used different scaling settings")
        u = warm.u.copy()
        v = warm.v.copy()
    else:
        u = np.zeros(n + m + 1)
        v = np.zeros(n + m + 1)
        u[-1] = 1.0
        v[-1] = 1.0
    history: deque = deque(maxlen=settings.stall_window)

    def finish(status, iteration, x, y, s, pres, dres, gap, pobj, dobj, infeas=None):
        state = SolverState(u, v, iteration, program_hash, ws.scaling_key, history)
        sol = ConicSolution(
            x=x, y=y, s=s,
            primal_residual=pres, dual_residual=dres, gap=gap,
            objective=pobj, dual_objective=dobj,
            status=status, iterations=iteration,
            precision=max(pres, dres, gap),
            infeasibility=infeas,
        )
        return sol, state

    alpha = settings.alpha
    bad = (np.full(n, np.nan), np.full(m, np.nan), np.full(m, np.nan))
    last = (math.inf, math.inf, math.inf, math.nan, math.nan)
    last_point = bad
    for k in range(1, settings.max_iters + 1):
        w = u + v
        ut = ws.solve_linear(w)
        t = alpha * ut + (1.0 - alpha) * u
        w2 = t - v
        u_new = w2.copy()
        u_new[n : n + m] = ws.project_dual_cone(w2[n : n + m])
        u_new[-1] = max(w2[-1], 0.0)
        v = u_new - w2
        u = u_new
        if k % settings.check_interval == 0 or k == settings.max_iters:
            if not (np.isfinite(u).all() and np.isfinite(v).all()):
                raise NumericalBreakdownError(f"iterates went non-finite at iteration {k}")
            tau = float(u[-1])
            if tau > _TAU_FLOOR:
                x = ws.unscale_x(u[:n] / tau)
                y = ws.unscale_y(u[n : n + m] / tau)
                s = ws.unscale_s(v[n : n + m] / tau)
                pres, dres, gap, pobj, dobj = _point_residuals(ws, x, y, s)
                last = (pres, dres, gap, pobj, dobj)
                last_point = (x, y, s)
                max_res = max(pres, dres, gap)
                history.append(max_res)
                if log is not None:
                    log({
                        "iteration": k,
                        "primal_residual": pres,
                        "dual_residual": dres,
                        "gap": gap,
                        "objective": pobj,
                    })
                if max_res <= settings.eps:
                    return finish(Status.OPTIMAL, k, x, y, s, pres, dres, gap, pobj, dobj)
            # Homogeneous-direction (Farkas) certificates.
            y_dir = ws.unscale_y(u[n : n + m])
            bty = float(ws.b @ y_dir)
            if bty < 0.0:
                pinf = float(np.linalg.norm(ws.A.T @ y_dir)) * float(np.linalg.norm(ws.b))
                if pinf <= settings.eps * (-bty):
                    sol, state = finish(
                        Status.INFEASIBLE_CERTIFICATE, k, last_point[0],
                        y_dir / (-bty), last_point[2], *last, infeas="primal_infeasible",
                    )
                    return sol, state
            x_dir = ws.unscale_x(u[:n])
            s_dir = ws.unscale_s(v[n : n + m])
            ctx = float(ws.c @ x_dir)
            if ctx < 0.0:
                dinf = float(np.linalg.norm(ws.A @ x_dir + s_dir)) * float(np.linalg.norm(ws.c))
                if dinf <= settings.eps * (-ctx):
                    sol, state = finish(
                        Status.INFEASIBLE_CERTIFICATE, k, x_dir / (-ctx),
                        last_point[1], s_dir / (-ctx), *last, infeas="dual_infeasible",
                    )
                    return sol, state
            if len(history) == settings.stall_window:
                half = settings.stall_window // 2
                older = min(list(history)[:half])
                newer = min(list(history)[half:])
                if older < settings.stall_ratio * newer:
                    return finish(Status.STALLED, k, *last_point, *last)
    return finish(Status.ITERATION_LIMIT, settings.max_iters, *last_point, *last)


def kkt_residuals(program: ConicProgram, x, y, s) -> tuple[float, float, float]:
    """Standard conic KKT residuals of an (x, y, s) triple, unscaled."""
    ws = _Workspace(program, Settings(normalize=False), factorize=False)
    pres, dres, gap, _, _ = _point_residuals(ws, np.asarray(x), np.asarray(y), np.asarray(s))
    return pres, dres, gap


def log_to_jsonl(fh) -> Callable[[dict], None]:
    """Iteration logger writing line-delimited JSON to a file handle."""

    def write(record: dict) -> None:
        fh.write(json.dumps(record, sort_keys=True) + "\n")

    return write
