"""ADMM for ``min G(u) + J(L u)`` with injective ``L``, its dual DR twin and rate prediction.

The iteration is kept in the form that exposes the dual DR variable
``w_{k+1} = y_k + gamma L u_{k+1}``::

    u_{k+1} = argmin G(u) + gamma/2 ||L u - (v_k - y_k / gamma)||^2
    w_{k+1} = y_k + gamma L u_{k+1}
    v_{k+1} = prox_{J/gamma}(w_{k+1} / gamma)
    y_{k+1} = w_{k+1} - gamma v_{k+1}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve

from .prox import (
    CHART_TOL,
    AffineIndicator,
    FunctionOracle,
    L1Ball,
    L1Norm,
    LinfNorm,
    Quadratic,
    Zero,
)
from .rates import LinearizedDR, _null_projector, tangent_hessian
from .subspace import Basis, basis_from_columns, principal_angles

INJECTIVITY_TOL = 1e-10


def check_injective(L: np.ndarray) -> None:
    s = np.linalg.svd(np.atleast_2d(L), compute_uv=False)
    if L.shape[0] < L.shape[1] or s.size == 0 or s[-1] <= INJECTIVITY_TOL * s[0]:
        raise ValueError("L must be injective (full column rank)")


class USubproblemSolver:
    """``u = argmin G(u) + gamma/2 ||L u - target||^2`` for one fixed ``L``."""

    kind = "abstract"
    oracle: FunctionOracle

    def __init__(self, L):
        self.L = np.atleast_2d(np.asarray(L, dtype=float))
        check_injective(self.L)
        self._LtL = self.L.T @ self.L

    def solve(self, target, gamma: float) -> np.ndarray:
        raise NotImplementedError

    def dual_prox(self, p, gamma: float) -> np.ndarray:
        """``prox_{gamma Ghat}(p)`` with ``Ghat(w) = G*(-L^T w)``, from the explicit conjugate."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class QuadraticSolver(USubproblemSolver):
    """``G(u) = 0.5 ||A u - b||^2``; needs ``A`` injective for the conjugate."""

    kind = "quadratic"

    def __init__(self, A, b, L):
        super().__init__(L)
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).ravel()
        self.oracle = Quadratic(self.A, self.b)
        self._Q = self.A.T @ self.A
        self._Atb = self.A.T @ self.b
        self._primal = lru_cache(maxsize=4)(lambda g: cho_factor(self._Q + g * self._LtL))
        self._dual = lru_cache(maxsize=4)(self._dual_factor)

    def _dual_factor(self, gamma):
        qinv_lt = np.linalg.solve(self._Q, self.L.T)
        m = self.L.shape[0]
        lhs = np.eye(m) + gamma * self.L @ qinv_lt
        shift = gamma * self.L @ np.linalg.solve(self._Q, self._Atb)
        return cho_factor(0.5 * (lhs + lhs.T)), shift

    def solve(self, target, gamma):
        rhs = self._Atb + gamma * self.L.T @ target
        return cho_solve(self._primal(float(gamma)), rhs)

    def dual_prox(self, p, gamma):
        fac, shift = self._dual(float(gamma))
        return cho_solve(fac, np.asarray(p, dtype=float) + shift)

    def to_dict(self):
        return {"kind": self.kind, "A": self.A.tolist(), "b": self.b.tolist()}


class AffineSolver(USubproblemSolver):
    """``G`` is the indicator of ``{u : C u = d}``; KKT system with a cached LU."""

    kind = "affine_indicator"

    def __init__(self, C, d, L):
        super().__init__(L)
        self.C = np.atleast_2d(np.asarray(C, dtype=float))
        self.d = np.asarray(d, dtype=float).ravel()
        self.oracle = AffineIndicator(self.C, self.d)
        self._kkt = lru_cache(maxsize=4)(self._kkt_factor)
        self._u0 = np.linalg.lstsq(self.C, self.d, rcond=None)[0]
        # w with P_{ker C} L^T w = 0  <=>  w in ker(N^T L^T), N a basis of ker C
        kerC = self.oracle.null_basis.columns
        cons = kerC.T @ self.L.T
        self._dual_range = _null_projector(cons) if cons.size else np.eye(self.L.shape[0])

    def _kkt_factor(self, gamma):
        p = self.C.shape[0]
        kkt = np.block([[gamma * self._LtL, self.C.T], [self.C, np.zeros((p, p))]])
        return lu_factor(kkt)

    def solve(self, target, gamma):
        n = self.C.shape[1]
        rhs = np.concatenate([gamma * self.L.T @ target, self.d])
        return lu_solve(self._kkt(float(gamma)), rhs)[:n]

    def dual_prox(self, p, gamma):
        return self._dual_range @ (np.asarray(p, dtype=float) + gamma * self.L @ self._u0)

    def to_dict(self):
        return {"kind": self.kind, "C": self.C.tolist(), "d": self.d.tolist()}


class L1OrthogonalSolver(USubproblemSolver):
    """``G = ||.||_1`` with ``L^T L = c I``; scaled soft-thresholding."""

    kind = "l1_with_orthogonal_L"

    def __init__(self, L):
        super().__init__(L)
        c = self._LtL[0, 0]
        if not np.allclose(self._LtL, c * np.eye(self._LtL.shape[0]), atol=1e-10 * max(1.0, c)):
            raise ValueError("L^T L must be a multiple of the identity")
        self.c = float(c)
        self.oracle = L1Norm(self.L.shape[1])

    def solve(self, target, gamma):
        a = self.L.T @ target / self.c
        return np.sign(a) * np.maximum(np.abs(a) - 1.0 / (gamma * self.c), 0.0)

    def dual_prox(self, p, gamma):
        # projection onto {w : ||L^T w||_inf <= 1}
        p = np.asarray(p, dtype=float)
        a = self.L.T @ p / self.c
        return p - self.L @ a + self.L @ np.clip(a, -1.0 / self.c, 1.0 / self.c)

    def to_dict(self):
        return {"kind": self.kind}


def conjugate_prox(J: FunctionOracle):
    """``w -> prox_{gamma J*}(w)`` from an explicit conjugate where one is known.

    Norms have ball indicators as conjugates, so the result does not depend on
    ``gamma``. Other kinds fall back to the Moreau identity.
    """
    if isinstance(J, L1Norm):
        return lambda w, gamma: np.clip(w, -1.0, 1.0)
    if isinstance(J, LinfNorm):
        return lambda w, gamma: L1Ball(np.zeros(np.size(w)), 1.0).prox(w)
    if isinstance(J, Zero):
        return lambda w, gamma: np.zeros_like(np.asarray(w, dtype=float))
    return lambda w, gamma: np.asarray(w) - gamma * J.prox(np.asarray(w) / gamma, 1.0 / gamma)


@dataclass
class ADMMState:
    u: np.ndarray | None
    v: np.ndarray
    y: np.ndarray
    w: np.ndarray
    k: int = 0


def initial_state(J: FunctionOracle, gamma: float, w0) -> ADMMState:
    """``v_0 = prox_{J/gamma}(w_0/gamma)`` and ``y_0 = w_0 - gamma v_0``."""
    w0 = np.asarray(w0, dtype=float).copy()
    v0 = J.prox(w0 / gamma, 1.0 / gamma)
    return ADMMState(None, v0, w0 - gamma * v0, w0, 0)


def admm_step(solver: USubproblemSolver, J: FunctionOracle, gamma: float, state: ADMMState) -> ADMMState:
    L = solver.L
    u = solver.solve(state.v - state.y / gamma, gamma)
    w = state.y + gamma * (L @ u)
    v = J.prox(w / gamma, 1.0 / gamma)
    y = w - gamma * v
    return ADMMState(u, v, y, w, state.k + 1)


@dataclass
class ADMMTrace:
    """Row ``i`` is the state after step ``k = i + 1``."""

    k: np.ndarray
    dist_u: np.ndarray
    dist_v: np.ndarray
    dist_y: np.ndarray
    dist_w: np.ndarray
    primal_residual: np.ndarray
    w_step: np.ndarray
    fp_G: list
    fp_J: list
    w: np.ndarray = field(repr=False, default=None)

    CSV_HEADER = ("k", "dist_u", "dist_v", "dist_y", "dist_w", "fp_G", "fp_J", "primal_residual")

    def __len__(self):
        return self.k.size

    def rows(self):
        ids = []
        for fps in (self.fp_G, self.fp_J):
            seen: dict = {}
            ids.append([seen.setdefault(fp, len(seen)) for fp in fps])
        for i in range(len(self)):
            yield (
                int(self.k[i]), self.dist_u[i], self.dist_v[i], self.dist_y[i], self.dist_w[i],
                ids[0][i], ids[1][i], self.primal_residual[i],
            )


@dataclass(frozen=True)
class ADMMReference:
    u: np.ndarray
    v: np.ndarray
    y: np.ndarray
    w: np.ndarray
    residual: float
    iterations: int
    converged: bool


def run_admm(
    solver: USubproblemSolver,
    J: FunctionOracle,
    gamma: float,
    w0,
    max_iter: int = 500,
    stop_tol: float = 0.0,
    reference: ADMMReference | None = None,
    record_charts: bool = True,
    keep_w: bool = False,
):
    """Run ADMM; stops after ``max_iter`` steps or when ``||w_{k+1} - w_k|| <= stop_tol``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    state = initial_state(J, gamma, w0)
    ref = reference
    cols = {c: [] for c in ("du", "dv", "dy", "dw", "pr", "step")}
    fp_g, fp_j, ws = [], [], []

    def d(a, b):
        return math.nan if b is None else float(np.linalg.norm(a - b))

    for _ in range(max_iter):
        new = admm_step(solver, J, gamma, state)
        step = float(np.linalg.norm(new.w - state.w))
        state = new
        cols["du"].append(d(state.u, ref and ref.u))
        cols["dv"].append(d(state.v, ref and ref.v))
        cols["dy"].append(d(state.y, ref and ref.y))
        cols["dw"].append(d(state.w, ref and ref.w))
        cols["pr"].append(float(np.linalg.norm(solver.L @ state.u - state.v)))
        cols["step"].append(step)
        if keep_w:
            ws.append(state.w.copy())
        if record_charts:
            fp_g.append(solver.oracle.chart(state.u).fingerprint)
            fp_j.append(J.chart(state.v).fingerprint)
        if step <= stop_tol:
            break
    n = len(cols["step"])
    trace = ADMMTrace(
        np.arange(1, n + 1),
        *(np.array(cols[c]) for c in ("du", "dv", "dy", "dw", "pr", "step")),
        fp_G=fp_g,
        fp_J=fp_j,
        w=np.array(ws) if keep_w else None,
    )
    return trace, state


def reference_admm(solver, J, gamma, w0, tol: float = 1e-14, max_iter: int = 10**6, patience: int = 2000) -> ADMMReference:
    state = initial_state(J, gamma, w0)
    best, best_at, best_state = math.inf, 0, None
    k = 0
    for k in range(1, max_iter + 1):
        new = admm_step(solver, J, gamma, state)
        step = float(np.linalg.norm(new.w - state.w))
        state = new
        if step < best:
            best, best_at, best_state = step, k, state
        if step <= tol:
            return ADMMReference(state.u, state.v, state.y, state.w, step, k, True)
        if k - best_at > patience:
            break
    s = best_state
    return ADMMReference(s.u, s.v, s.y, s.w, best, k, False)


def dual_dr_sequence(solver: USubproblemSolver, J: FunctionOracle, gamma: float, w0, iterations: int) -> np.ndarray:
    """Unrelaxed stationary DR on the dual, from explicit conjugates.

    ``y_k = prox_{gamma J*}(w_k)`` and
    ``w_{k+1} = prox_{gamma Ghat}(2 y_k - w_k) + w_k - y_k``. Returns ``w_1..w_iterations``.
    """
    jconj = conjugate_prox(J)
    w = np.asarray(w0, dtype=float).copy()
    out = np.empty((iterations, w.size))
    for k in range(iterations):
        y = jconj(w, gamma)
        w = solver.dual_prox(2.0 * y - w, gamma) + w - y
        out[k] = w
    return out


@dataclass(frozen=True)
class ADMMPrediction:
    linearization: LinearizedDR
    cos_friedrichs: float | None
    rho_polyhedral: float | None
    range_LG: Basis


def admm_rate_prediction(solver: USubproblemSolver, J: FunctionOracle, gamma: float, ref: ADMMReference) -> ADMMPrediction:
    """Linearized dual operator at ``(u*, v*, y*)``.

    ``M_G = L_G (I + (L_G^T L_G)^{-1} H_G)^{-1} (L_G^T L_G)^{-1} L_G^T`` in tangent
    coordinates of ``G``; ``M_J = P_J (I + H_J)^{-1} P_J``.
    """
    L = solver.L
    G = solver.oracle
    chart_G = G.chart(ref.u)
    chart_J = J.chart(ref.v, CHART_TOL)
    B = chart_G.basis.columns
    LG = L @ B
    m = L.shape[0]
    eye = np.eye(m)
    if B.shape[1]:
        gram = LG.T @ LG
        if np.linalg.matrix_rank(gram) < B.shape[1]:
            raise ValueError("L restricted to the tangent of G is rank deficient")
        HG = B.T @ tangent_hessian(G, ref.u, -L.T @ ref.y, chart_G) @ B / gamma
        ginv = np.linalg.inv(gram)
        MG = LG @ np.linalg.solve(np.eye(B.shape[1]) + ginv @ HG, ginv) @ LG.T
    else:
        MG = np.zeros((m, m))
    HJ = tangent_hessian(J, ref.v, ref.y, chart_J) / gamma
    PJ = chart_J.projector
    WJ = np.linalg.inv(eye + PJ @ HJ @ PJ)
    MJ = PJ @ WJ @ PJ
    M = eye + 2.0 * MG @ MJ - MG - MJ
    M_inf = _null_projector(MG @ (eye - MJ) + (eye - MG) @ MJ)
    rho = float(np.max(np.abs(np.linalg.eigvals(M - M_inf)), initial=0.0))
    lin = LinearizedDR(HG if B.shape[1] else None, HJ, None, WJ, MG, MJ, M, M, M_inf, rho, gamma, 1.0)
    range_LG = basis_from_columns(LG) if B.shape[1] else Basis.empty(m)
    rep = principal_angles(chart_J.basis, range_LG)
    cos_f = rep.cos_friedrichs
    poly = None
    if G.polyhedral and J.polyhedral:
        poly = 0.0 if cos_f is None else cos_f
    return ADMMPrediction(lin, cos_f, poly, range_LG)


def solver_from_dict(d: dict, L) -> USubproblemSolver:
    from .prox import _matrix, _vector

    kind = d["kind"]
    base = d.get("_base")
    if kind == "quadratic":
        return QuadraticSolver(_matrix(d["A"], base), _vector(d["b"], base), L)
    if kind == "affine_indicator":
        return AffineSolver(_matrix(d["C"], base), _vector(d["d"], base), L)
    if kind == "l1_with_orthogonal_L":
        return L1OrthogonalSolver(L)
    raise ValueError(f"unknown u-subproblem kind {kind!r}")
