"""Partly smooth functions with proximity operators, manifold charts and
non-degeneracy margins.

Every oracle acts on flat float vectors. Matrix-valued arguments (nuclear
norm) are vectorized row-major, so ``x.reshape(rows, cols)`` recovers the
matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .subspace import Basis, null_space_basis

FEAS_TOL = 1e-9
CHART_TOL = 1e-8
NUCLEAR_RANK_TOL = 1e-9


@dataclass(frozen=True)
class ManifoldChart:
    """Discrete fingerprint of the active manifold plus its tangent space."""

    fingerprint: tuple
    basis: Basis
    is_affine: bool

    @property
    def manifold_dim(self) -> int:
        return self.basis.dim

    @property
    def projector(self) -> np.ndarray:
        b = self.basis.columns
        return b @ b.T

    def project(self, v: np.ndarray) -> np.ndarray:
        return self.basis.project(v)


@dataclass(frozen=True)
class NDReport:
    """Relative-interior test of a candidate subgradient.

    ``margin > 0`` means the candidate is in the relative interior of the
    subdifferential. Infeasible candidates carry a non-positive margin equal to
    minus the size of the violation.
    """

    margin: float
    feasible: bool

    @property
    def certified(self) -> bool:
        return self.feasible and self.margin > 0

    def to_dict(self) -> dict:
        return {"margin": _json_float(self.margin), "feasible": bool(self.feasible)}


def _json_float(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _infeasible(violation: float) -> NDReport:
    return NDReport(-abs(float(violation)), False)


def _coordinate_basis(n: int, idx) -> Basis:
    idx = np.asarray(idx, dtype=int)
    cols = np.zeros((n, idx.size))
    cols[idx, np.arange(idx.size)] = 1.0
    return Basis(cols)


def _check_gamma(gamma: float) -> None:
    if not gamma > 0:
        raise ValueError(f"prox step must be positive, got {gamma}")


def soft_threshold(x: np.ndarray, t) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def project_l1_ball(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{u : ||u||_1 <= radius}`` by sort and threshold."""
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    # a few ulps of slack keep the projection exactly idempotent
    if a.sum() <= radius * (1.0 + 4.0 * a.size * np.finfo(float).eps):
        return v.copy()
    if radius <= 0:
        return np.zeros_like(v)
    mu = np.sort(a)[::-1]
    cssv = np.cumsum(mu) - radius
    ind = np.arange(1, a.size + 1)
    rho = np.nonzero(mu - cssv / ind > 0)[0][-1]
    theta = cssv[rho] / (rho + 1.0)
    w = np.maximum(a - theta, 0.0)
    # theta carries rounding proportional to ||v||; re-centre on the active set
    # so the output is feasible to a few ulps of the radius
    for _ in range(3):
        excess = w.sum() - radius
        if excess <= 2.0 * a.size * np.finfo(float).eps * radius:
            break
        w = np.maximum(w - excess / np.count_nonzero(w), 0.0)
    return np.sign(v) * w


def tv1d_denoise(y: np.ndarray, lam: float) -> np.ndarray:
    """Exact minimizer of ``0.5*||x - y||^2 + lam*sum|x[i+1] - x[i]|``.

    Direct taut-string algorithm of Condat, linear time in practice.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    out = np.empty(n)
    if n == 0:
        return out
    if lam <= 0:
        return y.copy()
    k = k0 = 0
    kplus = kminus = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    twolam, minlam = 2.0 * lam, -lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                while True:
                    out[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = kminus = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    out[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = kplus = k0
                vmax = y[k0]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                out[k0 : k + 1] = vmin
                return out
        umin += y[k + 1] - vmin
        if umin < minlam:
            while True:
                out[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = kplus = kminus = k0
            vmin = y[k0]
            vmax = vmin + twolam
            umin, umax = lam, minlam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            while True:
                out[k0] = vmax
                k0 += 1
                if k0 > kplus:
                    break
            k = kplus = kminus = k0
            vmax = y[k0]
            vmin = vmax - twolam
            umin, umax = lam, minlam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= minlam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = minlam


class FunctionOracle:
    """A proper lsc convex function with its prox, chart and ND margin."""

    kind: str = "abstract"
    polyhedral: bool = True
    is_indicator: bool = False
    dim: int | None = None

    def __call__(self, x) -> float:
        return self.eval(x)

    def eval(self, x) -> float:
        raise NotImplementedError

    def prox(self, x, gamma: float) -> np.ndarray:
        raise NotImplementedError

    def chart(self, x, tol: float = CHART_TOL) -> ManifoldChart:
        raise NotImplementedError

    def nd_margin(self, x, u, tol: float = CHART_TOL) -> NDReport:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def retract(self, x, y, tol: float = CHART_TOL) -> np.ndarray:
        """Map ``y`` (near ``x``) onto the active manifold at ``x``."""
        ch = self.chart(x, tol)
        x = np.asarray(x, dtype=float)
        return x + ch.project(np.asarray(y, dtype=float) - x)

    def riemannian_hessian(self, x, basis: Basis, tol: float = CHART_TOL) -> np.ndarray:
        """Riemannian Hessian at ``x`` as a quadratic form in ``basis`` coordinates."""
        x = self._vec(x)
        self._check_tangent(x, basis, tol)
        return np.zeros((basis.dim, basis.dim))

    def _check_tangent(self, x, basis: Basis, tol: float) -> ManifoldChart:
        ch = self.chart(x, tol)
        b = basis.columns
        if b.shape[0] != x.size:
            raise ValueError("direction basis has the wrong ambient dimension")
        if b.size and np.max(np.abs(b - ch.project(b))) > 1e-8:
            raise ValueError("direction basis leaves the tangent space of the active manifold")
        return ch

    def _vec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if self.dim is not None and x.size != self.dim:
            raise ValueError(f"{self.kind}: expected dimension {self.dim}, got {x.size}")
        return x

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()})"


class L1Norm(FunctionOracle):
    kind = "l1_norm"

    def __init__(self, dim: int | None = None):
        self.dim = dim

    def eval(self, x):
        return float(np.sum(np.abs(self._vec(x))))

    def prox(self, x, gamma):
        _check_gamma(gamma)
        return soft_threshold(self._vec(x), gamma)

    def chart(self, x, tol=CHART_TOL):
        x = self._vec(x)
        supp = np.flatnonzero(np.abs(x) > tol)
        signs = tuple(int(s) for s in np.sign(x[supp]))
        return ManifoldChart((self.kind, tuple(supp.tolist()), signs), _coordinate_basis(x.size, supp), True)

    def nd_margin(self, x, u, tol=CHART_TOL):
        x, u = self._vec(x), self._vec(u)
        supp = np.abs(x) > tol
        viol = np.max(np.abs(u[supp] - np.sign(x[supp])), initial=0.0)
        off = np.abs(u[~supp])
        viol = max(viol, np.max(off - 1.0, initial=0.0))
        if viol > tol:
            return _infeasible(viol)
        if off.size == 0:
            return NDReport(math.inf, True)
        return NDReport(float(1.0 - off.max()), True)

    def to_dict(self):
        return {"kind": self.kind}


class GroupL12(FunctionOracle):
    """Sum of Euclidean norms over disjoint blocks."""

    kind = "group_l12"
    polyhedral = False

    def __init__(self, blocks):
        self.blocks = [np.asarray(b, dtype=int) for b in blocks]
        idx = np.concatenate(self.blocks) if self.blocks else np.zeros(0, int)
        if np.unique(idx).size != idx.size:
            raise ValueError("blocks must be disjoint")
        self.dim = int(idx.max()) + 1 if idx.size else 0
        if idx.size != self.dim:
            raise ValueError("blocks must cover 0..n-1")

    @classmethod
    def contiguous(cls, n: int, block_size: int) -> "GroupL12":
        if n % block_size:
            raise ValueError("block size must divide the dimension")
        return cls([np.arange(i, i + block_size) for i in range(0, n, block_size)])

    def _norms(self, x):
        return np.array([np.linalg.norm(x[b]) for b in self.blocks])

    def eval(self, x):
        return float(self._norms(self._vec(x)).sum())

    def prox(self, x, gamma):
        _check_gamma(gamma)
        x = self._vec(x)
        out = np.zeros_like(x)
        for b in self.blocks:
            nb = np.linalg.norm(x[b])
            if nb > gamma:
                out[b] = x[b] * (1.0 - gamma / nb)
        return out

    def _active(self, x, tol):
        return [i for i, nb in enumerate(self._norms(x)) if nb > tol]

    def chart(self, x, tol=CHART_TOL):
        x = self._vec(x)
        active = self._active(x, tol)
        coords = np.sort(np.concatenate([self.blocks[i] for i in active])) if active else []
        return ManifoldChart((self.kind, tuple(active)), _coordinate_basis(x.size, coords), True)

    def nd_margin(self, x, u, tol=CHART_TOL):
        x, u = self._vec(x), self._vec(u)
        norms = self._norms(x)
        viol, inactive = 0.0, []
        for i, b in enumerate(self.blocks):
            if norms[i] > tol:
                viol = max(viol, np.linalg.norm(u[b] - x[b] / norms[i]))
            else:
                inactive.append(np.linalg.norm(u[b]))
        viol = max(viol, max(inactive, default=0.0) - 1.0)
        if viol > tol:
            return _infeasible(viol)
        if not inactive:
            return NDReport(math.inf, True)
        return NDReport(float(1.0 - max(inactive)), True)

    def hessian_matrix(self, x, tol=CHART_TOL) -> np.ndarray:
        """Ambient Hessian of the smooth restriction: per active block ``(I - x̄x̄ᵀ)/||x_b||``."""
        x = self._vec(x)
        h = np.zeros((x.size, x.size))
        for b in self.blocks:
            nb = np.linalg.norm(x[b])
            if nb > tol:
                xb = x[b] / nb
                h[np.ix_(b, b)] = (np.eye(b.size) - np.outer(xb, xb)) / nb
        return h

    def riemannian_hessian(self, x, basis, tol=CHART_TOL):
        x = self._vec(x)
        self._check_tangent(x, basis, tol)
        b = basis.columns
        h = b.T @ self.hessian_matrix(x, tol) @ b
        return 0.5 * (h + h.T)

    def to_dict(self):
        return {"kind": self.kind, "blocks": [b.tolist() for b in self.blocks]}


class LinfNorm(FunctionOracle):
    kind = "linf_norm"

    def __init__(self, dim: int | None = None):
        self.dim = dim

    def eval(self, x):
        x = self._vec(x)
        return float(np.max(np.abs(x), initial=0.0))

    def prox(self, x, gamma):
        # Moreau: prox of gamma*||.||_inf is x minus gamma times the l1-ball projection of x/gamma
        _check_gamma(gamma)
        x = self._vec(x)
        return x - gamma * project_l1_ball(x / gamma, 1.0)

    def _saturation(self, x, tol):
        m = np.max(np.abs(x), initial=0.0)
        if m <= tol:
            return None
        return np.flatnonzero(m - np.abs(x) <= tol)

    def chart(self, x, tol=CHART_TOL):
        x = self._vec(x)
        sat = self._saturation(x, tol)
        if sat is None:
            return ManifoldChart((self.kind, "zero"), Basis.empty(x.size), True)
        signs = np.sign(x[sat])
        free = np.setdiff1d(np.arange(x.size), sat)
        cols = _coordinate_basis(x.size, free).columns
        s = np.zeros(x.size)
        s[sat] = signs / np.sqrt(sat.size)
        basis = Basis(np.column_stack([cols, s]))
        fp = (self.kind, tuple(sat.tolist()), tuple(int(v) for v in signs))
        return ManifoldChart(fp, basis, True)

    def nd_margin(self, x, u, tol=CHART_TOL):
        x, u = self._vec(x), self._vec(u)
        sat = self._saturation(x, tol)
        if sat is None:
            # subdifferential at 0 is the unit l1 ball
            s = np.sum(np.abs(u))
            if s > 1.0 + tol:
                return _infeasible(s - 1.0)
            return NDReport(float(1.0 - s), True)
        signs = np.sign(x[sat])
        off = np.ones(x.size, bool)
        off[sat] = False
        su = signs * u[sat]
        viol = max(
            np.max(np.abs(u[off]), initial=0.0),
            abs(np.sum(np.abs(u[sat])) - 1.0),
            np.max(-su, initial=0.0),
        )
        if viol > tol:
            return _infeasible(viol)
        if sat.size == 1:
            return NDReport(math.inf, True)
        return NDReport(float(su.min()), True)

    def to_dict(self):
        return {"kind": self.kind}


class NuclearNorm(FunctionOracle):
    kind = "nuclear_norm"
    polyhedral = False

    def __init__(self, rows: int, cols: int):
        self.rows, self.cols = int(rows), int(cols)
        self.dim = self.rows * self.cols

    def _mat(self, x):
        return self._vec(x).reshape(self.rows, self.cols)

    def eval(self, x):
        return float(np.sum(np.linalg.svd(self._mat(x), compute_uv=False)))

    def prox(self, x, gamma):
        _check_gamma(gamma)
        u, s, vt = np.linalg.svd(self._mat(x), full_matrices=False)
        s = np.maximum(s - gamma, 0.0)
        r = int(np.sum(s > 0))
        return ((u[:, :r] * s[:r]) @ vt[:r]).ravel()

    def _factor(self, x, tol):
        u, s, vt = np.linalg.svd(self._mat(x), full_matrices=True)
        r = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
        return u, s, vt.T, r

    def chart(self, x, tol=NUCLEAR_RANK_TOL):
        u, _, v, r = self._factor(x, tol)
        ur, up = u[:, :r], u[:, r:]
        vr, vp = v[:, :r], v[:, r:]
        cols = np.hstack([np.kron(ur, vr), np.kron(ur, vp), np.kron(up, vr)])
        return ManifoldChart((self.kind, r), Basis(cols), False)

    def retract(self, x, y, tol=NUCLEAR_RANK_TOL):
        """Truncated SVD of ``y`` at the rank of ``x``."""
        r = self._factor(x, tol)[3]
        u, s, vt = np.linalg.svd(self._mat(y), full_matrices=False)
        return ((u[:, :r] * s[:r]) @ vt[:r]).ravel()

    def nd_margin(self, x, u, tol=CHART_TOL):
        uu, _, v, r = self._factor(x, NUCLEAR_RANK_TOL)
        g = self._mat(u)
        ur, vr = uu[:, :r], v[:, :r]
        pu, pv = ur @ ur.T, vr @ vr.T
        tangent = pu @ g + g @ pv - pu @ g @ pv
        w = g - tangent
        viol = np.linalg.norm(tangent - ur @ vr.T)
        wn = np.linalg.norm(w, 2) if w.size else 0.0
        viol = max(viol, wn - 1.0)
        if viol > tol:
            return _infeasible(viol)
        if r == min(self.rows, self.cols):
            return NDReport(math.inf, True)
        return NDReport(float(1.0 - wn), True)

    def riemannian_hessian(self, x, basis, tol=NUCLEAR_RANK_TOL):
        from .rates import fd_riemannian_hessian

        x = self._vec(x)
        self._check_tangent(x, basis, tol)
        return fd_riemannian_hessian(self, x, basis)

    def to_dict(self):
        return {"kind": self.kind, "rows": self.rows, "cols": self.cols}


class TV1D(FunctionOracle):
    """Anisotropic 1-D total variation ``sum |x[i+1] - x[i]|``."""

    kind = "tv1d"

    def __init__(self, dim: int | None = None):
        self.dim = dim

    def eval(self, x):
        return float(np.sum(np.abs(np.diff(self._vec(x)))))

    def prox(self, x, gamma):
        _check_gamma(gamma)
        return tv1d_denoise(self._vec(x), gamma)

    def chart(self, x, tol=CHART_TOL):
        x = self._vec(x)
        dx = np.diff(x)
        jumps = np.flatnonzero(np.abs(dx) > tol)
        signs = tuple(int(s) for s in np.sign(dx[jumps]))
        edges = np.concatenate([[0], jumps + 1, [x.size]])
        cols = np.zeros((x.size, edges.size - 1))
        for j in range(edges.size - 1):
            a, b = edges[j], edges[j + 1]
            cols[a:b, j] = 1.0 / np.sqrt(b - a)
        return ManifoldChart((self.kind, tuple(jumps.tolist()), signs), Basis(cols), True)

    def nd_margin(self, x, u, tol=CHART_TOL):
        x, u = self._vec(x), self._vec(u)
        # D^T alpha = u  =>  alpha_j = -cumsum(u)_j, solvable iff sum(u) == 0
        alpha = -np.cumsum(u)[:-1]
        residual = abs(np.sum(u))
        dx = np.diff(x)
        jump = np.abs(dx) > tol
        viol = max(residual, np.max(np.abs(alpha[jump] - np.sign(dx[jump])), initial=0.0))
        off = np.abs(alpha[~jump])
        viol = max(viol, np.max(off - 1.0, initial=0.0))
        if viol > tol:
            return _infeasible(viol)
        if off.size == 0:
            return NDReport(math.inf, True)
        return NDReport(float(1.0 - off.max()), True)

    def to_dict(self):
        return {"kind": self.kind}


class AffineIndicator(FunctionOracle):
    """Indicator of ``{x : L x = b}``; the factorization is computed once."""

    kind = "affine_indicator"
    is_indicator = True

    def __init__(self, L, b):
        L = np.atleast_2d(np.asarray(L, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if L.shape[0] != b.size:
            raise ValueError("L and b have inconsistent shapes")
        self.L, self.b = L, b
        self.dim = L.shape[1]
        u, s, vt = np.linalg.svd(L, full_matrices=True)
        rank = int(np.sum(s > 1e-12 * s[0])) if s.size and s[0] > 0 else 0
        self._row = vt[:rank].T  # orthonormal basis of range(L^T)
        self._null = Basis(vt[rank:].T.copy())
        # minimum-norm particular solution
        self._x0 = self._row @ ((u[:, :rank].T @ b) / s[:rank])
        if np.linalg.norm(L @ self._x0 - b) > 1e-8 * max(1.0, np.linalg.norm(b)):
            raise ValueError("affine constraint is inconsistent")

    @classmethod
    def subspace(cls, basis: Basis) -> "AffineIndicator":
        """Indicator of the linear subspace spanned by ``basis``."""
        from .subspace import complement

        normals = complement(basis).columns.T
        if normals.shape[0] == 0:
            normals = np.zeros((1, basis.ambient_dim))
        return cls(normals, np.zeros(normals.shape[0]))

    @property
    def null_basis(self) -> Basis:
        return self._null

    def _feasible(self, x):
        r = np.linalg.norm(self.L @ x - self.b)
        return r <= FEAS_TOL * max(1.0, np.linalg.norm(self.b), np.linalg.norm(x))

    def eval(self, x):
        return 0.0 if self._feasible(self._vec(x)) else math.inf

    def prox(self, x, gamma=1.0):
        _check_gamma(gamma)
        x = self._vec(x)
        correction = self._row @ (self._row.T @ (x - self._x0))
        scale = max(1.0, np.linalg.norm(x), np.linalg.norm(self._x0))
        if np.linalg.norm(correction) <= 32.0 * x.size * np.finfo(float).eps * scale:
            # already feasible to rounding; returning x keeps projection idempotent
            return x.copy()
        return x - correction

    def chart(self, x, tol=CHART_TOL):
        x = self._vec(x)
        if not self._feasible(x):
            raise ValueError("point is outside the affine set")
        return ManifoldChart((self.kind,), self._null, True)

    def nd_margin(self, x, u, tol=CHART_TOL):
        u = self._vec(u)
        viol = np.linalg.norm(self._null.project(u))
        if viol > tol * max(1.0, np.linalg.norm(u)):
            return _infeasible(viol)
        return NDReport(math.inf, True)

    def to_dict(self):
        return {"kind": self.kind, "L": self.L.tolist(), "b": self.b.tolist()}


class L1Ball(FunctionOracle):
    kind = "l1_ball"
    is_indicator = True

    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=float).ravel()
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        self.dim = self.center.size

    def _norm(self, x):
        return float(np.sum(np.abs(x - self.center)))

    def _feasible(self, x):
        return self._norm(x) <= self.radius + FEAS_TOL * max(1.0, self.radius)

    def eval(self, x):
        return 0.0 if self._feasible(self._vec(x)) else math.inf

    def prox(self, x, gamma=1.0):
        _check_gamma(gamma)
        x = self._vec(x)
        slack = 4.0 * x.size * np.finfo(float).eps * (self.radius + np.abs(self.center).max(initial=0.0))
        if self._norm(x) <= self.radius + slack:
            return x.copy()
        return self.center + project_l1_ball(x - self.center, self.radius)

    def _face(self, x, tol):
        d = x - self.center
        if self._norm(x) < self.radius - tol:
            return None, None
        face = np.flatnonzero(np.abs(d) > tol)
        return face, np.sign(d[face])

    def chart(self, x, tol=CHART_TOL):
        x = self._vec(x)
        if not self._feasible(x):
            raise ValueError("point is outside the l1 ball")
        face, signs = self._face(x, tol)
        if face is None:
            return ManifoldChart((self.kind, "interior"), Basis.full(x.size), True)
        local = null_space_basis(signs[None, :]).columns
        cols = np.zeros((x.size, local.shape[1]))
        cols[face] = local
        fp = (self.kind, tuple(face.tolist()), tuple(int(s) for s in signs))
        return ManifoldChart(fp, Basis(cols), True)

    def nd_margin(self, x, u, tol=CHART_TOL):
        """Normal cone ``{t*s : t >= 0, s_i = sign_i on the face, |s_i| <= 1 off it}``.

        Margin is ``min(t, t - max_off |u_i|)``, positive exactly on the relative interior.
        """
        x, u = self._vec(x), self._vec(u)
        face, signs = self._face(x, tol)
        if face is None:
            viol = np.linalg.norm(u)
            return _infeasible(viol) if viol > tol else NDReport(math.inf, True)
        t = float(np.mean(signs * u[face]))
        off = np.ones(x.size, bool)
        off[face] = False
        offmax = np.max(np.abs(u[off]), initial=0.0)
        viol = max(np.max(np.abs(u[face] - t * signs), initial=0.0), -t, offmax - max(t, 0.0))
        if viol > tol:
            return _infeasible(viol)
        return NDReport(min(t, t - offmax), True)

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


class LinfBall(FunctionOracle):
    kind = "linf_ball"
    is_indicator = True

    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=float).ravel()
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        self.dim = self.center.size

    def _feasible(self, x):
        return np.max(np.abs(x - self.center), initial=0.0) <= self.radius + FEAS_TOL * max(1.0, self.radius)

    def eval(self, x):
        return 0.0 if self._feasible(self._vec(x)) else math.inf

    def prox(self, x, gamma=1.0):
        _check_gamma(gamma)
        x = self._vec(x)
        return self.center + np.clip(x - self.center, -self.radius, self.radius)

    def _active(self, x, tol):
        d = x - self.center
        act = np.flatnonzero(np.abs(d) >= self.radius - tol)
        return act, np.sign(d[act])

    def chart(self, x, tol=CHART_TOL):
        x = self._vec(x)
        if not self._feasible(x):
            raise ValueError("point is outside the linf ball")
        act, signs = self._active(x, tol)
        if act.size == 0:
            return ManifoldChart((self.kind, "interior"), Basis.full(x.size), True)
        free = np.setdiff1d(np.arange(x.size), act)
        fp = (self.kind, tuple(act.tolist()), tuple(int(s) for s in signs))
        return ManifoldChart(fp, _coordinate_basis(x.size, free), True)

    def nd_margin(self, x, u, tol=CHART_TOL):
        x, u = self._vec(x), self._vec(u)
        act, signs = self._active(x, tol)
        off = np.ones(x.size, bool)
        off[act] = False
        su = signs * u[act]
        viol = max(np.max(np.abs(u[off]), initial=0.0), np.max(-su, initial=0.0))
        if viol > tol:
            return _infeasible(viol)
        if act.size == 0:
            return NDReport(math.inf, True)
        return NDReport(float(su.min()), True)

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


class Quadratic(FunctionOracle):
    """``0.5*||A x - b||^2``; smooth, so its manifold is the whole space."""

    kind = "quadratic"
    polyhedral = False

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).ravel()
        self.dim = self.A.shape[1]
        self._AtA = self.A.T @ self.A
        self._Atb = self.A.T @ self.b

    def eval(self, x):
        r = self.A @ self._vec(x) - self.b
        return 0.5 * float(r @ r)

    def gradient(self, x):
        return self._AtA @ self._vec(x) - self._Atb

    def prox(self, x, gamma):
        _check_gamma(gamma)
        x = self._vec(x)
        return np.linalg.solve(np.eye(self.dim) + gamma * self._AtA, x + gamma * self._Atb)

    def chart(self, x, tol=CHART_TOL):
        return ManifoldChart((self.kind,), Basis.full(self._vec(x).size), True)

    def nd_margin(self, x, u, tol=CHART_TOL):
        g = self.gradient(x)
        viol = np.linalg.norm(self._vec(u) - g)
        if viol > tol * max(1.0, np.linalg.norm(g)):
            return _infeasible(viol)
        return NDReport(math.inf, True)

    def riemannian_hessian(self, x, basis, tol=CHART_TOL):
        b = basis.columns
        return b.T @ self._AtA @ b

    def to_dict(self):
        return {"kind": self.kind, "A": self.A.tolist(), "b": self.b.tolist()}


class Zero(FunctionOracle):
    kind = "zero"

    def __init__(self, dim: int | None = None):
        self.dim = dim

    def eval(self, x):
        self._vec(x)
        return 0.0

    def prox(self, x, gamma):
        _check_gamma(gamma)
        return self._vec(x).copy()

    def chart(self, x, tol=CHART_TOL):
        return ManifoldChart((self.kind,), Basis.full(self._vec(x).size), True)

    def nd_margin(self, x, u, tol=CHART_TOL):
        viol = np.linalg.norm(self._vec(u))
        return _infeasible(viol) if viol > tol else NDReport(math.inf, True)

    def to_dict(self):
        return {"kind": self.kind}


class DiagonalIndicator(FunctionOracle):
    """Indicator of ``{(x, ..., x)}`` in ``(R^n)^m``; prox replicates the block mean."""

    kind = "diagonal_indicator"
    is_indicator = True

    def __init__(self, m: int, n: int):
        self.m, self.n = int(m), int(n)
        self.dim = self.m * self.n

    def _blocks(self, x):
        return self._vec(x).reshape(self.m, self.n)

    def _feasible(self, x):
        blk = self._blocks(x)
        return np.max(np.abs(blk - blk.mean(axis=0)), initial=0.0) <= FEAS_TOL * max(1.0, np.abs(blk).max(initial=0.0))

    def eval(self, x):
        return 0.0 if self._feasible(x) else math.inf

    def prox(self, x, gamma=1.0):
        _check_gamma(gamma)
        return np.tile(self._blocks(x).mean(axis=0), self.m)

    def chart(self, x, tol=CHART_TOL):
        if not self._feasible(x):
            raise ValueError("point is off the diagonal subspace")
        cols = np.tile(np.eye(self.n), (self.m, 1)) / np.sqrt(self.m)
        return ManifoldChart((self.kind,), Basis(cols), True)

    def nd_margin(self, x, u, tol=CHART_TOL):
        # normal space is {sum of blocks == 0}, equal to its relative interior
        viol = np.linalg.norm(self._blocks(u).sum(axis=0))
        return _infeasible(viol) if viol > tol else NDReport(math.inf, True)

    def to_dict(self):
        return {"kind": self.kind, "m": self.m, "n": self.n}


class SeparableSum(FunctionOracle):
    """``J(x_1, ..., x_m) = sum_i J_i(x_i)`` on the product space."""

    kind = "separable_sum"

    def __init__(self, parts, n: int):
        self.parts = list(parts)
        self.n = int(n)
        self.m = len(self.parts)
        self.dim = self.m * self.n
        self.polyhedral = all(p.polyhedral for p in self.parts)
        self.is_indicator = all(p.is_indicator for p in self.parts)

    def _blocks(self, x):
        return self._vec(x).reshape(self.m, self.n)

    def eval(self, x):
        return float(sum(p.eval(xi) for p, xi in zip(self.parts, self._blocks(x))))

    def prox(self, x, gamma):
        _check_gamma(gamma)
        return np.concatenate([p.prox(xi, gamma) for p, xi in zip(self.parts, self._blocks(x))])

    def chart(self, x, tol=CHART_TOL):
        charts = [p.chart(xi, tol) for p, xi in zip(self.parts, self._blocks(x))]
        dims = [c.manifold_dim for c in charts]
        cols = np.zeros((self.dim, sum(dims)))
        j = 0
        for i, c in enumerate(charts):
            cols[i * self.n : (i + 1) * self.n, j : j + dims[i]] = c.basis.columns
            j += dims[i]
        fp = (self.kind, tuple(c.fingerprint for c in charts))
        return ManifoldChart(fp, Basis(cols), all(c.is_affine for c in charts))

    def nd_margin(self, x, u, tol=CHART_TOL):
        reps = [p.nd_margin(xi, ui, tol) for p, xi, ui in zip(self.parts, self._blocks(x), self._blocks(u))]
        return NDReport(min(r.margin for r in reps), all(r.feasible for r in reps))

    def retract(self, x, y, tol=CHART_TOL):
        return np.concatenate([p.retract(xi, yi, tol) for p, xi, yi in zip(self.parts, self._blocks(x), self._blocks(y))])

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "parts": [p.to_dict() for p in self.parts]}


_KINDS = {
    "l1_norm": lambda d, base: L1Norm(d.get("dim")),
    "linf_norm": lambda d, base: LinfNorm(d.get("dim")),
    "tv1d": lambda d, base: TV1D(d.get("dim")),
    "zero": lambda d, base: Zero(d.get("dim")),
    "nuclear_norm": lambda d, base: NuclearNorm(d["rows"], d["cols"]),
    "group_l12": lambda d, base: (
        GroupL12(d["blocks"]) if "blocks" in d else GroupL12.contiguous(d["dim"], d["block_size"])
    ),
    "affine_indicator": lambda d, base: AffineIndicator(_matrix(d["L"], base), _vector(d["b"], base)),
    "l1_ball": lambda d, base: L1Ball(_vector(d["center"], base), d["radius"]),
    "linf_ball": lambda d, base: LinfBall(_vector(d["center"], base), d["radius"]),
    "quadratic": lambda d, base: Quadratic(_matrix(d["A"], base), _vector(d["b"], base)),
    "diagonal_indicator": lambda d, base: DiagonalIndicator(d["m"], d["n"]),
    "separable_sum": lambda d, base: SeparableSum([from_dict(p, base) for p in d["parts"]], d["n"]),
}


def _matrix(value, base: Path | None):
    from .io import read_matrix

    if isinstance(value, str):
        path = Path(value)
        if base is not None and not path.is_absolute():
            path = base / path
        return read_matrix(path)
    return np.atleast_2d(np.asarray(value, dtype=float))


def _vector(value, base: Path | None):
    if isinstance(value, str):
        return _matrix(value, base).ravel()
    return np.asarray(value, dtype=float).ravel()


def from_dict(d: dict, base: Path | None = None) -> FunctionOracle:
    """Build an oracle from ``{"kind": ..., parameters...}``.

    Matrix parameters may be nested lists or paths to whitespace text files,
    resolved relative to ``base``.
    """
    try:
        factory = _KINDS[d["kind"]]
    except KeyError:
        raise ValueError(f"unknown function kind: {d.get('kind')!r}") from None
    return factory(d, base)
