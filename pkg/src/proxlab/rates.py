"""Local rate analysis: linearized DR matrices, limit projector, spectral rate,
finite-difference Riemannian Hessians and the identification-count bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .prox import FunctionOracle, ManifoldChart, NDReport
from .subspace import Basis, dr_rate, principal_angles

NULL_TOL = 1e-10


class ManifoldCrossingError(ValueError):
    """A finite-difference probe left the active manifold."""

    def __init__(self, direction: np.ndarray, step: float):
        super().__init__(f"probe of size {step:g} along a tangent direction changed the fingerprint")
        self.direction = direction
        self.step = step


def fd_riemannian_hessian(
    f: FunctionOracle,
    x,
    basis: Basis,
    h: float = 1e-4,
    fun=None,
    retract=None,
    chart_tol: float | None = None,
) -> np.ndarray:
    """Second derivatives of ``t -> fun(retract(x, x + t v))`` along tangent directions.

    Diagonal entries use central differences with one Richardson step
    (``h`` and ``h/2``); off-diagonal entries follow by polarization
    ``(Q(b_i + b_j) - Q(b_i - b_j)) / 4``. ``fun`` defaults to ``f.eval`` and
    ``retract`` to ``f.retract``.
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError("finite-difference step must lie in [1e-6, 1e-3]")
    x = np.asarray(x, dtype=float).ravel()
    fun = f.eval if fun is None else fun
    retract = f.retract if retract is None else retract
    tol_kw = {} if chart_tol is None else {"tol": chart_tol}
    fp0 = f.chart(x, **tol_kw).fingerprint
    f0 = fun(x)

    def phi(v, t):
        y = retract(x, x + t * v)
        if f.chart(y, **tol_kw).fingerprint != fp0:
            raise ManifoldCrossingError(v, t)
        return fun(y)

    def second(v):
        d1 = (phi(v, h) - 2.0 * f0 + phi(v, -h)) / h**2
        h2 = 0.5 * h
        d2 = (phi(v, h2) - 2.0 * f0 + phi(v, -h2)) / h2**2
        return (4.0 * d2 - d1) / 3.0

    b = basis.columns
    d = b.shape[1]
    hess = np.zeros((d, d))
    for i in range(d):
        hess[i, i] = second(b[:, i])
    for i in range(d):
        for j in range(i + 1, d):
            hess[i, j] = hess[j, i] = 0.25 * (second(b[:, i] + b[:, j]) - second(b[:, i] - b[:, j]))
    return 0.5 * (hess + hess.T)


def tangent_hessian(f: FunctionOracle, x, u, chart: ManifoldChart | None = None) -> np.ndarray:
    """Ambient (tangent-supported) Hessian of ``f - <u, .>`` along the active manifold at ``x``.

    The linear term only contributes on curved manifolds, where it is captured
    by differencing the whole function.
    """
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    chart = f.chart(x) if chart is None else chart
    b = chart.basis.columns
    if f.polyhedral or b.shape[1] == 0:
        return np.zeros((x.size, x.size))
    if chart.is_affine:
        hc = f.riemannian_hessian(x, chart.basis)
    else:
        hc = fd_riemannian_hessian(f, x, chart.basis, fun=lambda y: f.eval(y) - float(u @ y))
    return b @ hc @ b.T


@dataclass(frozen=True)
class LinearizedDR:
    H_G: np.ndarray
    H_J: np.ndarray
    W_G: np.ndarray
    W_J: np.ndarray
    M_G: np.ndarray
    M_J: np.ndarray
    M: np.ndarray
    M_lambda: np.ndarray
    M_inf: np.ndarray
    rho: float
    gamma: float
    lam: float

    def power_rate(self, k: int = 200) -> float:
        """``||(M_lambda - M_inf)^k||^(1/k)``, the spectral-radius-formula estimate."""
        a = np.linalg.matrix_power(self.M_lambda - self.M_inf, k)
        nrm = np.linalg.norm(a, 2)
        return float(nrm ** (1.0 / k)) if nrm > 0 else 0.0


def _null_projector(a: np.ndarray, tol: float = NULL_TOL) -> np.ndarray:
    n = a.shape[1]
    _, s, vt = np.linalg.svd(a)
    if s.size == 0:
        return np.eye(n)
    # operands have unit scale, so a matrix that is zero up to rounding has rank 0
    rank = int(np.sum(s > tol * max(s[0], 1.0)))
    nb = vt[rank:].T
    return nb @ nb.T


def build_linearization(
    chart_G: ManifoldChart,
    chart_J: ManifoldChart,
    H_G: np.ndarray | None,
    H_J: np.ndarray | None,
    gamma: float,
    lam: float = 1.0,
) -> LinearizedDR:
    """Linearized DR operator around a fixed point.

    ``H_G`` and ``H_J`` are the ambient Hessians of the shifted, ``gamma``-scaled
    functions (``None`` means zero). ``gamma`` is recorded for reporting only.
    """
    if not 0.0 < lam < 2.0:
        raise ValueError(f"relaxation parameter must lie in (0, 2), got {lam}")
    n = chart_G.basis.ambient_dim
    if chart_J.basis.ambient_dim != n:
        raise ValueError("charts live in different ambient spaces")
    eye = np.eye(n)
    H_G = np.zeros((n, n)) if H_G is None else np.asarray(H_G, dtype=float)
    H_J = np.zeros((n, n)) if H_J is None else np.asarray(H_J, dtype=float)
    P_G, P_J = chart_G.projector, chart_J.projector
    W_G = np.linalg.inv(eye + P_G @ H_G @ P_G)
    W_J = np.linalg.inv(eye + P_J @ H_J @ P_J)
    M_G = P_G @ W_G @ P_G
    M_J = P_J @ W_J @ P_J
    M = eye + 2.0 * M_G @ M_J - M_G - M_J
    M_lam = (1.0 - lam) * eye + lam * M
    M_inf = _null_projector(M_G @ (eye - M_J) + (eye - M_G) @ M_J)
    ev = np.linalg.eigvals(M_lam - M_inf)
    rho = float(np.max(np.abs(ev), initial=0.0))
    return LinearizedDR(H_G, H_J, W_G, W_J, M_G, M_J, M, M_lam, M_inf, rho, gamma, lam)


def linearize_dr(G: FunctionOracle, J: FunctionOracle, x_star, z_star, gamma: float, lam: float = 1.0):
    """Charts and shifted Hessians at a DR fixed point, then :func:`build_linearization`.

    Returns ``(LinearizedDR, chart_G, chart_J)``.
    """
    x_star = np.asarray(x_star, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    u_J = (z_star - x_star) / gamma
    u_G = (x_star - z_star) / gamma
    chart_J = J.chart(x_star)
    chart_G = G.chart(x_star)
    H_J = gamma * tangent_hessian(J, x_star, u_J, chart_J)
    H_G = gamma * tangent_hessian(G, x_star, u_G, chart_G)
    return build_linearization(chart_G, chart_J, H_G, H_J, gamma, lam), chart_G, chart_J


@dataclass(frozen=True)
class PolyhedralPrediction:
    rho: float
    cos_friedrichs: float
    angles: np.ndarray
    degenerate: bool  # no positive principal angle; rate follows from containment


def polyhedral_rate(chart_J: ManifoldChart, chart_G: ManifoldChart, lam: float = 1.0) -> PolyhedralPrediction:
    rep = principal_angles(chart_J.basis, chart_G.basis)
    if rep.cos_friedrichs is None:
        return PolyhedralPrediction(dr_rate(0.0, lam), 0.0, rep.angles, True)
    return PolyhedralPrediction(dr_rate(rep.cos_friedrichs, lam), rep.cos_friedrichs, rep.angles, False)


def classify(G: FunctionOracle, J: FunctionOracle) -> str:
    return "OPTIMAL" if G.polyhedral and J.polyhedral else "UPPER-ESTIMATE"


def nd_certificate(G: FunctionOracle, J: FunctionOracle, x_star, z_star, gamma: float):
    """``(report for G with (x - z)/gamma, report for J with (z - x)/gamma)``."""
    x_star = np.asarray(x_star, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    return (
        G.nd_margin(x_star, (x_star - z_star) / gamma),
        J.nd_margin(x_star, (z_star - x_star) / gamma),
    )


def certified(reports) -> bool:
    return all(isinstance(r, NDReport) and r.certified for r in reports)


def _as_points(vertices) -> np.ndarray:
    return np.atleast_2d(np.asarray(vertices, dtype=float))


def minkowski_sum(v1, v2) -> np.ndarray:
    a, b = _as_points(v1), _as_points(v2)
    return (a[:, None, :] + b[None, :, :]).reshape(-1, a.shape[1])


def distance_to_relative_boundary(points, tol: float = 1e-10) -> float:
    """Distance from the origin to the relative boundary of ``conv(points)``.

    Returns ``0`` when the origin is outside the relative interior and ``inf``
    for a single point equal to the origin (empty relative boundary).
    """
    p = _as_points(points)
    center = p.mean(axis=0)
    _, s, vt = np.linalg.svd(p - center, full_matrices=False)
    scale = max(1.0, np.abs(p).max())
    d = int(np.sum(s > tol * scale))
    basis = vt[:d].T
    off = -center - basis @ (basis.T @ -center)
    if np.linalg.norm(off) > tol * scale:
        return 0.0
    if d == 0:
        return math.inf
    coords = (p - center) @ basis
    origin = -center @ basis
    if d == 1:
        lo, hi = coords.min(), coords.max()
        return float(max(0.0, min(origin[0] - lo, hi - origin[0])))
    hull = ConvexHull(coords)
    # facet rows are (unit normal, offset) with normal . y + offset <= 0 inside
    slack = -(hull.equations[:, :-1] @ origin + hull.equations[:, -1])
    return float(max(0.0, slack.min()))


@dataclass(frozen=True)
class IdentificationBound:
    bound: float
    rbd_distance: float
    nd_holds: bool


def identification_bound(
    dJ_vertices,
    dG_vertices,
    z0,
    z_star,
    gamma: float,
    tau_lower: float = 1.0,
    dJ_rays=(),
    dG_rays=(),
    schedule_excess: float = 0.0,
    ray_length: float | None = None,
) -> IdentificationBound:
    """Upper bound on the number of non-identified iterations.

    Subdifferentials are given by vertices plus optional recession rays; rays
    are truncated at ``ray_length`` (default ``1e6`` times the data scale),
    far enough that the artificial facets never attain the minimum distance.
    """
    verts = minkowski_sum(dJ_vertices, dG_vertices)
    rays = [np.asarray(r, dtype=float) for r in list(dJ_rays) + list(dG_rays)]
    if rays:
        length = ray_length or 1e6 * max(1.0, np.abs(verts).max())
        extra = [verts + length * r / np.linalg.norm(r) for r in rays]
        verts = np.vstack([verts] + extra)
    dist = distance_to_relative_boundary(verts)
    if dist == 0.0:
        return IdentificationBound(math.inf, 0.0, False)
    r0 = float(np.sum((np.asarray(z0, float) - np.asarray(z_star, float)) ** 2))
    if math.isinf(dist):
        return IdentificationBound(0.0, dist, True)
    return IdentificationBound((r0 + schedule_excess) / (gamma**2 * tau_lower * dist**2), dist, True)
