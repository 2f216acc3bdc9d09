"""Subspace algebra: orthonormal bases, projectors, principal and Friedrichs angles.

Every subspace is carried as an orthonormal basis (an ``n x d`` array whose
columns are orthonormal). Raw spanning sets go through
:func:`orthonormal_basis` first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# cos(theta) above this threshold counts as theta == 0
ANGLE_TOL = 1e-10
# singular-value threshold matching ANGLE_TOL for the stacked null-space test
INTERSECTION_TOL = float(np.sqrt(2.0 * ANGLE_TOL))


@dataclass(frozen=True)
class Basis:
    """Orthonormal basis of a subspace of R^n, stored column-wise."""

    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2:
            raise ValueError("basis columns must be a 2-D array (ambient_dim x dim)")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def empty(cls, ambient_dim: int) -> "Basis":
        return cls(np.zeros((ambient_dim, 0)))

    @classmethod
    def full(cls, ambient_dim: int) -> "Basis":
        return cls(np.eye(ambient_dim))

    def project(self, v: np.ndarray) -> np.ndarray:
        return self.columns @ (self.columns.T @ v)

    def gram_error(self) -> float:
        g = self.columns.T @ self.columns
        return float(np.max(np.abs(g - np.eye(self.dim)), initial=0.0))


@dataclass(frozen=True)
class AngleReport:
    """Principal angles between two subspaces, ascending, in radians.

    ``friedrichs`` is ``None`` when every principal angle is zero (one
    subspace contains the other) or when either subspace is trivial.
    """

    angles: np.ndarray
    intersection_dim: int
    friedrichs: float | None
    cos_friedrichs: float | None
    cosines: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "angles": [float(a) for a in self.angles],
            "intersection_dim": int(self.intersection_dim),
            "friedrichs": None if self.friedrichs is None else float(self.friedrichs),
            "cos_friedrichs": None if self.cos_friedrichs is None else float(self.cos_friedrichs),
        }


def orthonormal_basis(vectors, tol: float = 1e-10, ambient_dim: int | None = None) -> Basis:
    """Orthonormal basis for the span of ``vectors`` (one vector per row).

    The rank is the number of singular values above ``tol`` times the largest.
    An empty input needs ``ambient_dim``.
    """
    if len(vectors) == 0:
        if ambient_dim is None:
            raise ValueError("ambient_dim is required for an empty spanning set")
        return Basis.empty(ambient_dim)
    rows = [np.asarray(v, dtype=float).ravel() for v in vectors]
    n = rows[0].size
    if any(r.size != n for r in rows) or (ambient_dim is not None and n != ambient_dim):
        raise ValueError("all vectors must share one ambient dimension")
    a = np.vstack(rows)
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return Basis.empty(n)
    rank = int(np.sum(s > tol * s[0]))
    return Basis(vt[:rank].T.copy())


def basis_from_columns(a: np.ndarray, tol: float = 1e-10) -> Basis:
    """Orthonormal basis for the column space of ``a``."""
    a = np.asarray(a, dtype=float)
    return orthonormal_basis(list(a.T), tol=tol, ambient_dim=a.shape[0])


def null_space_basis(a: np.ndarray, tol: float = 1e-10) -> Basis:
    """Orthonormal basis of ker(a), rank cut at ``tol`` times the largest singular value."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[1]
    if a.size == 0:
        return Basis.full(n)
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return Basis(vt[rank:].T.copy())


def _check_same_ambient(b1: Basis, b2: Basis) -> None:
    if b1.ambient_dim != b2.ambient_dim:
        raise ValueError(
            f"ambient dimension mismatch: {b1.ambient_dim} vs {b2.ambient_dim}"
        )


def principal_angles(b1: Basis, b2: Basis, angle_tol: float = ANGLE_TOL) -> AngleReport:
    """Principal angles from the singular values of ``B1^T B2``.

    The Friedrichs angle is the first angle left after discarding the
    ``d = dim(T1 & T2)`` zero angles.
    """
    _check_same_ambient(b1, b2)
    if b1.dim > b2.dim:
        b1, b2 = b2, b1
    if b1.dim == 0:
        empty = np.zeros(0)
        return AngleReport(empty, 0, None, None, empty)
    s = np.linalg.svd(b1.columns.T @ b2.columns, compute_uv=False)
    cosines = np.clip(s, 0.0, 1.0)
    angles = np.arccos(cosines)
    d = int(np.sum(cosines > 1.0 - angle_tol))
    if d < angles.size:
        friedrichs, cos_f = float(angles[d]), float(cosines[d])
    else:
        friedrichs, cos_f = None, None
    return AngleReport(angles, d, friedrichs, cos_f, cosines)


def dr_rate(cos_f: float, lam: float) -> float:
    """Local linear rate of relaxed DR between two polyhedral tangent spaces."""
    if not 0.0 < lam < 2.0:
        raise ValueError(f"relaxation parameter must lie in (0, 2), got {lam}")
    if not -1e-12 <= cos_f <= 1.0 + 1e-12:
        raise ValueError(f"cosine must lie in [0, 1], got {cos_f}")
    c = min(max(cos_f, 0.0), 1.0)
    val = (1.0 - lam) ** 2 + lam * (2.0 - lam) * c * c
    return float(min(np.sqrt(max(val, 0.0)), 1.0))


def projector_of(b: Basis) -> np.ndarray:
    return b.columns @ b.columns.T


def complement(b: Basis) -> Basis:
    """Orthonormal basis of the orthogonal complement."""
    n, d = b.columns.shape
    if d == 0:
        return Basis.full(n)
    u, _, _ = np.linalg.svd(b.columns, full_matrices=True)
    return Basis(u[:, d:].copy())


def intersection(b1: Basis, b2: Basis, tol: float = INTERSECTION_TOL) -> Basis:
    """Common null space of ``I - P1`` and ``I - P2``."""
    _check_same_ambient(b1, b2)
    n = b1.ambient_dim
    eye = np.eye(n)
    stacked = np.vstack([eye - projector_of(b1), eye - projector_of(b2)])
    _, s, vt = np.linalg.svd(stacked, full_matrices=True)
    keep = np.ones(n, dtype=bool)
    keep[: s.size] = s <= tol
    return Basis(vt[keep].T.copy())


def direct_sum(b1: Basis, b2: Basis, tol: float = 1e-10) -> Basis:
    """Orthonormal basis of ``span(B1) + span(B2)``."""
    _check_same_ambient(b1, b2)
    return basis_from_columns(np.hstack([b1.columns, b2.columns]), tol=tol)
