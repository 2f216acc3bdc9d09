"""Seeded problem generators.

All randomness comes from ``numpy.random.Generator(numpy.random.Philox(seed))``,
a counter-based generator whose streams are reproducible across platforms and
language ports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .prox import (
    AffineIndicator,
    FunctionOracle,
    GroupL12,
    L1Ball,
    L1Norm,
    LinfBall,
    LinfNorm,
    NuclearNorm,
    TV1D,
)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass
class Instance:
    """A two-function problem ``min G + J`` with its ground truth."""

    name: str
    G: FunctionOracle
    J: FunctionOracle
    x_ob: np.ndarray
    meta: dict = field(default_factory=dict)


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def _nonzero_normal(rng, size):
    v = rng.standard_normal(size)
    while np.any(v == 0):
        v[v == 0] = rng.standard_normal(int(np.sum(v == 0)))
    return v


def gaussian_sensing(m: int, n: int, sparsity: int, seed: int):
    """``(L, x_ob)`` with i.i.d. standard normal ``L`` and exactly ``sparsity`` nonzeros."""
    _check(0 < m and 0 < n and 0 <= sparsity <= n, "need 0 <= sparsity <= n and positive sizes")
    rng = make_rng(seed)
    L = rng.standard_normal((m, n))
    x = np.zeros(n)
    idx = rng.choice(n, size=sparsity, replace=False)
    x[idx] = _nonzero_normal(rng, sparsity)
    return L, x


def block_sparse(m: int, n: int, blocks: int, block_size: int, seed: int):
    _check(n % block_size == 0, "block size must divide n")
    nblocks = n // block_size
    _check(0 <= blocks <= nblocks, "more active blocks than blocks")
    rng = make_rng(seed)
    L = rng.standard_normal((m, n))
    x = np.zeros(n)
    for b in rng.choice(nblocks, size=blocks, replace=False):
        x[b * block_size : (b + 1) * block_size] = _nonzero_normal(rng, block_size)
    return L, x


def saturated(m: int, n: int, count: int, seed: int):
    """``count`` entries at ``+-1``; the rest uniform in ``(-0.5, 0.5)``."""
    _check(0 < count <= n, "saturation count must lie in 1..n")
    rng = make_rng(seed)
    L = rng.standard_normal((m, n))
    x = rng.uniform(-0.5, 0.5, n)
    idx = rng.choice(n, size=count, replace=False)
    x[idx] = rng.choice([-1.0, 1.0], size=count)
    return L, x


def low_rank(m: int, rows: int, cols: int, rank: int, seed: int):
    """Row-major vectorized ``rows x cols`` matrix of exact rank ``rank``."""
    _check(0 <= rank <= min(rows, cols), "rank exceeds matrix dimensions")
    rng = make_rng(seed)
    L = rng.standard_normal((m, rows * cols))
    a = rng.standard_normal((rows, rank))
    b = rng.standard_normal((cols, rank))
    x = a @ b.T
    _check(np.linalg.matrix_rank(x) == rank, "generated matrix lost rank")
    return L, x.ravel()


def piecewise_constant(n: int, jumps: int, noise: dict, seed: int):
    """``(y, x_ob, eps)`` with exactly ``jumps`` nonzero first differences.

    ``noise`` is ``{"kind": "uniform", "level": t}`` (entries uniform in
    ``[-t, t]``) or ``{"kind": "sparse", "count": c}`` (``c`` standard normal spikes).
    """
    _check(0 <= jumps < n, "jump count must be below n")
    rng = make_rng(seed)
    pos = np.sort(rng.choice(np.arange(1, n), size=jumps, replace=False))
    steps = _nonzero_normal(rng, jumps) * 2.0
    x = np.zeros(n)
    for p, s in zip(pos, steps):
        x[p:] += s
    kind = noise.get("kind", "uniform")
    if kind == "uniform":
        eps = rng.uniform(-1.0, 1.0, n) * float(noise.get("level", 1.0))
    elif kind == "sparse":
        c = int(noise["count"])
        _check(0 <= c <= n, "noise count exceeds n")
        eps = np.zeros(n)
        eps[rng.choice(n, size=c, replace=False)] = _nonzero_normal(rng, c)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return x + eps, x, eps


REGULARIZERS = ("l1", "l12", "linf", "nuclear")

# desk-scale defaults, roughly the published settings shrunk toward 32-64 unknowns
DESK_DEFAULTS = {
    "l1": {"m": 16, "n": 32, "sparsity": 3},
    "l12": {"m": 24, "n": 64, "blocks": 3, "block_size": 4},
    "linf": {"m": 30, "n": 32, "count": 5},
    "nuclear": {"m": 40, "rows": 8, "cols": 8, "rank": 2},
}


def affine_constrained(regularizer: str, seed: int, **dims) -> Instance:
    """``min J(x)`` subject to ``L x = L x_ob``; ``G`` is the affine indicator."""
    if regularizer not in REGULARIZERS:
        raise ValueError(f"regularizer must be one of {REGULARIZERS}")
    p = {**DESK_DEFAULTS[regularizer], **dims}
    if regularizer == "l1":
        L, x = gaussian_sensing(p["m"], p["n"], p["sparsity"], seed)
        J = L1Norm(p["n"])
    elif regularizer == "l12":
        L, x = block_sparse(p["m"], p["n"], p["blocks"], p["block_size"], seed)
        J = GroupL12.contiguous(p["n"], p["block_size"])
    elif regularizer == "linf":
        L, x = saturated(p["m"], p["n"], p["count"], seed)
        J = LinfNorm(p["n"])
    else:
        L, x = low_rank(p["m"], p["rows"], p["cols"], p["rank"], seed)
        J = NuclearNorm(p["rows"], p["cols"])
    G = AffineIndicator(L, L @ x)
    return Instance(f"affine_constrained/{regularizer}", G, J, x, {"L": L, "seed": seed, **p})


def tv_denoise(p_norm: str, seed: int, n: int = 64, jumps: int = 4, noise: dict | None = None, tau=None) -> Instance:
    """``min TV(x)`` subject to ``||y - x||_p <= tau``; ``J`` is TV, ``G`` the ball indicator."""
    if p_norm not in ("inf", "1"):
        raise ValueError("p must be 'inf' or '1'")
    if noise is None:
        noise = {"kind": "uniform", "level": 1.0} if p_norm == "inf" else {"kind": "sparse", "count": 8}
    y, x, eps = piecewise_constant(n, jumps, noise, seed)
    if tau is None:
        tau = float(np.max(np.abs(eps))) if p_norm == "inf" else float(np.sum(np.abs(eps)))
    if tau <= 0:
        # zero noise: the ball degenerates, keep a tiny radius so the indicator is defined
        tau = 1e-12
    G = LinfBall(y, tau) if p_norm == "inf" else L1Ball(y, tau)
    return Instance(f"tv_denoise/{p_norm}", G, TV1D(n), x, {"y": y, "tau": tau, "seed": seed, "n": n, "jumps": jumps})


FINITE_CONVERGENCE_CENTER = (0.75, -0.75)
FINITE_CONVERGENCE_RADIUS = 0.5


def finite_convergence_instance() -> Instance:
    """``G = ||.||_1`` and ``J`` the indicator of a small l1 ball off the axes."""
    G = L1Norm(2)
    J = L1Ball(np.array(FINITE_CONVERGENCE_CENTER), FINITE_CONVERGENCE_RADIUS)
    return Instance("finite_convergence", G, J, np.array([0.5, -0.5]), {})
