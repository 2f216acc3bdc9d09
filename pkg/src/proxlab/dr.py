"""Non-stationary relaxed Douglas-Rachford splitting with traces.

One step from ``(z, x)`` with ``x = prox_{gamma_k J}(z)``::

    v  = prox_{gamma_k G}(2x - z)
    z' = (1 - lam_k) z + lam_k (z + v - x)
    x' = prox_{gamma_{k+1} J}(z')

``J`` owns the shadow sequence ``x_k``; swap the arguments to reverse the
roles of the two functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .prox import CHART_TOL, DiagonalIndicator, FunctionOracle, SeparableSum


class DivergenceError(RuntimeError):
    """Fixed-point residual blew up; signals a broken oracle or invalid schedule."""


DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class ParamSequence:
    """``base`` plus an optional vanishing perturbation indexed by ``k >= 0``.

    ``power_decay`` gives ``base + amplitude / (k + 1)**exponent`` and
    ``geometric`` gives ``base + amplitude * ratio**k``.
    """

    base: float
    kind: str = "constant"
    amplitude: float = 0.0
    exponent: float = 1.0
    ratio: float = 0.5

    def __post_init__(self):
        if self.kind not in ("constant", "power_decay", "geometric"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def at(self, k: int) -> float:
        if self.kind == "power_decay":
            return self.base + self.amplitude / (k + 1.0) ** self.exponent
        if self.kind == "geometric":
            return self.base + self.amplitude * self.ratio**k
        return self.base

    @property
    def summable(self) -> bool:
        """Whether ``sum_k |value_k - base|`` is finite."""
        if self.kind == "power_decay":
            return self.amplitude == 0 or self.exponent > 1
        if self.kind == "geometric":
            return self.amplitude == 0 or abs(self.ratio) < 1
        return True

    @classmethod
    def from_value(cls, value) -> "ParamSequence":
        if isinstance(value, ParamSequence):
            return value
        if isinstance(value, dict):
            return cls(**value)
        return cls(float(value))

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"base": self.base, "kind": "constant"}
        d = {"base": self.base, "kind": self.kind, "amplitude": self.amplitude}
        d["exponent" if self.kind == "power_decay" else "ratio"] = (
            self.exponent if self.kind == "power_decay" else self.ratio
        )
        return d


@dataclass(frozen=True)
class StepSchedule:
    gamma: ParamSequence
    lam: ParamSequence = field(default_factory=lambda: ParamSequence(1.0))

    @classmethod
    def constant(cls, gamma: float, lam: float = 1.0) -> "StepSchedule":
        return cls(ParamSequence(gamma), ParamSequence(lam))

    @classmethod
    def from_dict(cls, d: dict) -> "StepSchedule":
        return cls(ParamSequence.from_value(d["gamma"]), ParamSequence.from_value(d.get("lambda", 1.0)))

    def to_dict(self) -> dict:
        return {"gamma": self.gamma.to_dict(), "lambda": self.lam.to_dict()}

    def gamma_at(self, k: int) -> float:
        return self.gamma.at(k)

    def lam_at(self, k: int) -> float:
        return self.lam.at(k)

    @property
    def is_stationary(self) -> bool:
        return self.gamma.kind == "constant" and self.lam.kind == "constant"

    def stationary(self) -> "StepSchedule":
        """The limiting constant schedule ``(gamma, lam)``."""
        return StepSchedule.constant(self.gamma.base, self.lam.base)

    def validate(self, horizon: int) -> dict:
        """Check positivity and the relaxation range over ``horizon`` steps.

        Returns the partial sums a run logs: ``sum lam_k |gamma_k - gamma|`` and
        ``sum lam_k (2 - lam_k)``.
        """
        ks = np.arange(horizon + 1)
        g = np.array([self.gamma_at(k) for k in ks])
        lam = np.array([self.lam_at(k) for k in ks])
        if np.any(g <= 0):
            raise ValueError("step sizes must stay positive")
        if np.any((lam <= 0) | (lam >= 2)):
            raise ValueError("relaxation parameters must lie in (0, 2)")
        return {
            "sum_lam_gamma_gap": float(np.sum(lam * np.abs(g - self.gamma.base))),
            "sum_lam_2_minus_lam": float(np.sum(lam * (2 - lam))),
            "gamma_summable": self.gamma.summable,
        }


@dataclass
class DRState:
    z: np.ndarray
    x: np.ndarray
    k: int


@dataclass
class DRTrace:
    """Per-iteration record. Row ``k`` holds ``z_k``, ``x_k`` and the ``v`` computed from them."""

    k: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray
    dist_z: np.ndarray
    dist_x: np.ndarray
    dist_v: np.ndarray
    residual: np.ndarray
    fp_J: list
    fp_G: list
    diagnostics: dict = field(default_factory=dict)

    CSV_HEADER = ("k", "gamma_k", "lambda_k", "dist_z", "dist_x", "dist_v", "fp_J", "fp_G", "residual")

    def __len__(self) -> int:
        return self.k.size

    def fingerprint_ids(self, which: str = "J") -> np.ndarray:
        """Small integers labelling distinct fingerprints in order of first appearance."""
        seen: dict = {}
        fps = self.fp_J if which == "J" else self.fp_G
        return np.array([seen.setdefault(fp, len(seen)) for fp in fps], dtype=int)

    def rows(self):
        ids_j, ids_g = self.fingerprint_ids("J"), self.fingerprint_ids("G")
        for i in range(len(self)):
            yield (
                int(self.k[i]), self.gamma[i], self.lam[i], self.dist_z[i], self.dist_x[i],
                self.dist_v[i], int(ids_j[i]), int(ids_g[i]), self.residual[i],
            )


def dr_step(G: FunctionOracle, J: FunctionOracle, z, x, gamma, lam, gamma_next):
    """One relaxed DR step; returns ``(z_next, x_next, v)``."""
    v = G.prox(2.0 * x - z, gamma)
    z_next = (1.0 - lam) * z + lam * (z + v - x)
    x_next = J.prox(z_next, gamma_next)
    return z_next, x_next, v


def fixed_point_operator(G: FunctionOracle, J: FunctionOracle, gamma: float):
    """``F = (rprox_G o rprox_J + Id) / 2`` built from reflected proxes."""

    def rprox(f, z):
        return 2.0 * f.prox(z, gamma) - z

    def apply(z):
        z = np.asarray(z, dtype=float)
        return 0.5 * (rprox(G, rprox(J, z)) + z)

    return apply


def _dist(a, b):
    if b is None:
        return math.nan
    return float(np.linalg.norm(a - b))


def run_dr(
    G: FunctionOracle,
    J: FunctionOracle,
    z0,
    schedule: StepSchedule,
    max_iter: int = 1000,
    stop_tol: float = 0.0,
    reference: "ReferenceSolution | None" = None,
    record_charts: bool = True,
    chart_tol: float = CHART_TOL,
):
    """Run DR and record a trace.

    Stops after ``max_iter`` steps or as soon as ``||z_{k+1} - z_k|| <= stop_tol``.
    With ``stop_tol = 0`` the run stops only on an exact fixed point.
    """
    diagnostics = schedule.validate(max_iter)
    z = np.asarray(z0, dtype=float).copy()
    x = J.prox(z, schedule.gamma_at(0))
    zs = xs = None
    if reference is not None:
        zs, xs = reference.z, reference.x
    cols = {name: [] for name in ("gamma", "lam", "dist_z", "dist_x", "dist_v", "residual")}
    fp_j, fp_g = [], []
    r_first = None
    k = 0
    for k in range(max_iter):
        g, lam, g_next = schedule.gamma_at(k), schedule.lam_at(k), schedule.gamma_at(k + 1)
        z_next, x_next, v = dr_step(G, J, z, x, g, lam, g_next)
        res = float(np.linalg.norm(z_next - z))
        cols["gamma"].append(g)
        cols["lam"].append(lam)
        cols["dist_z"].append(_dist(z, zs))
        cols["dist_x"].append(_dist(x, xs))
        cols["dist_v"].append(_dist(v, xs))
        cols["residual"].append(res)
        if record_charts:
            fp_j.append(J.chart(x, chart_tol).fingerprint)
            fp_g.append(G.chart(v, chart_tol).fingerprint)
        if r_first is None and res > 0:
            r_first = res
        if r_first is not None and (not np.isfinite(res) or res > DIVERGENCE_FACTOR * r_first):
            raise DivergenceError(f"residual {res:.3e} at k={k} exceeds {DIVERGENCE_FACTOR:g} x initial {r_first:.3e}")
        z, x = z_next, x_next
        if res <= stop_tol:
            k += 1
            break
    else:
        k = max_iter
    n = len(cols["residual"])
    trace = DRTrace(
        k=np.arange(n),
        gamma=np.array(cols["gamma"]),
        lam=np.array(cols["lam"]),
        dist_z=np.array(cols["dist_z"]),
        dist_x=np.array(cols["dist_x"]),
        dist_v=np.array(cols["dist_v"]),
        residual=np.array(cols["residual"]),
        fp_J=fp_j,
        fp_G=fp_g,
        diagnostics=diagnostics,
    )
    return trace, DRState(z, x, k)


@dataclass(frozen=True)
class ReferenceSolution:
    z: np.ndarray
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool
    gamma: float

    def to_dict(self) -> dict:
        return {
            "z": self.z.tolist(),
            "x": self.x.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceSolution":
        return cls(
            np.asarray(d["z"], float), np.asarray(d["x"], float), float(d["residual"]),
            int(d["iterations"]), bool(d["converged"]), float(d["gamma"]),
        )


def reference_fixed_point(
    G: FunctionOracle,
    J: FunctionOracle,
    z0,
    gamma: float,
    tol: float = 1e-14,
    max_iter: int = 10**6,
    patience: int = 2000,
    lam: float = 1.0,
) -> ReferenceSolution:
    """Over-solve with stationary DR (unrelaxed unless ``lam`` says otherwise).

    With several fixed points the limit depends on the start and on ``lam``,
    so a reference for a relaxed run should use the same ``lam``.

    Stops when the residual drops to ``tol``, after ``max_iter`` steps, or once
    the best residual has not improved for ``patience`` steps (rounding floor).
    ``converged`` is true only in the first case.
    """
    z = np.asarray(z0, dtype=float).copy()
    x = J.prox(z, gamma)
    best, best_at = math.inf, 0
    best_z, best_x = z, x
    k = 0
    for k in range(1, max_iter + 1):
        z_next, x_next, _ = dr_step(G, J, z, x, gamma, lam, gamma)
        res = float(np.linalg.norm(z_next - z))
        if res < best:
            best, best_at = res, k
            best_z, best_x = z_next, x_next
        z, x = z_next, x_next
        if res <= tol:
            return ReferenceSolution(z, x, res, k, True, gamma)
        if k - best_at > patience:
            break
    return ReferenceSolution(best_z, best_x, best, k, False, gamma)


def steps_to_exact_fixed_point(G, J, z0, gamma: float, max_iter: int = 10**5) -> int | None:
    """Number of unrelaxed steps until ``z_{k+1} == z_k`` bit for bit, or ``None``."""
    z = np.asarray(z0, dtype=float).copy()
    x = J.prox(z, gamma)
    for k in range(max_iter):
        v = G.prox(2.0 * x - z, gamma)
        z_next = z + v - x
        if np.array_equal(z_next, z):
            return k
        z = z_next
        x = J.prox(z, gamma)
    return None


def _stable_from(fps: list):
    if not fps:
        return None
    final = fps[-1]
    k = len(fps)
    while k > 0 and fps[k - 1] == final:
        k -= 1
    return k


def identification_iteration(trace: DRTrace):
    """``(K_J, K_G)``: first recorded iteration after which each fingerprint never changes."""
    return _stable_from(trace.fp_J), _stable_from(trace.fp_G)


@dataclass(frozen=True)
class RateFit:
    rate: float
    r_squared: float
    window: tuple
    flag: str  # "linear", "finite" (exact zero in window) or "empty"

    def to_dict(self) -> dict:
        return {"rate": self.rate, "r_squared": self.r_squared, "window": list(self.window), "flag": self.flag}


def default_window(dist, start: int = 0, reference_residual: float = 0.0, rel_floor: float = 1e-9):
    """``[start, last k with dist above the floor]``.

    The floor is the larger of ``1e4 * reference_residual`` and ``rel_floor``
    times the largest distance, so the fit stays clear of the rounding plateau
    around the reference point.
    """
    dist = np.asarray(dist, dtype=float)
    if dist.size == 0:
        return (start, start)
    floor = max(1e4 * reference_residual, rel_floor * np.nanmax(dist))
    above = np.flatnonzero(dist > floor)
    end = int(above[-1]) if above.size else start
    return (start, max(start, end))


def observed_rate(dist, window=None) -> RateFit:
    """Fit ``log dist_k = a + k log(rate)`` by least squares over ``window = (first, last)`` inclusive."""
    dist = np.asarray(dist, dtype=float)
    lo, hi = window if window is not None else (0, dist.size - 1)
    lo, hi = int(lo), int(min(hi, dist.size - 1))
    seg = dist[lo : hi + 1]
    if seg.size < 2:
        return RateFit(math.nan, math.nan, (lo, hi), "empty")
    if np.any(seg <= 0):
        return RateFit(0.0, math.nan, (lo, hi), "finite")
    ks = np.arange(lo, hi + 1, dtype=float)
    y = np.log(seg)
    slope, intercept = np.polyfit(ks, y, 1)
    fitted = intercept + slope * ks
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fitted) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(np.exp(slope)), r2, (lo, hi), "linear")


@dataclass(frozen=True)
class ProductLift:
    """Two-function reformulation of ``sum_i f_i`` on ``(R^n)^m``."""

    G_diag: DiagonalIndicator
    J_prod: SeparableSum
    m: int
    n: int

    def embed(self, x) -> np.ndarray:
        return np.tile(np.asarray(x, dtype=float).ravel(), self.m)

    def average(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float).reshape(self.m, self.n).mean(axis=0)


def product_lift(functions, n: int | None = None) -> ProductLift:
    functions = list(functions)
    if not functions:
        raise ValueError("need at least one function")
    dims = {f.dim for f in functions if f.dim is not None}
    if n is None:
        if len(dims) != 1:
            raise ValueError("cannot infer a common dimension; pass n")
        n = dims.pop()
    elif dims and dims != {n}:
        raise ValueError(f"functions have dimensions {sorted(dims)}, expected {n}")
    m = len(functions)
    return ProductLift(DiagonalIndicator(m, n), SeparableSum(functions, n), m, n)
