"""Douglas-Rachford between two planes in R^4: the residual shrinks by cos(theta) per step."""

import numpy as np
from scipy.linalg import null_space

from proxlab.dr import StepSchedule, default_window, observed_rate, run_dr
from proxlab.prox import AffineIndicator
from proxlab.subspace import dr_rate, orthonormal_basis, principal_angles


def plane(rows):
    return AffineIndicator(null_space(np.asarray(rows)).T, np.zeros(2))


e = np.eye(4)
for deg in (30, 60, 80):
    t = np.radians(deg)
    s = 0.5 * (t + np.pi / 2)
    a = [e[0], e[1]]
    b = [np.cos(t) * e[0] + np.sin(t) * e[2], np.cos(s) * e[1] + np.sin(s) * e[3]]
    rep = principal_angles(orthonormal_basis(a, ambient_dim=4), orthonormal_basis(b, ambient_dim=4))
    z0 = np.random.default_rng(0).standard_normal(4)
    for lam in (0.5, 1.0, 1.5):
        trace, _ = run_dr(plane(a), plane(b), z0, StepSchedule.constant(1.0, lam), max_iter=200)
        fit = observed_rate(trace.residual, default_window(trace.residual, 5))
        predicted = dr_rate(rep.cos_friedrichs, lam)
        print(f"theta={deg:2d}  lambda={lam:.1f}  predicted={predicted:.6f}  observed={fit.rate:.6f}")
