"""ADMM on a least-squares + l1 problem is DR on the dual; both w-sequences coincide."""

import numpy as np

from proxlab.admm import dual_dr_sequence, run_admm
from proxlab.experiments import admm_instance, analyze_admm

solver, J, w0 = admm_instance("quadratic", seed=3)
trace, state = run_admm(solver, J, 1.0, w0, max_iter=300, keep_w=True)
dual = dual_dr_sequence(solver, J, 1.0, w0, len(trace))
print("largest gap between ADMM and dual DR:", np.max(np.abs(trace.w - dual)))
print("final primal residual ||Lu - v||:", trace.primal_residual[-1])

solver, J, w0 = admm_instance("affine", seed=0)
report, *_ = analyze_admm(solver, J, 1.0, w0)
print(f"affine-constrained variant: predicted {report['predicted_rho']:.6f}, "
      f"observed {report['observed_w']['rate']:.6f}")
