"""Basis pursuit by DR: watch the support settle, then compare the slope to the prediction."""

import numpy as np

from proxlab import instances
from proxlab.dr import StepSchedule
from proxlab.experiments import analyze_dr

inst = instances.affine_constrained("l1", seed=0)
report, trace, ref, lin = analyze_dr(inst.G, inst.J, np.zeros(inst.x_ob.size), StepSchedule.constant(1.0))

print("recovered support:", np.flatnonzero(np.abs(ref.x) > 1e-8))
print("true support:     ", np.flatnonzero(inst.x_ob))
print("support fixed from iteration", report["identification"]["K_J"])
print("nd margins:", report["nd_margins"])
print(f"predicted rate {report['predicted_rho']:.6f}, observed {report['observed']['rate']:.6f}")

# the distance to the limit, every 20 iterations
for k in range(0, len(trace), 20):
    print(f"{trace.k[k]:4d}  {trace.dist_z[k]:.3e}")
