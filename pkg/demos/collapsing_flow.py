"""Collapsing onto the base (k=2, a=1, b=4, alpha=3/4, T=12/7).

The fibers shrink like (T - t)^(1/2) while the infinity section tends to
a round sphere of scale lambda = k a_T = 8/7.
"""

from conekrf import gh
from conekrf.cohomology import SurfaceParams, limit_lambda, singularity_time
from conekrf.profile import Grid, Regularization
from conekrf.solver import SolverConfig, run

p = SurfaceParams(2, 1, 4, "3/4")
T = float(singularity_time(p))
lam = float(limit_lambda(p))
traj = run(p, Regularization(1e-2, 1e-2), Grid(15.0, 2049), SolverConfig())
print(f"{traj.terminated_reason.value} at t={traj.snapshots[-1].t:.4f}, "
      f"all monitors pass: {all(s.report.passed for s in traj.snapshots)}")

print("\n     t    fiber    base  sup v''/(T-t)")
for s in traj.snapshots[::20]:
    print(f"{s.t:6.3f}  {gh.fiber_radial_length(s.profile):7.4f}  "
          f"{gh.base_diameter_proxy(s.profile, 2):6.4f}  {s.profile.d2.max() / (T - s.t):8.4f}")

fib = gh.extrapolate_to_T([(s.t, gh.fiber_radial_length(s.profile)) for s in traj.snapshots],
                          "PowerLaw", T)
print(f"\nfiber length ~ (T-t)^{fib.exponent:.3f}  (R^2 {fib.quality:.5f})")

zs = gh.extrapolate_to_T([(s.t, 2 * float(s.profile.d1[0])) for s in traj.snapshots], "Linear", T)
print(f"k v'(-R) extrapolated to T: {zs.value_at_T:.5f} vs lambda = {lam:.5f}")
print(f"base sphere diameter: at stop {gh.base_diameter_proxy(traj.snapshots[-1].profile, 2):.4f}, "
      f"limit {gh.sphere_diameter(lam):.4f}")
