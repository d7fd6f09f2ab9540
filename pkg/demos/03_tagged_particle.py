# The occupation seen by a tagged particle converges to a time-inhomogeneous
# birth-death chain with long jumps. Its law is the size-biased profile.
import numpy as np

from condips.harness import tagged_ensemble
from condips.kernels import RateKernel
from condips.limit_chain import ensemble_law, grid_check
from condips.meanfield import integrate, poisson_profile

kernel = RateKernel.zero_range(4)
rho, t = 2.0, 1.0
sol = integrate(poisson_profile(rho), kernel, t, grid_step=0.005)
print("grid check (ok, worst relative rate change):", grid_check(sol))

p = sol.size_biased()[-1]
limit = ensemble_law(None, sol, kernel, [t], 50000, master_seed=3)
h_lim = limit.histogram(0, 12)

for L in (100, 1000):
    ens = tagged_ensemble(kernel, L, int(rho * L), t, (t,), 4000, seed=L)
    h = ens.w_law(0, 12)
    print(f"\nL = {L}:  k   p_k(1)   limit chain   tagged W")
    for k in range(1, 9):
        print(f"        {k:2d}  {p[k]:.4f}   {h_lim[k]:.4f}        {h[k]:.4f}")

mean, se = limit.moment(1)
print(f"\nE[W] = {mean[0]:.3f} +- {se[0]:.3f}, m2/rho = {sol.moment(2)[-1] / rho:.3f}")
