# A monotone process with inflated rates sits above the tagged occupation on
# every path. It grows by doubling jumps, so it quickly leaves int64 range.
import numpy as np

from condips.coupling import exit_rate_bar, moment_monitor, simulate_coupled
from condips.harness import coupled_ensemble
from condips.kernels import RateKernel
from condips.state import InitScheme, sample_initial

kernel = RateKernel.zero_range(4)
rng = np.random.default_rng(7)
st = sample_initial(100, 200, InitScheme(), rng)
print("exit rate of Wbar at w = W(0):", exit_rate_bar(st.W, st.full(), kernel))

tr = simulate_coupled(st, kernel, 1.0, np.linspace(0, 1, 11), rng)
for t, w, wb in zip(tr.times, tr.W, tr.wbar):
    print(f"t = {t:.1f}   W = {w:3d}   Wbar = {wb:.3e}")
print("violations on this path:", tr.violations)

times = np.linspace(0, 2, 5)
ens = coupled_ensemble(kernel, 100, 200, 2.0, times, 500, seed=1)
rep = moment_monitor(ens.W, ens.wbar, times)
print("\nsecond moments  t    E[W^2]     E[Wbar^2]")
for t, a, b in zip(times, rep.m2_hat, rep.m2_bar):
    print(f"              {t:4.1f}  {a:8.2f}   {b:.3e}")
print("ordered:", rep.ordered, " fitted log growth rate:", rep.growth_rate)
