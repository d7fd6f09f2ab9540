# Small systems can be solved exactly. Compare the event-driven simulator
# against the enumerated chain for three particles on three sites.
import numpy as np

from condips.harness import ips_ensemble
from condips.kernels import RateKernel
from condips.oracle import build_chain, marginals, multinomial_law, total_variation, transient

kernel = RateKernel.zero_range(4)
chain = build_chain(3, 3, kernel)
print(f"{len(chain.states)} configurations, generator row sums {np.abs(chain.Q.sum(1)).max():.1e}")

times = (0.5, 1.0, 2.0)
ens = ips_ensemble(kernel, 3, 3, 2.0, times, 20000, seed=1)

# %% laws of the class configuration (n_0, n_1, ...) at each time
p0 = multinomial_law(chain)
for j, t in enumerate(times):
    exact = marginals(chain, transient(chain, p0, t)).config_law
    est = ens.config_law(j)
    print(f"\nt = {t}")
    for key in sorted(exact):
        print(f"  {str(key):14s} exact {exact[key]:.4f}   simulated {est.get(key, 0.0):.4f}")
    print(f"  total variation {total_variation(est, exact):.4f}")
