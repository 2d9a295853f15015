"""Time a monolithic solve against the decomposed pipeline.

Both runs target the same optimum; the monolithic solver is stopped as
soon as its relative objective error falls below 1e-6. More clusters
give larger ratios. Takes about a minute on one core.
"""

import numpy as np

from mtp2bbd import GeneratorConfig, make_instance, ratio_of_improvement

print("chain of K cycles with 32 nodes each, community-shaped weights")
for K in (4, 8, 16):
    ratios = []
    for trial in range(3):
        cfg = GeneratorConfig(p=32 * K, model="chain", blocks=K, chi=0.05, seed=trial)
        inst = make_instance(cfg, community_alpha=0.8)
        ratios.append(ratio_of_improvement(inst.S, inst.Lam, threads=1).ratio)
    print(f"  K = {K:2d}: median ratio {np.median(ratios):6.2f}")

inst = make_instance(GeneratorConfig(p=800, model="ba", chi=0.004, seed=0))
res = ratio_of_improvement(inst.S, inst.Lam, threads=1)
print(f"BA p = 800: monolithic {res.monolithic_seconds:.2f} s, "
      f"decomposed {res.decomposed_seconds:.3f} s, ratio {res.ratio:.1f}")
