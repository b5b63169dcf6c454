"""
Starting away from equilibrium
==============================

Start with ``f0 = 0.5`` for every velocity on the plateau |x| < 1
instead of the equilibrium ``chi_{0.5}``.  Both runs carry the same
macroscopic datum, and as eps shrinks they approach the same entropy
solution.
"""
from dataclasses import replace

from bgkflux.experiments import ExperimentConfig, run_experiment

base = ExperimentConfig(k_left=1.0, k_right=2.0, initial_kind="plateau", u_value=0.5,
                        half_width=1.0, n_x=512, n_xi=64, x_min=-2.5, x_max=2.5,
                        t_final=0.5)
for eps in (0.1, 0.025, 0.00625):
    eq = run_experiment(replace(base, eps=eps), residuals=False)
    flat = run_experiment(replace(base, eps=eps, f0_kind="flat"), residuals=False)
    print(f"eps = {eps:<8g} error from chi(u0): {eq.metrics['l1_error']:.3e}   "
          f"error from flat f0: {flat.metrics['l1_error']:.3e}")
