"""
BGK relaxation towards a rarefaction wave
=========================================

For Burgers' flux the Riemann datum (1, 0) opens into a rarefaction fan.
The BGK solution at small eps should match the entropy solution, and the
kinetic density should sit close to the equilibrium ``chi_u``.
"""
from dataclasses import replace

from bgkflux.experiments import ExperimentConfig, run_experiment

base = ExperimentConfig(u_left=1.0, u_right=0.0, n_x=256, n_xi=32, t_final=0.5)

# %%
# A flat initial density (every xi-row equal to u0) starts far from
# equilibrium; the equilibrium distance at the final time shrinks like eps.
for eps in (0.1, 0.05, 0.025, 0.0125):
    r = run_experiment(replace(base, eps=eps, f0_kind="flat"), residuals=False)
    m = r.metrics
    print(f"eps = {eps:<7g} L1 error = {m['l1_error']:.3e}   "
          f"distance to equilibrium = {m['equilibrium_distance_final']:.3e}   "
          f"u at x=0, t=T/2 = {m['u_mid_at_interface']:.3f}")

# %%
# The L1 error does not fall with eps here.  Free transport maps the
# equilibrium of this datum onto the equilibrium of the exact fan, so the
# eps-error of the exact BGK solution is zero, and what remains is grid
# diffusion of the transport remap.  That diffusion grows slightly as more
# collisions per unit time re-project the smeared rows.  A shock datum
# (u_left=0, u_right=1) shows the expected decrease instead.
for eps in (0.1, 0.05, 0.025, 0.0125):
    r = run_experiment(replace(base, eps=eps, u_left=0.0, u_right=1.0), residuals=False)
    print(f"shock, eps = {eps:<7g} L1 error = {r.metrics['l1_error']:.3e}")
