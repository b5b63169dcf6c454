"""
What goes wrong at a coefficient jump
=====================================

When ``k`` jumps, the exact transport rescales densities by ``J`` in the
fan behind the interface.  For ``k_L > k_R`` mass piles up (J > 1), so
``f`` leaves [0, 1] and constant states stop being steady.  The defect
measure then turns negative.  These runs show the size of the effect.
"""
import numpy as np

from bgkflux import (BgkConfig, Coefficient, Grid, MacroField, bgk_run, build_velocity, chi,
                     defect_measure)

vel = build_velocity("burgers")
g = Grid(-1.5, 1.5, 128, 16)
cfg = BgkConfig(eps=0.05, t_final=0.25, n_snapshots=8)

for kl, kr in ((1.0, 1.0), (1.0, 2.0), (2.0, 1.0)):
    c = Coefficient(kl, kr)
    steady = bgk_run(MacroField(np.full(g.n_x, 0.5), g), cfg, c, vel, strict=False)
    drift = np.abs(steady.f[-1] - chi(0.5, g)).max()
    traj = bgk_run(MacroField.riemann(0.8, 0.2, g), cfg, c, vel, strict=False)
    m = defect_measure(traj, check=False)
    print(f"k = ({kl:g}, {kr:g}):  constant-state drift {drift:.3f}   "
          f"f range [{traj.f_min:.3f}, {traj.f_max:.3f}]   min defect {m.min_value:+.2e}")
