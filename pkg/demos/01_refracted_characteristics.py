"""
Characteristics refracted at an interface
=========================================

With ``k = 1`` on the left and ``k = 2`` on the right, a particle moving at
kinetic speed ``a`` doubles its pace as it crosses ``x = 0``.  Densities
carried along these paths are diluted by the Jacobian factor ``J``.
"""
import numpy as np

from bgkflux import CharParams, Coefficient, char_backward, char_forward, jacobian

p = CharParams(Coefficient(1.0, 2.0), a_val=1.0)

# %%
# Follow a few starting points for three time units.
starts = np.array([-3.0, -2.0, -1.0, 0.0, 0.5])
ends = char_forward(starts, 3.0, p)
for x0, x1 in zip(starts, ends):
    print(f"x0 = {x0:+.2f}  ->  X(3) = {x1:+.2f}")

# %%
# Tracing back recovers the start, and J tells how much a unit of mass is
# stretched: points that crossed the interface sit in the fan [0, 6) where
# J = k_L / k_R = 1/2.
print("back to", char_backward(ends, 3.0, p))
print("J on the fan:", jacobian(3.0, np.array([1.0, 3.0, 5.9]), p))
print("J elsewhere: ", jacobian(3.0, np.array([-1.0, 6.5]), p))
