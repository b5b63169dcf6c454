"""BGK relaxation of scalar conservation laws with a discontinuous flux k(x) A(u)."""
from .model import (Coefficient, Grid, HypothesisViolation, KineticDensity, MacroField,
                    VelocityModel, build_velocity, chi, equilibrium, kinetic_flux, moment)
from .transport import (CharParams, char_backward, char_forward, evaluate_pwc, jacobian,
                        pwc_mass, transport_apply, transport_exact_pwc)
from .bgk import (BgkConfig, InvariantViolation, NonContraction, Trajectory, bgk_run,
                  bgk_step, equilibrium_distance, picard_solve, relax_step)
from .kinetic_analysis import (DefectMeasure, TestFunctionFamily, compare_plus,
                               defect_mass, defect_measure, interface_correction,
                               kinetic_residual)
from .reference import (FvConfig, RegularizedCoefficient, eo_flux, fv_run,
                        regularize_k, riemann_exact, riemann_profile)

__version__ = "0.1.0"
