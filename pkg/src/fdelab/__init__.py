"""Numerical lab for delayed abstract evolution equations du/dt = A u + F(t, u_t).

Mild solutions, the exponential renorm on history segments, the split of the
solution map into a contracting history shift plus a compact integral part,
and periodic orbits of forced delayed reaction-diffusion models.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .contraction_lab import (L_op, Qbar_direct, decomposition_consistency, equicontinuity_report,
                              finite_set_contraction, mnc_surrogate, verify_L_contraction,
                              verify_norm_equivalence)
from .mild_solver import (FdeProblem, SolverConfig, Trajectory, convergence_study, solution_map,
                          solve)
from .periodic_rd import (RdModel, boundedness_probe, build_delayed_logistic, distinct_orbits,
                          find_periodic, find_periodic_many, period_map, verify_periodicity)
from .semigroups import (DampedSemigroup, MatrixSemigroup, SpectralNeumannSemigroup, operator_norm,
                         star_norm, uniform_continuity_delta)
from .state_space import (HistorySegment, RenormWeights, SpatialField, renorm, segment_sup_norm,
                          sup_norm)

__version__ = "0.1.0"
