"""Non-radial local solutions of Delta u = a(x, u, grad u, hess u) on balls.

The construction is a Picard iteration of the Taylor-corrected Newtonian
potential operator around a harmonic quadratic seed, backed by an empirical
contraction certificate over the compact box the iterates live in.
"""

from .grid import BallDomain, QuadGrid, build_grid
from .fields import (GridField, derivative, gradient_at_origin,
                     hessian_at_origin, hoelder_norm, norm2, norm2_value,
                     sup_norm, to_csv, value_at_origin,
                     vanishing_order_project)
from .kernels import Kernel
from .potential import (PotentialField, laplacian_identity_residual,
                        newtonian, operator_norm_probe, set_threads)
from .expr import (ExprSyntaxError, EvalDomainError, NonlinearitySpec,
                   hypothesis_check, parse, parse_expression,
                   shifted_by_affine)
from .certificate import (ContractionCertificate, ConstantTable, EBox,
                          aggregation_constant, bound_constants, certify_at,
                          delta_eta, search_admissible)
from .solver import (CertificateRefused, DivergenceError, HarmonicSeed,
                     SolveReport, elliptic_transform, make_seed, pde_residual,
                     radiality_check, solve, theta)
from .applications import (MetricSpec, ProblemPreset, christoffel,
                           divergence_form_residual,
                           harmonic_coordinates_system, harmonic_map_system,
                           mean_curvature_system, metric_from_entries,
                           preset_by_name, preset_catalog)

__version__ = "0.1.0"
