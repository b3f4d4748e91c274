"""Numerical experiments on the small-volume isoperimetric problem."""
__version__ = "0.1.0"

from .errors import (ConvergenceError, DomainError, FitError, GeometryError, InputError, IsolabError, ParseError,
                     RangeError, ResolutionError, SearchError)
from .expr import Expression, parse
from .geometry import (ChartMetric, ManifoldPoint, TangentVec, build_covering, distance, exp_map, karcher_mean,
                       log_map, model_distance, scalar_curvature)
from .sphere import (QuadratureRule, SphereFunction, enclosed_volume, graph_area, mean_curvature,
                     project_first_eigenspace, project_Q)
from .bubble import (PseudoBubble, SolverConfig, f_area, residual, solve_beta, symmetry_check,
                     verify_uniqueness)
from .profile import (ExpansionFit, ProfileSample, berard_meyer_check, continuity_scan, estimate_profile, fit_ap,
                      profile_expansion_check, psi_c1_check, sweep_v)
from .grid import (GridSpec, VoxelDomain, average_over_offsets, grid_intersection_area, largest_component_check,
                   partition_components, select_grid, small_diameter_pipeline)
from .concentration import (AnnealSchedule, LatticeSet, best_ball_fit, concentration_experiment,
                            diameter_boundedness_check, minimize_perimeter, symmetric_difference_ratio)
from .metrics import PRESETS, metric_from_spec
