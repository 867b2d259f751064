"""Deformed exponential families on Musielak-Orlicz spaces, computed on graded grids."""

from .errors import (ConstructionError, InconclusiveError, NotInDomainError, NotInSpaceError,
                     NotNormalizedError, NumericFailure, PhiFamilyError, UnsupportedChartError)
from .measure import (GridMeasure, IntegralVerdict, Points, ScalarField, Verdict,
                      coordinate_field, depth_field, integrate, make_uniform_grid, power_field,
                      refine, with_breakpoints)
from .phifunc import (PhiFunction, center_from_density, make_exponential,
                      make_kappa_exponential, verify_phi_axioms)
from .morlicz import (MOFunction, Membership, classify_membership, fenchel_conjugate,
                      luxemburg_norm, mo_from_phi, modular, orlicz_norm, power_mo)
from .delta2 import (Delta2Class, Delta2Report, construct_exclusion_center,
                     construct_non_delta2_center, delta2_probe, inclusion_test)
from .family import (Chart, SweepResult, SweepVerdict, WitnessKind, boundary_witness,
                     chart_inverse, chart_map, in_K, inverse_psi, make_chart, normalize_psi,
                     project_to_B, psi_sweep, transition_map)

__version__ = "0.1.0"
