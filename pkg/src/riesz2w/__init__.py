"""Two-weight Riesz transform constants on discrete measures.

Evaluates the characterization constants (operator norm, Poisson A2,
testing, energy, uniform-full-dimension), the dyadic machinery behind them
(random shifted grids, goodness, Haar differences, Whitney collections,
stopping trees), and the constructive near-null counterexample weight.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .constants import (
    AuditConfig,
    ConstantsReport,
    CubeFamily,
    a2_constant,
    default_family,
    monotonicity_audit,
    testing_constant,
    theorem_audit,
    ufd_eta,
)
from .geometry import (
    Complement,
    Cube,
    Difference,
    DiscreteMeasure,
    RieszDimension,
    boundary_distance,
    center_of_mass,
    cube_mass,
    dilate,
    dist_to_cube,
    restrict,
)
from .grids import (
    GoodnessParams,
    GridCube,
    HaarCoefficients,
    ShiftedGrid,
    bad_energy_mc,
    build_grid,
    is_admissible,
    is_good,
    martingale_decompose,
    p_bad_mc,
    project_good_bad,
    whitney,
)
from .kernel import (
    KernelParams,
    bilinear_form,
    divergence_residual,
    kernel_eval,
    operator_norm,
    riesz_apply,
    riesz_field,
)
from .poisson import (
    PartitionSpec,
    dyadic_poisson,
    energy,
    energy_constant_audit,
    poisson_avg,
)
from .generators import (
    cantor_ad,
    counterexample_weight,
    doubling_corpus,
    hyperplane_concentrated,
    lebesgue_sample,
    power_doubling,
)
from .stopping import (
    StoppingThresholds,
    StoppingTree,
    TentMeasure,
    build_stopping_tree,
    carleson_check,
    functional_energy_sum,
    stopping_projections,
    tent_size,
)
