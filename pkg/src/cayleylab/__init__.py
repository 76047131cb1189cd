"""cayleylab: exact Cayley-graph geometry and growth experiments.

Marked groups with decidable word problems (free, L1 lattices, free-product
quotients, finite quotients), windowed contraction certificates, exact
horoboundary models with shadows and Gromov products, conformal density
approximants with an exact tree-end model, and reproducible experiments
(growth exponents, kernel-vs-quotient growth, shadow-mass comparisons,
excursion sets, horoboundary atlases).
"""

from .boundary import (
    Cocycle,
    GradientRay,
    InteriorCocycle,
    L1Horofunction,
    Shadow,
    TreeEnd,
    WindowCocycle,
    boundary_limit,
    gradient_ray,
    gromov_product,
    limit_set_membership,
    project_cocycle,
    reduced_equiv,
    shadow_contains,
    transverse_pair_check,
)
from .contraction import (
    ContractingElementWitness,
    ContractionCertificate,
    NotContracting,
    SubsetWindow,
    check_contracting,
    combine_contracting,
    contracting_extension,
    contracting_tail_members,
    detect_contracting,
    entry_exit,
    find_contracting_tail,
    orbit_axis_window,
    orbit_window,
    project,
)
from .densities import (
    AtomicDensity,
    PattersonWeight,
    QuasiMorphism,
    TreeEndDensity,
    annulus_bound_check,
    conformality_check,
    density_pushforward,
    harnack_check,
    kochen_stone_check,
    patterson_approximant,
    shadow_lemma_check,
    shadow_mass,
    twisted_exponent,
    vitali_select,
)
from .errors import (
    BudgetExceededError,
    CayleyLabError,
    HorizonExhaustedError,
    InvalidConfigError,
    OutOfRangeError,
    WindowError,
    WindowRimError,
)
from .groups import (
    FiniteQuotient,
    FreeAbelianL1,
    FreeGroup,
    FreeProductQuotient,
    Homomorphism,
    MarkedGroup,
    group_from_config,
)
from .lab import ExperimentReport, run_experiment
from .spaces import (
    Ball,
    QuotientSpace,
    Sphere,
    all_geodesics,
    distance,
    enumerate_ball,
    geodesic,
    growth_exponent,
    kernel_counts_dp,
    kernel_counts_filtered,
    poincare_partial,
    quotient_distance,
    sphere,
    sphere_counts,
)

__version__ = "0.1.0"
