"""Planar energy-entropy geometry of passive states.

Build a point ensemble (energy, -log probability) from a diagonal state,
take its convex hull, and read thermodynamics off the picture: total order
is passivity, colinearity with non-negative slope is thermality, and the
hull area measures how far from equilibrium the many-copy limit sits.
"""

from .spectra import (
    DiagonalState,
    EnergySpectrum,
    MacroPoint,
    NotFullRankError,
    average_energy,
    full_rank_regularize,
    is_passive,
    load_state_file,
    macro_point,
    passify,
    single_shot_ergotropy,
    state_from_spec,
    von_neumann_entropy,
)
from .ensemble import (
    EsEnsemble,
    EsPoint,
    build_ensemble,
    ensemble_from_points,
    expectation,
    is_totally_ordered,
    min_activation_k,
    minkowski_sum,
    regularized_k_ensemble,
)
from .geometry import (
    BranchDecomposition,
    CompletelyPassiveError,
    ConvexRegion,
    GibbsParams,
    area,
    branch_decomposition,
    contains_points,
    convex_hull,
    gibbs_fit,
    is_colinear,
    is_completely_passive,
    qutrit_area_differential,
    select_virtual_qutrit,
    virtual_temperatures,
)
from .thermo import (
    EquilibriumCurve,
    MinBetaAthermality,
    beta_athermality,
    beta_cap,
    equilibrium_curve,
    gibbs_state,
    max_entropic_gain,
    max_extractable_work,
    min_beta_athermality,
    solve_beta_for_energy,
    solve_beta_for_entropy,
)
from .athermality import (
    AthermalityGrid,
    AthermalityResult,
    InfeasibleRegionError,
    athermality_grid,
    geometric_athermality,
    passive_region_bounds,
    qutrit_state_from_macro,
)
from .trajectories import (
    MonotonicityReport,
    StepBelowFloorError,
    StepSolveError,
    TrajectoryRecord,
    TrajectorySpec,
    activation_step_state,
    integrate_trajectory,
    partial_thermalization_step,
    random_tangent,
    verify_monotonicity,
)

__version__ = "0.1.0"
