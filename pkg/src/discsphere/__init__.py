"""Discrete spherical averages on Z^d: exact shells, multipliers, sparse bounds and counterexamples."""

__version__ = "0.1.0"

from .arithmetic import (
    gauss_sum,
    gauss_table,
    mobius,
    ramanujan_block,
    ramanujan_bound_report,
    ramanujan_sum,
    totient,
    verify_gauss_fourier,
)
from .dyadic import BoxSums, DyadicCube, dense_cube_scan, stopping_cube_scan
from .errors import CapacityError, EmptyAnnulusError, RecursionDepthError, ToleranceError
from .experiments import (
    delta_decay_experiment,
    endpoint_budget,
    growth_table,
    necessity_scan,
    sphere_set_experiment,
    weak_quasinorm,
)
from .lattice import (
    BoxDomain,
    LatticeFunction,
    RadiusSet,
    SphereShell,
    enumerate_ball,
    enumerate_sphere,
    representation_count,
    representation_counts,
)
from .multipliers import (
    BumpProfile,
    TorusGrid,
    continuous_sphere_ft,
    discrete_sphere_multiplier,
    error_multiplier_norm,
    factorization_check,
    major_arc_multiplier,
    main_term_multiplier,
)
from .operators import (
    StoppingTime,
    annulus_average,
    ball_average,
    is_admissible,
    make_admissible_tau,
    maximal_average,
    spherical_average,
    stopping_time_average,
)
from .sparse import (
    SparseCollection,
    build_sparse_collection,
    certify_constant,
    region_contains,
    region_vertices,
    sparse_form,
    verify_sparse,
)
