"""Finite-dimensional quantum information manifold: Gibbs states of form
perturbations, the BKM metric, (+1)-affine geometry and patch chains."""

from .operators import (
    HermitianOperator,
    ModelHamiltonian,
    SpectralDecomposition,
    apply_function,
    build_model,
    schatten_norm,
    spectral,
)
from .perturbation import (
    Perturbation,
    RelativeBound,
    eigenvalue_sandwich,
    is_small,
    klmn,
    relative_norm,
    trace_bound_check,
)
from .gibbs import GibbsState, TangentVector, center, entropy, gibbs_state, regularized_mean
from .geometry import (
    BkmKernel,
    TransportMap,
    bkm,
    bkm_gram,
    bkm_kernel,
    bkm_quadrature,
    duhamel_check,
    plus_mix,
    transport,
)
from .atlas import (
    ManifoldPoint,
    Patch,
    extend,
    luxemburg,
    norm_equivalence_report,
    origin,
    path_independence_check,
    plus_convexity_check,
)

__version__ = "0.1.0"
