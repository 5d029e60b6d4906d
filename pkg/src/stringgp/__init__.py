"""String Gaussian processes: local GP experts on a partition of the input
domain, glued together by shared value-and-derivative boundary conditions so
that sample paths stay mean-square C1 everywhere."""

from .kernels import (
    FAMILIES,
    CapabilityError,
    Degeneracy,
    DegeneracyReport,
    DomainError,
    Linear,
    Matern32,
    Matern52,
    Periodic,
    Polynomial2,
    RationalQuadratic,
    SpectralMixture,
    SquaredExponential,
    check_degeneracy,
    kernel_from_spec,
)
from .multivariate import ProductKernel
from .regression import Homoskedastic, IllConditionedError, PerString, fit
from .sampler import sample, sample_boundaries, sample_path
from .string_kernel import (
    BoundaryMoments,
    DegeneracyError,
    Partition,
    StringKernel,
    build_boundary_moments,
    cov_block,
    gram,
)
from .hyperopt import (
    ConfigurationError,
    Model,
    OptimizationFailed,
    SearchSpec,
    fit_independent_experts,
    optimize,
)

__version__ = "0.1.0"
