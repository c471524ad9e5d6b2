"""Kernel regression for sampled continuous-time functional data with MAR responses."""

from .bandwidth import DEFAULT_KAPPA_GRID, BandwidthRule, Fixed, KnnCv, resolve_bandwidth
from .errors import (
    DegenerateBall,
    DensityFloorHit,
    EmptyInput,
    EmptyNeighborhood,
    FtkregError,
    GridMismatch,
    GridTooCoarse,
    InsufficientData,
    NegativeArgument,
    SpecInvalid,
    ZeroMissingness,
)
from .estimator import (
    EstimatorConfig,
    Identity,
    IndicatorLeq,
    VarianceComponents,
    estimate_cdf,
    estimate_cond_density,
    estimate_Fx,
    estimate_moments,
    estimate_p,
    estimate_quantile,
    estimate_tau0,
    estimate_W2bar,
    regress,
    variance_components,
)
from .funcdata import (
    Curve,
    FunctionalDataset,
    Grid,
    Observation,
    differentiate_curve,
    integrate_curve,
    read_curve_csv,
    read_dataset_csv,
    write_curve_csv,
    write_dataset_csv,
)
from .inference import (
    Asymptotic,
    Bootstrap,
    BootstrapWeights,
    CIRequest,
    CIResult,
    bootstrap_statistic,
    ci_asymptotic,
    ci_bootstrap,
    ci_quantile,
    normal_quantile,
)
from .kernels import (
    QuadraticKernel,
    SemiMetric,
    kernel_eval,
    kernel_from_name,
    semimetric_eval,
    semimetric_from_name,
)
from .simulate import (
    GaussianIid,
    MarExpit,
    MarNone,
    OUParams,
    SimSpec,
    WienerDiff,
    calibrate_mar,
    gamma_lift,
    generate,
    legendre_poly,
    mar_probability,
    num_index,
    response_value,
    simulate_ou,
    sine_shape,
)

__version__ = "0.1.0"
