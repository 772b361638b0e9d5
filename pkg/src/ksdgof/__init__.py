"""Goodness-of-fit testing for unnormalized models with the kernelized Stein discrepancy."""

from .baselines import (
    AisResult,
    MmdEstimate,
    estimate_log_z_ais,
    fisher_partial_statistic,
    gibbs_sampler,
    ks_test_1d,
    lr_oracle_test,
    mmd_bootstrap_test,
    mmd_u_statistic,
)
from .errors import (
    CapacityError,
    DegenerateSampleError,
    InvalidInputError,
    KsdError,
    NumericalError,
    ParseError,
    UnsupportedOperationError,
)
from .gof_tests import (
    BootstrapWeights,
    TestReport,
    bootstrap_replicate,
    ksd_bootstrap_test,
    ksd_linear_test,
    ksd_spectral_test,
    spectral_null_quantile,
)
from .io import SampleSet, load_model, load_sample
from .kernels import KernelDerivatives, RbfKernel, median_bandwidth, rbf_eval
from .models import (
    GaussianSpec,
    GbRbmSpec,
    GmmSpec,
    PerturbationSpec,
    ScoreModel,
    as_model,
    custom_model,
    gaussian_score,
    gbrbm_log_density_exact,
    gbrbm_score,
    gmm_score,
    perturb,
    random_gbrbm,
    random_gmm,
    sample_model,
    standard_normal_model,
)
from .stein import (
    KsdEstimate,
    SpectralNull,
    SteinGram,
    SteinKernel,
    build_gram,
    gram_eigenvalues,
    ksd_two_score,
    linear_statistic,
    stein_apply,
    u_q,
    u_statistic,
    v_statistic,
)

__version__ = "0.1.0"
