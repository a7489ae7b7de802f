"""Decoherence in the spin-bath model and its M-spin generalization.

Closed-form expectation values evaluated in the log domain (``kernels``),
a dense state-vector simulator for small instances (``oracle``), and the
numerical protocols built on them (``experiments``).
"""

from .errors import ConfigError, InsufficientData, InvalidArgument, SpinBathError, UnsupportedSize
from .model import (
    BlockIndex,
    ConstantCoupling,
    DensityMatrix,
    EnvironmentEnsemble,
    FullProduct,
    GeneralD1,
    GeneralD2,
    OriginalD1,
    OriginalD2,
    SystemSpec,
    TimeGrid,
    UniformCoupling,
    block_index,
    iter_ensemble_chunks,
    make_random_ensemble,
    uniform_block_pair_weight,
)
from .logdomain import LogComplex
from .kernels import (
    SigmaSplit,
    expectation_original_d1,
    expectation_original_d2,
    gamma0,
    gamma1,
    kernel_K,
    log_r2,
    r2_of_t,
    reduced_state_limits,
    sigma_split_general_d1,
    sigma_split_general_d2,
)
from .experiments import (
    DecayFit,
    TimeSeries,
    Verdict,
    classify,
    fit_decoherence_time,
    poincare_time,
    power_scale,
    relaxation_estimate,
    run_figure,
)

__version__ = "0.1.0"
