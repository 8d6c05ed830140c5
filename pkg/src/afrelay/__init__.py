"""Asymptotic mean/variance of the two-hop amplify-and-forward MIMO relay
mutual information, with a Monte Carlo reference simulator."""

from .errors import ConvergenceError, DegenerateHessianError, NumericError, ValidationError
from .model import (
    BeamformerSpec,
    ChannelConfig,
    CorrelationMatrix,
    CovarianceSpec,
    EffectiveCovariances,
    S2Variant,
    build_covariance,
    fold_forwarder,
    fold_precoder,
    star_embed,
)
from .replica import (
    ReplicaResult,
    SaddlePoint,
    ScalarSaddle,
    evaluate,
    mean_mutual_information,
    scalar_mean,
    scalar_saddle,
    solve_saddle,
    variance_coefficients,
    variance_mutual_information,
)
from .simulate import (
    CumulantEstimate,
    SeededRng,
    empirical_cdf,
    estimate_cumulants,
    ks_distance,
    monte_carlo,
    mutual_information_sample,
    sample_channels,
    sample_white_gaussian,
)

__version__ = "0.1.0"
