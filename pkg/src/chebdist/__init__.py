"""Distributed application of unions of graph Fourier multipliers through
shifted Chebyshev polynomial approximation, with a message-passing simulator."""

from .applications import (
    DenoiseConfig,
    DenoiseReport,
    IstaState,
    classify_semisupervised,
    denoise_tikhonov,
    paraboloid_signal,
    run_denoising_experiment,
    smooth_heat,
    soft_threshold,
    wavelet_denoise_ista,
)
from .chebyshev import (
    ChebExpansion,
    Multiplier,
    cheb_coeffs,
    eval_expansion,
    multiplier_heat,
    multiplier_tikhonov,
    product_coeffs,
    sgwt_kernels,
)
from .distsim import ProtocolError, RoundTrace, run_adjoint, run_forward, run_gram
from .graph import (
    DisconnectedGraphError,
    GraphError,
    Laplacian,
    Spectrum,
    WeightedGraph,
    build_geometric_graph,
    density_matched_sigma,
    gft,
    igft,
    lambda_max_bound,
    laplacian,
    sample_connected_geometric_graph,
    smoothness,
    spectrum,
)
from .operators import (
    ChebOperator,
    MultiplierUnion,
    apply_cheb,
    apply_cheb_adjoint,
    apply_cheb_gram,
    apply_exact,
    cheb_recurrence_apply,
    operator_norm_bound,
)

__version__ = "0.1.0"
