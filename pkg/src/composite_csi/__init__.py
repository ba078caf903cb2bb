"""Composite (large-scale + small-scale) channel estimation for massive
MU-MIMO uplinks."""

from .analysis import (
    NmseReport,
    TheoryMse,
    log_beta_variance,
    nmse_metrics,
    theoretical_bias,
    theoretical_mse,
    theoretical_variance,
)
from .bases import RrBasis, dct2_basis, klt_basis, polynomial_basis
from .channel import (
    ChannelRealization,
    CorrelationMatrix,
    LargeScaleParams,
    LargeScaleRealization,
    ReceivedBlock,
    SmallScaleRealization,
    SpatialProfile,
    SteeringDiagonal,
    SystemDims,
    correlation_from_profile,
    gen_lsfc,
    gen_ssfc,
    received_block,
    steering_diag,
)
from .em import EmPrior, EmState, conventional_lsfc_ls, em_joint, em_prior
from .lsfc import LsfcEstimate, estimate_lsfc, estimate_lsfc_multi, lsfc_error_decomposition
from .pilots import PilotMatrix, SnrSpec, orthogonal_pilots, snr_for
from .ssfc import (
    AoaSearchGrid,
    SsfcEstimate,
    aoa_line_search,
    conventional_ls,
    estimate_ssfc_I,
    estimate_ssfc_II,
)

__version__ = "0.1.0"
