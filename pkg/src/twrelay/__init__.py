"""Two-stage channel estimation and training design for two-way relay systems
with a single-antenna relay.

Stage 1 estimates the backward channels by LMMSE; stage 2 estimates the
composite channel by SVD-based maximum likelihood and recovers the forward
channels, with pilots designed by minimizing the Bayesian CRLB.
"""

from .backward import (
    BackwardEstimate,
    Stage1Training,
    error_covariance,
    estimate_backward,
    lmmse_backward,
    lmmse_gain,
    nonoptimal_stage1_training,
    optimal_stage1_training,
)
from .channel import ChannelRealization, ReceivedSignals, draw_channels, stage1_receive, stage2_receive
from .config import SystemConfig, trial_rng
from .forward import (
    CompositeEstimate,
    EffectiveNoiseModel,
    ForwardEstimate,
    effective_noise_cov,
    entry_ls_baseline,
    forward_from_composite,
    ml_objective,
    noise_weight_eta,
    projector_omega,
    q_value,
    rank_one_objective,
    svd_ml_composite,
    weighting_Z,
)
from .harness import ExperimentSpec, MseRecord, Scheme, figure_spec, run_experiment, run_trial, write_csv
from .training import (
    PowerAllocation,
    Stage2Training,
    bcrlb_trace,
    bim,
    build_training,
    dft_unitary,
    fim,
    prior_information,
    scalar_objective,
    solve_allocation,
)

__version__ = "0.1.0"
