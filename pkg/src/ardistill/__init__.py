"""One-step distillation of autoregressive sequence generators, desk scale.

Synthetic latent-sequence worlds with closed-form denoising oracles, a
numpy transformer stack with reverse-mode autodiff, distribution-matching
plus adversarial training, few-step sampling with first-block refinement,
and trajectory curvature diagnostics.
"""

from . import autodiff
from .autodiff import Tensor, finite_difference, no_grad
from .config import ExperimentConfig, build_experiment, load_experiment, parse_config_text
from .curvature import (
    curvature_profile,
    curvature_stats,
    mass_fraction,
    temporal_difference_record,
    write_stats_json,
)
from .errors import ConfigError, ContractError, TrainingDiverged
from .metrics import flatten_sequences, logit_gap_stats, motion_proxy, sliced_wasserstein
from .model import (
    CriticNet,
    EndpointConfig,
    EndpointNet,
    GeneratorNet,
    KVCache,
    ModelConfig,
    generator_forward,
    load_net,
    read_checkpoint,
    rollout_one_step,
    save_checkpoint,
)
from .objectives import (
    adv_discriminator_loss,
    adv_generator_loss,
    consistency_loss,
    dmd_generator_loss,
    fake_score_loss,
    forward_kl_surrogate,
)
from .sampler import (
    SampleConfig,
    denoise_block,
    read_sequences_csv,
    sample_batch_ffe,
    sample_ffe,
    sample_from_noise,
    step_schedule,
    write_sequences_csv,
)
from .schedule import NoiseSchedule, corrupt, sigma_at, velocity_target, x0_from_velocity
from .seeding import KNOWN_STREAMS, StreamSet, stream_rng
from .synthworld import (
    BendFamily,
    BendMixture,
    ChordFamily,
    LatentSequence,
    TrajectoryRecord,
    World,
    WorldConfig,
    analytic_velocity,
    bimodal_ssm_world,
    gauss_ssm_world,
    integrate_bend,
    integrate_flow,
    make_ode_pairs,
    make_ode_trajectory,
    read_trajectories_csv,
    sample_batch,
    sample_bend_trajectories,
    sample_sequence,
    write_trajectories_csv,
)
from .trainer import (
    AdamW,
    ConsistencyConfig,
    TrainConfig,
    Trainer,
    TrainLog,
    TrainLogRow,
    endpoint_error_medians,
    endpoint_sample,
    half_mix_time,
    paper_hparams,
    train_consistency_student,
)

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "BendFamily",
    "BendMixture",
    "ChordFamily",
    "ConfigError",
    "ConsistencyConfig",
    "ContractError",
    "CriticNet",
    "EndpointConfig",
    "EndpointNet",
    "ExperimentConfig",
    "GeneratorNet",
    "KNOWN_STREAMS",
    "KVCache",
    "LatentSequence",
    "ModelConfig",
    "NoiseSchedule",
    "SampleConfig",
    "StreamSet",
    "Tensor",
    "TrainConfig",
    "TrainLog",
    "TrainLogRow",
    "Trainer",
    "TrainingDiverged",
    "TrajectoryRecord",
    "World",
    "WorldConfig",
    "adv_discriminator_loss",
    "adv_generator_loss",
    "analytic_velocity",
    "autodiff",
    "bimodal_ssm_world",
    "build_experiment",
    "consistency_loss",
    "corrupt",
    "curvature_profile",
    "curvature_stats",
    "denoise_block",
    "dmd_generator_loss",
    "endpoint_error_medians",
    "endpoint_sample",
    "fake_score_loss",
    "finite_difference",
    "flatten_sequences",
    "forward_kl_surrogate",
    "gauss_ssm_world",
    "generator_forward",
    "half_mix_time",
    "integrate_bend",
    "integrate_flow",
    "load_experiment",
    "load_net",
    "logit_gap_stats",
    "make_ode_pairs",
    "make_ode_trajectory",
    "mass_fraction",
    "motion_proxy",
    "no_grad",
    "paper_hparams",
    "parse_config_text",
    "read_checkpoint",
    "read_sequences_csv",
    "read_trajectories_csv",
    "rollout_one_step",
    "sample_batch",
    "sample_batch_ffe",
    "sample_bend_trajectories",
    "sample_ffe",
    "sample_from_noise",
    "sample_sequence",
    "save_checkpoint",
    "sigma_at",
    "sliced_wasserstein",
    "step_schedule",
    "stream_rng",
    "temporal_difference_record",
    "train_consistency_student",
    "velocity_target",
    "write_sequences_csv",
    "write_stats_json",
    "write_trajectories_csv",
    "x0_from_velocity",
]
