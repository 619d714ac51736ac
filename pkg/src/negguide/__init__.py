"""Identity-conditioned diffusion sampling with scheduled negative guidance,
plus genuine/impostor separability evaluation."""

__version__ = "0.1.0"

from .diffusion import (
    DiffusionState,
    NoiseSchedule,
    ddim_step,
    ddpm_step,
    default_schedule,
    forward_diffuse,
    make_linear_beta_schedule,
    subsample_timesteps,
)
from .guidance import GuidanceSchedule, GuidedNoise, combine_noise, guidance_weight, guided_noise
from .identity import ContextPool, IdentityContext, NegativeStrategy, generate_contexts, select_negative
from .denoiser import (
    AnalyticDenoiser,
    GaussianIdentityWorld,
    MLPDenoiser,
    TrainConfig,
    analytic_eps,
    predict_eps,
    train_denoiser,
    unconditional_eps,
)
from .sampler import GeneratedDataset, SamplingConfig, generate_dataset, sample_one
from .evaluation import (
    PairingProtocol,
    ScoreSet,
    SeparabilityReport,
    build_pairs,
    compute_eer,
    cosine_score,
    fdr,
    fnmr_at_fmr,
    make_report,
    report_from_scores,
)
