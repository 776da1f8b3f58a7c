from .config import STRATEGIES, Priors, SamplerConfig
from .sampler import (
    ChainState,
    ConstraintViolation,
    LatentData,
    PosteriorSamples,
    init_state,
    latent_data,
    run_chain,
    sample_posterior,
    sweep,
    update_branching,
    update_conjugate,
    update_latent,
    update_rate_mh,
)

__all__ = [
    "STRATEGIES", "Priors", "SamplerConfig", "ChainState", "ConstraintViolation", "LatentData",
    "PosteriorSamples", "init_state", "latent_data", "run_chain", "sample_posterior", "sweep", "update_branching",
    "update_conjugate", "update_latent", "update_rate_mh",
]
