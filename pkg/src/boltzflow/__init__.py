"""boltzflow: continuous normalizing flows trained from energy evaluations.

A flow sampler for Boltzmann densities: the model regresses onto Monte Carlo
estimates of the marginal vector field of a Gaussian conditional path, with
replay-buffer reuse of its own samples, ODE-based sampling/likelihood, and
Wasserstein evaluation.
"""

from .analytic import AnalyticMarginal, quadrature_mvf_1d
from .buffer import ReplayBuffer
from .energies import (
    DoubleWell4,
    EnergyModel,
    GaussianMixture,
    StandardGaussian,
    center_configuration,
    make_gmm_benchmark,
    mcmc_reference_sampler,
)
from .estimator import MvfEstimate, estimate_mvf, estimate_mvf_batch, softmax_weights
from .metrics import EvalReport, energy_histogram_distance, evaluate_nll, wasserstein2
from .network import AdamState, VectorFieldMLP, adam_step, load_checkpoint, save_checkpoint, time_embedding
from .ode import LikelihoodResult, OdeConfig, divergence, integrate, log_likelihood, log_likelihood_batch
from .paths import ConditionalGaussian, PathSchedule
from .training import EvalSettings, TrainConfig, TrainRecord, evaluate_model, generate_samples, inner_step, outer_step, train

__version__ = "0.1.0"

__all__ = [
    "AnalyticMarginal",
    "AdamState",
    "ConditionalGaussian",
    "DoubleWell4",
    "EnergyModel",
    "EvalReport",
    "EvalSettings",
    "GaussianMixture",
    "LikelihoodResult",
    "MvfEstimate",
    "OdeConfig",
    "PathSchedule",
    "ReplayBuffer",
    "StandardGaussian",
    "TrainConfig",
    "TrainRecord",
    "VectorFieldMLP",
    "adam_step",
    "center_configuration",
    "divergence",
    "energy_histogram_distance",
    "estimate_mvf",
    "estimate_mvf_batch",
    "evaluate_model",
    "evaluate_nll",
    "generate_samples",
    "inner_step",
    "integrate",
    "load_checkpoint",
    "log_likelihood",
    "log_likelihood_batch",
    "make_gmm_benchmark",
    "mcmc_reference_sampler",
    "outer_step",
    "quadrature_mvf_1d",
    "save_checkpoint",
    "softmax_weights",
    "time_embedding",
    "train",
    "wasserstein2",
]
