"""Structured partial stochasticity for Bayesian MLPs."""

from .core_math import seeded_rng
from .masks import Architecture, LayerMask, count_fixed, fully_connected_count, generate_mask
from .network import FixedAssignment, MlpParams, backward, forward
from .map_training import GaussianLikelihood
from .optim import AdamConfig

__version__ = "0.1.0"
