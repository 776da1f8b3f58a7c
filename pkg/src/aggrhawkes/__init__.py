"""Bayesian inference for (spatio-)temporal Hawkes processes observed as binned counts."""
from .aggregate import AggregatedCounts, BinSpec, ProcessBins, aggregate
from .kernels import Exponential, Gaussian2D, Lomax
from .process import BranchingStructure, EventPattern, ModelParams
from .simulate import SimulationRequest, simulate, simulate_hawkes

__version__ = "0.1.0"
