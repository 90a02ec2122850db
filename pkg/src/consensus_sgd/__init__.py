"""Consensus stochastic subgradient descent over a network of nodes.

Simulation engine, communication schedules, data-dependent bounds and
asymptotic diagnostics.  Hot loops run in a compiled extension when it is
built and fall back to numpy otherwise; ``consensus_sgd.BACKEND`` names
the one in use.
"""
__version__ = "0.1.0"

from ._backend import NAME as BACKEND
from .bounds import BoundInputs, BoundReport, network_error_bound, regime_classify, theorem1_bound, theorem2_bound, theorem3_bound
from .data import Dataset, Shards, SparseVector, load_libsvm, normalize, parse_libsvm, serialize_libsvm, split_uniform
from .data import synth_controlled_rho, synth_gaussian_classification
from .engine import RunConfig, RunTrace, Seeds, average_iterate_check, run, run_minibatch
from .objective import LossSpec, Objective
from .schedules import Constant, IidBernoulli, MiniBatchPeriodic, PowerLaw
from .spectral import estimate_spectral_norm, submatrix_lemma_check
from .topology import Graph, MixingMatrix, k_regular_graph, lambda2, max_degree_weights, uniform_neighbor_weights

__all__ = [
    "BACKEND", "BoundInputs", "BoundReport", "Constant", "Dataset", "Graph", "IidBernoulli", "LossSpec",
    "MiniBatchPeriodic", "MixingMatrix", "Objective", "PowerLaw", "RunConfig", "RunTrace", "Seeds", "Shards",
    "SparseVector", "average_iterate_check", "estimate_spectral_norm", "k_regular_graph", "lambda2",
    "load_libsvm", "max_degree_weights", "network_error_bound", "normalize", "parse_libsvm", "regime_classify",
    "run", "run_minibatch", "serialize_libsvm", "split_uniform", "submatrix_lemma_check",
    "synth_controlled_rho", "synth_gaussian_classification", "theorem1_bound", "theorem2_bound",
    "theorem3_bound", "uniform_neighbor_weights",
]
