"""Clustering of multi-view data with missing views via per-view anchor graphs,
aligned into one shared low-dimensional representation.

Submodules
----------
::

 core     -- data containers, constraint checks, objective
 ingest   -- file I/O, incompleteness masks, synthetic data
 solver   -- alternating minimisation (anchors, consensus, graphs, alignment, weights)
 embed    -- spectral embedding of the consensus and k-means
 metrics  -- ACC, NMI, purity, pairwise F-score
 cli      -- experiment driver (``simvc`` command)
"""
from .core import (
    ConfigError,
    ModelState,
    MultiViewDataset,
    NumericalError,
    PresenceMask,
    SolverConfig,
    check_state,
    objective,
    objective_terms,
    presence_vector,
)
from .embed import cluster, embed_samples, kmeans
from .ingest import SynthSpec, generate_mask, load_dataset, synth_dataset
from .metrics import accuracy, evaluate, fscore, nmi, purity
from .solver import IterationRecord, simplex_project, solve

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ModelState", "MultiViewDataset", "NumericalError", "PresenceMask",
    "SolverConfig", "check_state", "objective", "objective_terms", "presence_vector",
    "cluster", "embed_samples", "kmeans",
    "SynthSpec", "generate_mask", "load_dataset", "synth_dataset",
    "accuracy", "evaluate", "fscore", "nmi", "purity",
    "IterationRecord", "simplex_project", "solve",
]
