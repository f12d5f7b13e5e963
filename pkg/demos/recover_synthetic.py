"""
Recovering clusters from incomplete views
=========================================

Three Gaussian-blob views of the same 500 samples, with 30% of the
(sample, view) cells removed. The solver learns per-view anchors and
graphs, aligns them, and the consensus is clustered with k-means.
"""
import numpy as np

from simvc import SolverConfig, SynthSpec, cluster, evaluate, generate_mask, solve, synth_dataset
from simvc.ingest import mask_stats

spec = SynthSpec(n=500, k=4, V=3, dims=[10, 12, 15], cluster_separation=8, noise_std=1, seed=42)
data, labels = synth_dataset(spec)
mask = generate_mask(data.n, data.n_views, ratio=0.3, seed=42)
print("mask:", mask_stats(mask))

# every sample keeps at least one view
print("views per sample:", np.bincount(mask.presence.sum(axis=0)))

config = SolverConfig(m=8, k=4, lam=1.0, mu=1e-2)
state, trace = solve(data, mask, config)
print(f"{len(trace)} iterations, objective {trace[0].objective:.1f} -> {trace[-1].objective:.1f}")
print("view weights:", np.round(state.weights, 3))

pred = cluster(state, config)
for name, value in evaluate(pred, labels).items():
    print(f"{name:>7}: {value:.4f}")
