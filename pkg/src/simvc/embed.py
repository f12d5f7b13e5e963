"""From the consensus representation to discrete labels."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import ModelState, SolverConfig

MAX_LLOYD_ITERS = 300


@dataclass(frozen=True)
class Embedding:
    points: np.ndarray  # n x k, one row per sample
    k: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.points)):
            raise ValueError("embedding has non-finite entries")


def embed_samples(F, k, reference=None) -> Embedding:
    """Top-``k`` sample-side singular vectors of ``F`` (m x n).

    When the leading singular values of ``F`` are (numerically) tied, as
    they are for a row-orthonormal ``F``, the top-``k`` subspace is not
    unique.  Passing ``reference`` (an m x n matrix, typically
    ``sum_v P_v Z_v``) resolves the tie: the sample-side basis is rotated
    so that its directions are ordered by how strongly ``reference``
    projects onto them.
    """
    from .solver import svd

    F = np.asarray(F, dtype=np.float64)
    m = F.shape[0]
    if k > m:
        raise ValueError(f"k={k} exceeds the number of rows m={m}")
    # svd(F.T) puts the sign convention on the sample-side factor.
    Vs, s, _ = svd(F.T)
    if reference is not None:
        Vs = _break_ties(Vs, s, np.asarray(reference, dtype=np.float64))
    return Embedding(np.ascontiguousarray(Vs[:, :k]), k)


def _break_ties(Vs, s, reference, rtol=1e-8):
    from .solver import fix_signs, svd

    out = Vs.copy()
    start = 0
    while start < s.size:
        stop = start + 1
        while stop < s.size and s[start] - s[stop] <= rtol * max(s[0], 1e-300):
            stop += 1
        if stop - start > 1:
            block = Vs[:, start:stop]
            # coordinates of the reference rows inside the tied subspace
            C = reference @ block
            _, _, Wt = svd(C)
            out[:, start:stop] = fix_signs(block @ Wt.T, Wt)[0]
        start = stop
    return out


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    history: tuple  # inertia after each Lloyd step


def _sq_dists(X, C):
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_pp_init(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = X[idx]
        d2 = np.minimum(d2, ((X - centers[c]) ** 2).sum(1))
    return centers


def _inertia(X, centers, labels):
    diff = X - centers[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _lloyd(X, k, rng):
    centers = kmeans_pp_init(X, k, rng)
    labels = np.argmin(_sq_dists(X, centers), axis=1)
    history = []
    n_iter = 0
    for n_iter in range(1, MAX_LLOYD_ITERS + 1):
        counts = np.bincount(labels, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # move the point farthest from its centre into the empty cluster
            far = np.argmax(((X - centers[labels]) ** 2).sum(1))
            labels[far] = c
            counts = np.bincount(labels, minlength=k)
        sums = np.zeros((k, X.shape[1]))
        np.add.at(sums, labels, X)
        centers = sums / counts[:, None]
        history.append(_inertia(X, centers, labels))
        new = np.argmin(_sq_dists(X, centers), axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
    return KMeansResult(labels, centers, _inertia(X, centers, labels), n_iter, tuple(history))


def kmeans_fit(points, k, seed=0, restarts=10, workers=1) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding; best of ``restarts`` runs.

    Restart ``r`` uses ``seed + r``; ties in inertia keep the lowest restart.
    """
    X = np.asarray(points.points if isinstance(points, Embedding) else points,
                   dtype=np.float64)
    n = X.shape[0]
    if n < k:
        raise ValueError(f"cannot form {k} clusters from {n} points")

    def run(r):
        return _lloyd(X, k, np.random.default_rng(seed + r))

    if workers > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(restarts)))
    else:
        results = [run(r) for r in range(restarts)]
    best = results[0]
    for res in results[1:]:
        if res.inertia < best.inertia:
            best = res
    return best


def kmeans(points, k, seed=0, restarts=10, workers=1) -> np.ndarray:
    return kmeans_fit(points, k, seed, restarts, workers).labels


def cluster(state: ModelState, config: SolverConfig) -> np.ndarray:
    """Labels for every sample: spectral embedding of F followed by k-means.

    Ties among the (all equal) singular values of F are broken with the
    aligned graph sum ``sum_v P_v Z_v``.
    """
    from .solver import consensus_target

    emb = embed_samples(state.consensus, config.k, reference=consensus_target(state))
    pts = emb.points
    if config.normalize_embedding:
        norms = np.linalg.norm(pts, axis=1, keepdims=True)
        pts = pts / np.where(norms > 0, norms, 1.0)
    return kmeans(pts, config.k, seed=config.seed, restarts=config.kmeans_restarts,
                  workers=config.workers)
