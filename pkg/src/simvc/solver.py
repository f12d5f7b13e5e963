"""Block-coordinate minimisation of the anchor-graph alignment objective.

One outer iteration updates, in order: anchors, consensus, anchor graphs,
alignment matrices and view weights.  Each block is solved exactly given
the others, so the objective never increases.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    ModelState,
    MultiViewDataset,
    NumericalError,
    PresenceMask,
    SolverConfig,
    check_compatible,
    objective_terms,
    presence_vector,
    reconstruction_errors,
)

WEIGHT_EPS = 1e-12
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    objective: float
    term_reconstruction: float
    term_alignment: float
    term_regularization: float
    wall_time_ms: float

    def as_dict(self, timing=True) -> dict:
        d = {
            "iter": self.iter,
            "objective": self.objective,
            "term_reconstruction": self.term_reconstruction,
            "term_alignment": self.term_alignment,
            "term_regularization": self.term_regularization,
        }
        if timing:
            d["wall_time_ms"] = self.wall_time_ms
        return d


# -- linear algebra helpers --------------------------------------------------

def fix_signs(U, Vt):
    """Flip singular pairs so each column of ``U`` has its largest-|.| entry positive.

    Ties go to the lowest index (``argmax`` semantics).
    """
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, Vt * signs[:, None]


def svd(M):
    """Economy SVD with the deterministic sign convention of :func:`fix_signs`.

    numpy's LAPACK driver always returns full orthonormal factors, so when
    ``M`` is rank deficient the null-space directions are completed for us.
    """
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    U, Vt = fix_signs(U, Vt)
    return U, s, Vt


def polar(M):
    """Orthogonal polar factor ``U V^T`` of ``M``.

    For ``M`` of shape (p, q) with p >= q this maximises ``Tr(B^T M)`` over
    ``B`` with orthonormal columns; for p < q it maximises over orthonormal
    rows.
    """
    if not np.all(np.isfinite(M)):
        raise NumericalError("non-finite matrix passed to SVD")
    U, _, Vt = svd(M)
    return U @ Vt


def numerical_rank(M) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s >= RANK_RTOL * s[0]))


# -- simplex projection ------------------------------------------------------

def simplex_project(f):
    """Euclidean projection of a vector onto the probability simplex.

    Solves the KKT system ``z = max(f + alpha, 0)``, ``sum(z) = 1`` exactly by
    sorting, instead of a Newton search for ``alpha``.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1:
        raise ValueError("simplex_project expects a vector")
    return simplex_project_columns(f[:, None])[:, 0]


def simplex_project_columns(F):
    """Project every column of ``F`` onto the probability simplex."""
    F = np.asarray(F, dtype=np.float64)
    m = F.shape[0]
    u = -np.sort(-F, axis=0)
    css = np.cumsum(u, axis=0) - 1.0
    ind = np.arange(1, m + 1)[:, None]
    active = u - css / ind > 0
    # number of active coordinates; always >= 1 since the largest entry qualifies
    rho = m - np.argmax(active[::-1], axis=0)
    alpha = -css[rho - 1, np.arange(F.shape[1])] / rho
    return np.maximum(F + alpha, 0.0)


# -- block updates -------------------------------------------------------------

def _per_view(fn, n_views, workers):
    if workers > 1 and n_views > 1:
        with ThreadPoolExecutor(max_workers=min(workers, n_views)) as pool:
            return list(pool.map(fn, range(n_views)))
    return [fn(v) for v in range(n_views)]


def anchor_target(X, Z, obs):
    """``(X * R) Z^T`` computed from the observed columns only."""
    return X[:, obs] @ Z[:, obs].T


def update_anchors(state: ModelState, data: MultiViewDataset, mask: PresenceMask,
                   workers=1):
    """Optimal orthonormal anchors for each view given the graphs."""
    def one(v):
        return polar(anchor_target(data.views[v], state.graphs[v], mask.observed(v)))
    return tuple(_per_view(one, data.n_views, workers))


def consensus_target(state: ModelState):
    """``sum_v P_v Z_v`` (the transpose of Q), summed in view order."""
    B = np.zeros_like(state.consensus)
    for Z, P in zip(state.graphs, state.alignments):
        B += P @ Z
    return B


def update_consensus(state: ModelState):
    """Row-orthonormal F maximising ``Tr(F Q)``, Q = sum_v Z_v^T P_v^T."""
    return polar(consensus_target(state))


def graph_targets(state: ModelState, data: MultiViewDataset, mask: PresenceMask,
                  v: int, lam: float, mu: float):
    """Unconstrained per-column minimisers ``f_j`` for view ``v`` (m x n)."""
    g2 = state.weights[v] ** 2
    r = presence_vector(mask, v)
    denom = g2 * r + lam + mu
    bad = np.flatnonzero(denom <= 0)
    if bad.size:
        raise ConfigError(
            f"degenerate graph update at view {v}, sample {int(bad[0])}: "
            "lambda + mu must be positive when a sample is missing or its view weight is zero"
        )
    obs = mask.observed(v)
    num = lam * (state.alignments[v].T @ state.consensus)
    num[:, obs] += g2 * (state.anchors[v].T @ data.views[v][:, obs])
    return num / denom


def update_graphs(state: ModelState, data: MultiViewDataset, mask: PresenceMask,
                  lam: float, mu: float, workers=1):
    """Column-wise simplex projections of the per-view graph targets."""
    def one(v):
        return simplex_project_columns(graph_targets(state, data, mask, v, lam, mu))
    return tuple(_per_view(one, data.n_views, workers))


def update_alignment(state: ModelState):
    """Orthogonal P_v maximising ``Tr(P_v^T F Z_v^T)`` for every view."""
    F = state.consensus
    return tuple(polar(F @ Z.T) for Z in state.graphs)


def weights_from_residuals(tau):
    inv = 1.0 / (np.asarray(tau, dtype=np.float64) + WEIGHT_EPS)
    return inv / inv.sum()


def update_weights(state: ModelState, data: MultiViewDataset, mask: PresenceMask):
    """View weights proportional to the inverse masked residual."""
    return weights_from_residuals(reconstruction_errors(state, data, mask))


# -- initialisation ------------------------------------------------------------

def fixed_anchors(data: MultiViewDataset, mask: PresenceMask, m: int, seed: int):
    """k-means++ centres of each view's observed samples, orthonormalised by QR."""
    from .embed import kmeans_fit

    out = []
    for v, X in enumerate(data.views):
        pts = X[:, mask.observed(v)].T
        if pts.shape[0] < m:
            raise ConfigError(f"view {v} has {pts.shape[0]} observed samples, fewer than m={m}")
        centers = kmeans_fit(pts, m, seed=seed + v, restarts=1).centers
        Q, R = np.linalg.qr(centers.T)
        s = np.sign(np.diag(R))
        s[s == 0] = 1.0
        out.append(Q * s)
    return tuple(out)


def kmeans_graphs(data: MultiViewDataset, mask: PresenceMask, m: int, seed: int):
    """Hard anchor graphs from per-view k-means; missing columns stay uniform.

    Each view is clustered independently, so anchor ``i`` of one view has no
    reason to match anchor ``i`` of another.
    """
    from .embed import kmeans

    out = []
    for v, X in enumerate(data.views):
        obs = mask.observed(v)
        if obs.size < m:
            raise ConfigError(f"view {v} has {obs.size} observed samples, fewer than m={m}")
        labels = kmeans(X[:, obs].T, m, seed=seed + v, restarts=1)
        Z = np.full((m, data.n), 1.0 / m)
        Z[:, obs] = 0.0
        Z[labels, obs] = 1.0
        out.append(Z)
    return tuple(out)


def initial_state(data: MultiViewDataset, mask: PresenceMask, config: SolverConfig):
    V, n, m = data.n_views, data.n, config.m
    if config.initial_alignments is None:
        P = tuple(np.eye(m) for _ in range(V))
    else:
        P = tuple(np.array(p, dtype=np.float64) for p in config.initial_alignments)
        if len(P) != V or any(p.shape != (m, m) for p in P):
            raise ConfigError("initial_alignments must hold one m x m matrix per view")
    if config.init == "uniform":
        Z = tuple(np.full((m, n), 1.0 / m) for _ in range(V))
    else:
        Z = kmeans_graphs(data, mask, m, config.seed)
    if config.learn_anchors:
        A = tuple(np.zeros((d, m)) for d in data.dims)
    else:
        A = fixed_anchors(data, mask, m, config.seed)
    return ModelState(
        anchors=A,
        graphs=Z,
        alignments=P,
        consensus=np.zeros((m, n)),
        weights=np.full(V, 1.0 / V),
    )


def validate(data: MultiViewDataset, mask: PresenceMask, config: SolverConfig):
    check_compatible(data, mask)
    limit = min(min(data.dims), data.n)
    if config.m > limit:
        raise ConfigError(
            f"m={config.m} exceeds min(min_v d_v, n)={limit}; the anchor SVD is ill-posed"
        )
    if config.k > data.n:
        raise ConfigError(f"k={config.k} exceeds the number of samples {data.n}")
    if config.lam == 0 and config.mu == 0 and not mask.presence.all():
        raise ConfigError("lambda = mu = 0 leaves the graph columns of missing samples undetermined")


# -- driver ----------------------------------------------------------------------

def iterate(state, data, mask, config: SolverConfig):
    """One full outer iteration; returns the new state."""
    w = config.workers
    if config.learn_anchors:
        state = state.with_(anchors=update_anchors(state, data, mask, w))
    state = state.with_(consensus=update_consensus(state))
    state = state.with_(graphs=update_graphs(state, data, mask, config.lam, config.mu, w))
    if config.align_enabled:
        state = state.with_(alignments=update_alignment(state))
    state = state.with_(weights=update_weights(state, data, mask))
    return state


def solve(data: MultiViewDataset, mask: PresenceMask, config: SolverConfig):
    """Run the alternating minimiser.

    Returns
    -------
    state : ModelState
        Final variables.
    trace : list of IterationRecord
        Objective (and its three terms) after every outer iteration.
    """
    validate(data, mask, config)
    state = initial_state(data, mask, config)
    trace = []
    prev = None
    for it in range(1, config.max_iters + 1):
        t0 = time.perf_counter()
        try:
            state = iterate(state, data, mask, config)
            terms = objective_terms(state, data, mask, config.lam, config.mu)
        except (NumericalError, np.linalg.LinAlgError) as exc:
            raise NumericalError(f"iteration {it}: {exc}", iteration=it) from exc
        elapsed = (time.perf_counter() - t0) * 1e3
        obj = terms.total
        trace.append(IterationRecord(it, obj, terms.reconstruction, terms.alignment,
                                     terms.regularization, elapsed))
        if prev is not None and abs(prev - obj) <= config.tol * max(abs(prev), 1e-300):
            break
        prev = obj
    return state, trace
