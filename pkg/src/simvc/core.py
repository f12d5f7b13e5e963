"""Domain types, constraint checks and the clustering objective.

Conventions
-----------
Every view matrix is stored ``d_v x n`` (one column per sample).  Anchor
graphs ``Z_v`` and the consensus ``F`` span all ``n`` columns, including
samples a view does not observe; the alignment term is what fills those in.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

ORTHO_TOL = 1e-8
STOCHASTIC_TOL = 1e-9
NONNEG_TOL = 1e-12
WEIGHT_TOL = 1e-12


class ShapeError(ValueError):
    pass


class InvariantError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class NumericalError(ArithmeticError):
    """Raised when a non-finite quantity shows up during optimisation."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


def as_matrix(a, name="matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array, rejecting NaN/Inf."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class MultiViewDataset:
    name: str
    views: tuple
    labels: Optional[np.ndarray] = None
    # original label values, indexed by the contiguous codes in ``labels``
    label_values: Optional[np.ndarray] = None

    def __post_init__(self):
        views = tuple(as_matrix(x, f"view {v}") for v, x in enumerate(self.views))
        if not views:
            raise ShapeError("dataset needs at least one view")
        n = views[0].shape[1]
        for v, x in enumerate(views):
            if x.shape[0] < 1:
                raise ShapeError(f"view {v} has zero features")
            if x.shape[1] != n:
                raise ShapeError(f"view {v} has {x.shape[1]} columns, expected {n}")
        object.__setattr__(self, "views", views)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise ShapeError(f"labels have shape {labels.shape}, expected ({n},)")
            if labels.size and labels.min() < 0:
                raise ValueError("labels must be non-negative")
            object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def n(self) -> int:
        return self.views[0].shape[1]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list:
        return [x.shape[0] for x in self.views]


@dataclass(frozen=True)
class PresenceMask:
    """``presence[v, j]`` is True iff sample ``j`` is observed in view ``v``."""

    presence: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.presence)
        if p.ndim != 2:
            raise ShapeError(f"presence must be V x n, got shape {p.shape}")
        if not np.all((p == 0) | (p == 1)):
            raise ValueError("presence must be binary")
        p = p.astype(bool)
        empty_cols = np.flatnonzero(~p.any(axis=0))
        if empty_cols.size:
            raise InvariantError(f"samples {empty_cols[:5].tolist()} are observed in no view")
        empty_rows = np.flatnonzero(~p.any(axis=1))
        if empty_rows.size:
            raise InvariantError(f"views {empty_rows.tolist()} observe no samples")
        p.setflags(write=False)
        object.__setattr__(self, "presence", p)

    @classmethod
    def complete(cls, n_views, n):
        return cls(np.ones((n_views, n), dtype=bool))

    @property
    def n_views(self) -> int:
        return self.presence.shape[0]

    @property
    def n(self) -> int:
        return self.presence.shape[1]

    def observed(self, v) -> np.ndarray:
        """Column indices observed in view ``v``."""
        return np.flatnonzero(presence_vector(self, v))

    def missing_ratio(self) -> float:
        return 1.0 - self.presence.sum() / self.presence.size


def presence_vector(mask: PresenceMask, v: int) -> np.ndarray:
    """The 0/1 presence row ``r^(v)`` of view ``v`` as float64.

    Equals the diagonal of ``H_v H_v^T`` for the one-hot index matrix
    ``H_v`` that selects the observed columns of view ``v``.
    """
    if not 0 <= v < mask.n_views:
        raise IndexError(f"view index {v} out of range for {mask.n_views} views")
    return mask.presence[v].astype(np.float64)


def index_matrix(mask: PresenceMask, v: int) -> np.ndarray:
    """Explicit ``n x n_v`` selection matrix ``H_v``. Only meant for small checks."""
    obs = mask.observed(v)
    H = np.zeros((mask.n, obs.size))
    H[obs, np.arange(obs.size)] = 1.0
    return H


def check_compatible(data: MultiViewDataset, mask: PresenceMask):
    if mask.n_views != data.n_views or mask.n != data.n:
        raise ShapeError(
            f"mask is {mask.n_views} x {mask.n} but dataset has "
            f"{data.n_views} views and {data.n} samples"
        )


@dataclass(frozen=True)
class SolverConfig:
    m: int
    k: int
    lam: float = 1.0
    mu: float = 1e-2
    max_iters: int = 50
    tol: float = 1e-6
    seed: int = 0
    align_enabled: bool = True
    learn_anchors: bool = True
    kmeans_restarts: int = 10
    # Alignment matrices used at start-up (and kept frozen when
    # align_enabled is False); None means identity.
    initial_alignments: Optional[Sequence[np.ndarray]] = None
    # "kmeans": graphs start as per-view k-means assignments; "uniform": 1/m
    init: str = "uniform"
    normalize_embedding: bool = False
    workers: int = 1
    ortho_tol: float = ORTHO_TOL
    stochastic_tol: float = STOCHASTIC_TOL

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if self.m < self.k:
            raise ConfigError(f"anchor count m={self.m} must be >= k={self.k}")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.lam < 0 or self.mu < 0:
            raise ConfigError("lambda and mu must be non-negative")
        if self.kmeans_restarts < 1:
            raise ConfigError("kmeans_restarts must be >= 1")
        if self.init not in ("kmeans", "uniform"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ModelState:
    anchors: tuple
    graphs: tuple
    alignments: tuple
    consensus: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        for name in ("anchors", "graphs", "alignments"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))

    @property
    def m(self) -> int:
        return self.consensus.shape[0]

    def with_(self, **changes) -> "ModelState":
        return replace(self, **changes)


# -- constraint checkers ---------------------------------------------------
# Each returns the worst violation so tests can compare against a tolerance.

def orthonormality_error(A: np.ndarray) -> float:
    """max |A^T A - I| over entries (column orthonormality)."""
    return float(np.abs(A.T @ A - np.eye(A.shape[1])).max())


def anchors_error(state: ModelState) -> float:
    return max(orthonormality_error(A) for A in state.anchors)


def alignments_error(state: ModelState) -> float:
    return max(orthonormality_error(P) for P in state.alignments)


def consensus_error(state: ModelState) -> float:
    return orthonormality_error(state.consensus.T)


def graphs_negativity(state: ModelState) -> float:
    """Most negative entry of any anchor graph, reported as a positive number."""
    return float(max(0.0, -min(Z.min() for Z in state.graphs)))


def graphs_stochastic_error(state: ModelState) -> float:
    return float(max(np.abs(Z.sum(axis=0) - 1.0).max() for Z in state.graphs))


def weights_error(state: ModelState) -> float:
    g = state.weights
    return float(max(abs(g.sum() - 1.0), max(0.0, -g.min())))


def state_violations(state: ModelState, ortho_tol=ORTHO_TOL,
                     stochastic_tol=STOCHASTIC_TOL) -> list:
    """Human readable list of violated invariants (empty when feasible)."""
    out = []
    checks = [
        ("anchors not orthonormal", anchors_error(state), ortho_tol),
        ("alignments not orthogonal", alignments_error(state), ortho_tol),
        ("consensus rows not orthonormal", consensus_error(state), ortho_tol),
        ("negative graph entries", graphs_negativity(state), NONNEG_TOL),
        ("graph columns do not sum to one", graphs_stochastic_error(state), stochastic_tol),
        ("weights off the simplex", weights_error(state), WEIGHT_TOL),
    ]
    for what, err, tol in checks:
        if not err <= tol:
            out.append(f"{what}: {err:.3e} > {tol:.0e}")
    return out


def check_state(state: ModelState, ortho_tol=ORTHO_TOL, stochastic_tol=STOCHASTIC_TOL):
    problems = state_violations(state, ortho_tol, stochastic_tol)
    if problems:
        raise InvariantError("; ".join(problems))


def check_shapes(state: ModelState, data: MultiViewDataset):
    V, n, m = data.n_views, data.n, state.m
    if not (len(state.anchors) == len(state.graphs) == len(state.alignments) == V):
        raise ShapeError("state does not have one block per view")
    if state.consensus.shape != (m, n):
        raise ShapeError(f"consensus has shape {state.consensus.shape}, expected {(m, n)}")
    if state.weights.shape != (V,):
        raise ShapeError(f"weights have shape {state.weights.shape}, expected ({V},)")
    for v, (A, Z, P, d) in enumerate(zip(state.anchors, state.graphs, state.alignments, data.dims)):
        if A.shape != (d, m) or Z.shape != (m, n) or P.shape != (m, m):
            raise ShapeError(
                f"view {v}: anchors {A.shape}, graph {Z.shape}, alignment {P.shape} "
                f"inconsistent with d={d}, m={m}, n={n}"
            )


# -- objective -------------------------------------------------------------

@dataclass(frozen=True)
class ObjectiveTerms:
    reconstruction: float
    alignment: float
    regularization: float

    @property
    def total(self) -> float:
        return self.reconstruction + self.alignment + self.regularization


def reconstruction_errors(state: ModelState, data: MultiViewDataset,
                          mask: PresenceMask) -> np.ndarray:
    """Per-view masked residuals ``||(X_v - A_v Z_v) * R_v||_F^2``."""
    tau = np.empty(data.n_views)
    for v, (X, A, Z) in enumerate(zip(data.views, state.anchors, state.graphs)):
        obs = mask.observed(v)
        resid = X[:, obs] - A @ Z[:, obs]
        tau[v] = np.einsum("ij,ij->", resid, resid)
    return tau


def objective_terms(state: ModelState, data: MultiViewDataset, mask: PresenceMask,
                    lam: float, mu: float) -> ObjectiveTerms:
    check_compatible(data, mask)
    check_shapes(state, data)
    tau = reconstruction_errors(state, data, mask)
    recon = float(np.sum(state.weights ** 2 * tau))
    align = 0.0
    reg = 0.0
    F = state.consensus
    for Z, P in zip(state.graphs, state.alignments):
        D = P @ Z - F
        align += float(np.einsum("ij,ij->", D, D))
        reg += float(np.einsum("ij,ij->", Z, Z))
    terms = ObjectiveTerms(recon, lam * align, mu * reg)
    if not np.isfinite(terms.total):
        raise NumericalError("objective is not finite")
    return terms


def objective(state: ModelState, data: MultiViewDataset, mask: PresenceMask,
              lam: float, mu: float) -> float:
    """Weighted masked reconstruction + lam * alignment + mu * graph energy."""
    return objective_terms(state, data, mask, lam, mu).total
