import numpy as np
import pytest

from simvc.core import (
    ConfigError,
    InvariantError,
    ModelState,
    MultiViewDataset,
    PresenceMask,
    ShapeError,
    SolverConfig,
    check_state,
    index_matrix,
    objective,
    objective_terms,
    presence_vector,
    state_violations,
)
from simvc.ingest import generate_mask

from helpers import random_instance, random_state
from oracles import explicit_objective


def test_presence_vector_complete():
    mask = PresenceMask.complete(2, 3)
    np.testing.assert_array_equal(presence_vector(mask, 0), [1, 1, 1])


def test_presence_vector_is_row():
    mask = PresenceMask(np.array([[1, 0, 1], [1, 1, 0]]))
    np.testing.assert_array_equal(presence_vector(mask, 0), [1, 0, 1])


def test_presence_vector_matches_index_matrix_diagonal():
    mask = generate_mask(4, 2, 0.25, seed=7)
    assert (~mask.presence).sum() == 2
    assert mask.presence.any(axis=0).all()
    for v in range(2):
        H = index_matrix(mask, v)
        np.testing.assert_array_equal(np.diag(H @ H.T), presence_vector(mask, v))


def test_presence_vector_out_of_range():
    with pytest.raises(IndexError):
        presence_vector(PresenceMask.complete(2, 3), 2)


@pytest.mark.parametrize("rows", [[[1, 0], [1, 0]], [[0, 0], [1, 1]]])
def test_mask_invariants_rejected(rows):
    with pytest.raises(InvariantError):
        PresenceMask(np.array(rows))


def test_dataset_rejects_nonfinite_and_ragged():
    with pytest.raises(ValueError):
        MultiViewDataset("x", (np.array([[1.0, np.nan]]),))
    with pytest.raises(ShapeError):
        MultiViewDataset("x", (np.ones((2, 3)), np.ones((2, 4))))
    with pytest.raises(ShapeError):
        MultiViewDataset("x", ())


def test_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(m=2, k=3)
    with pytest.raises(ConfigError):
        SolverConfig(m=3, k=1)
    with pytest.raises(ConfigError):
        SolverConfig(m=3, k=2, tol=0)
    with pytest.raises(ConfigError):
        SolverConfig(m=3, k=2, max_iters=0)


def test_objective_reconstruction_fit_is_zero(rng):
    m, n = 3, 6
    A = np.linalg.qr(rng.standard_normal((5, m)))[0]
    Z = rng.dirichlet(np.ones(m), size=n).T
    F = np.linalg.qr(rng.standard_normal((n, m)))[0].T
    state = ModelState([A], [Z], [np.eye(m)], F, [1.0])
    data = MultiViewDataset("fit", (A @ Z,))
    mask = PresenceMask.complete(1, n)
    terms = objective_terms(state, data, mask, lam=0.0, mu=0.0)
    assert terms.total == pytest.approx(0.0, abs=1e-20)


def test_objective_all_terms_vanish():
    # Z row-orthonormal *and* column-stochastic: disjoint one-hot rows with unit norm.
    Z = np.array([[1.0, 0.0], [0.0, 1.0]])
    A = np.eye(3)[:, :2]
    state = ModelState([A], [Z], [np.eye(2)], Z.copy(), [1.0])
    data = MultiViewDataset("fit", (A @ Z,))
    assert objective(state, data, PresenceMask.complete(1, 2), 1.0, 0.0) == 0.0


def test_objective_ignores_missing_column(rng):
    data, mask, state = random_instance(rng, V=2, n=6, m=2, ratio=0.0)
    presence = np.ones((2, 6), dtype=bool)
    presence[0, 3] = False
    mask = PresenceMask(presence)
    got = objective(state, data, mask, 0.0, 0.0)
    # dense residual with column 3 of view 0 zeroed
    want = 0.0
    for v in range(2):
        R = data.views[v] - state.anchors[v] @ state.graphs[v]
        if v == 0:
            R[:, 3] = 0.0
        want += state.weights[v] ** 2 * (R ** 2).sum()
    assert got == pytest.approx(want, rel=1e-12)


def test_objective_matches_explicit_index_matrices():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        data, mask, state = random_instance(rng, V=2, n=5, m=2)
        for v in range(2):
            assert data.dims[v] >= 2
        lam, mu = rng.uniform(0, 2, size=2)
        assert objective(state, data, mask, lam, mu) == pytest.approx(
            explicit_objective(state, data, mask, lam, mu), rel=1e-10)


def test_objective_equals_column_deleted_evaluation(rng):
    data, mask, state = random_instance(rng, V=3, n=15, m=3, ratio=0.4)
    got = objective_terms(state, data, mask, 0.0, 0.0).reconstruction
    want = 0.0
    for v in range(3):
        obs = mask.observed(v)
        R = data.views[v][:, obs] - state.anchors[v] @ state.graphs[v][:, obs]
        want += state.weights[v] ** 2 * (R ** 2).sum()
    assert got == pytest.approx(want, rel=1e-10)


def test_objective_nonnegative(rng):
    for _ in range(30):
        data, mask, state = random_instance(rng)
        assert objective(state, data, mask, *rng.uniform(0, 3, size=2)) >= 0


def test_objective_shape_mismatch(rng):
    data, mask, state = random_instance(rng, V=2, n=6, m=2)
    with pytest.raises(ShapeError):
        objective(state, data, PresenceMask.complete(2, 7), 1.0, 1.0)


def test_constraint_checkers_flag_each_invariant(rng):
    state = random_state(rng, [4, 5], 6, 3)
    assert state_violations(state) == []
    check_state(state)
    bad = [
        state.with_(anchors=(state.anchors[0] * 1.1, state.anchors[1])),
        state.with_(alignments=(state.alignments[0] + 1e-6, state.alignments[1])),
        state.with_(consensus=state.consensus * 2),
        state.with_(graphs=(state.graphs[0] - 0.01, state.graphs[1])),
        state.with_(graphs=(state.graphs[0] * 1.01, state.graphs[1])),
        state.with_(weights=np.array([0.7, 0.4])),
        state.with_(weights=np.array([1.1, -0.1])),
    ]
    for s in bad:
        assert state_violations(s)
        with pytest.raises(InvariantError):
            check_state(s)
