import numpy as np

from simvc.core import ModelState, MultiViewDataset
from simvc.ingest import generate_mask
from simvc.solver import (
    polar,
    update_alignment,
    update_anchors,
    update_consensus,
    update_graphs,
    update_weights,
)

# filled by test_acceptance, printed in the terminal summary
ACCEPTANCE_LINES = []


def random_state(rng, dims, n, m):
    anchors = [np.linalg.qr(rng.standard_normal((d, m)))[0] for d in dims]
    graphs = [rng.dirichlet(np.ones(m), size=n).T for _ in dims]
    aligns = [np.linalg.qr(rng.standard_normal((m, m)))[0] for _ in dims]
    F = polar(rng.standard_normal((m, n)))
    weights = rng.dirichlet(np.ones(len(dims)))
    return ModelState(anchors, graphs, aligns, F, weights)


def random_instance(rng, V=None, n=None, m=None, ratio=None):
    """Small random problem: dataset, mask and a feasible state."""
    V = V or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 5))
    n = n or int(rng.integers(max(m, 3), 21))
    dims = [int(rng.integers(m, m + 6)) for _ in range(V)]
    data = MultiViewDataset("rand", tuple(rng.standard_normal((d, n)) for d in dims))
    if ratio is None:
        ratio = float(rng.uniform(0, (V - 1) / V)) if V > 1 else 0.0
    mask = generate_mask(n, V, ratio, int(rng.integers(1 << 30)))
    return data, mask, random_state(rng, dims, n, m)


# each block update as (state, data, mask, lam, mu) -> state
BLOCKS = {
    "anchors": lambda s, d, mk, lam, mu: s.with_(anchors=update_anchors(s, d, mk)),
    "consensus": lambda s, d, mk, lam, mu: s.with_(consensus=update_consensus(s)),
    "graphs": lambda s, d, mk, lam, mu: s.with_(graphs=update_graphs(s, d, mk, lam, mu)),
    "alignment": lambda s, d, mk, lam, mu: s.with_(alignments=update_alignment(s)),
    "weights": lambda s, d, mk, lam, mu: s.with_(weights=update_weights(s, d, mk)),
}
