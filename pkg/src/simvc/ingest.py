"""Loading multi-view data, generating incompleteness masks, synthetic data."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ConfigError, MultiViewDataset, PresenceMask

log = logging.getLogger(__name__)


class DataFormatError(ValueError):
    pass


# -- delimited text ------------------------------------------------------------

def read_matrix(path, delimiter=",") -> np.ndarray:
    """Read a headerless delimited numeric table (rows x columns)."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path}: no such file")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(delimiter)
            row = []
            for col, cell in enumerate(cells, 1):
                try:
                    row.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"{path}: row {lineno}, column {col}: non-numeric cell {cell.strip()!r}"
                    ) from None
            if rows and len(row) != len(rows[0]):
                raise DataFormatError(
                    f"{path}: row {lineno} has {len(row)} columns, expected {len(rows[0])}"
                )
            rows.append(row)
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), -1)
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        r, c = bad[0]
        raise DataFormatError(f"{path}: row {r + 1}, column {c + 1}: non-finite value")
    return arr


def write_matrix(path, a, delimiter=",", fmt="%.17g"):
    np.savetxt(path, np.atleast_2d(a), delimiter=delimiter, fmt=fmt)


def read_labels(path) -> np.ndarray:
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path}: no such file")
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise DataFormatError(f"{path}: line {lineno}: not an integer label {line!r}") from None
    return np.array(out, dtype=np.int64)


def write_labels(path, labels):
    with open(path, "w") as fh:
        fh.writelines(f"{int(x)}\n" for x in labels)


def read_mask(path, delimiter=",") -> PresenceMask:
    """Mask files are n rows x V columns of 0/1."""
    a = read_matrix(path, delimiter)
    if not np.all((a == 0) | (a == 1)):
        r, c = np.argwhere((a != 0) & (a != 1))[0]
        raise DataFormatError(f"{path}: row {r + 1}, column {c + 1}: mask entries must be 0 or 1")
    return PresenceMask(a.T.astype(bool))


def write_mask(path, mask: PresenceMask, delimiter=","):
    np.savetxt(path, mask.presence.T.astype(np.int64), delimiter=delimiter, fmt="%d")


def recode_labels(labels):
    """Map arbitrary integer labels onto 0..k-1 (sorted order of the originals)."""
    values, codes = np.unique(np.asarray(labels), return_inverse=True)
    return codes.astype(np.int64), values


# -- manifests -------------------------------------------------------------------

@dataclass
class DatasetManifest:
    name: str
    n: int
    views: list  # [(path, dim), ...]
    labels_path: Optional[str] = None
    delimiter: str = ","

    def __post_init__(self):
        if not self.views:
            raise ConfigError("manifest lists no views")

    @classmethod
    def from_dict(cls, d, base_dir="."):
        def resolve(p):
            return p if os.path.isabs(p) else os.path.join(base_dir, p)

        try:
            views = [(resolve(v["path"]), int(v["dim"])) for v in d["views"]]
            labels = d.get("labels_path")
            return cls(
                name=str(d["name"]),
                n=int(d["n"]),
                views=views,
                labels_path=resolve(labels) if labels else None,
                delimiter=d.get("delimiter", ","),
            )
        except KeyError as exc:
            raise ConfigError(f"manifest is missing field {exc}") from None

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(d, base_dir=os.path.dirname(os.path.abspath(path)))

    def to_dict(self, relative_to=None):
        def rel(p):
            return os.path.relpath(p, relative_to) if relative_to else p

        d = {"name": self.name, "n": self.n,
             "views": [{"path": rel(p), "dim": dim} for p, dim in self.views]}
        if self.labels_path:
            d["labels_path"] = rel(self.labels_path)
        if self.delimiter != ",":
            d["delimiter"] = self.delimiter
        return d


def load_dataset(manifest: DatasetManifest):
    """Read every view (stored transposed, d_v x n) and optional labels.

    Labels are re-coded to 0..k-1; the original value of code ``c`` is
    ``dataset.label_values[c]``.
    """
    views = []
    for path, dim in manifest.views:
        a = read_matrix(path, manifest.delimiter)
        if a.shape[0] != manifest.n:
            raise DataFormatError(f"{path}: expected {manifest.n} rows, found {a.shape[0]}")
        if a.shape[1] != dim:
            raise DataFormatError(f"{path}: expected {dim} columns, found {a.shape[1]}")
        views.append(a.T)
    labels = None
    values = None
    if manifest.labels_path:
        raw = read_labels(manifest.labels_path)
        if raw.size != manifest.n:
            raise DataFormatError(
                f"{manifest.labels_path}: expected {manifest.n} labels, found {raw.size}"
            )
        labels, values = recode_labels(raw)
        log.info("label codes for %s: %s", manifest.name,
                 {int(c): int(v) for c, v in enumerate(values)})
    data = MultiViewDataset(manifest.name, tuple(views), labels, values)
    return data, labels


# -- incompleteness masks -----------------------------------------------------

def removal_quota(n, n_views, ratio):
    # the epsilon keeps e.g. 0.3 * 100 * 3 from flooring to 89
    return int(math.floor(ratio * n * n_views + 1e-9))


def generate_mask(n, n_views, ratio, seed) -> PresenceMask:
    """Drop ``floor(ratio * n * V)`` (view, sample) cells, keeping every sample somewhere.

    Cells are visited in a seeded random order and removed greedily; a cell
    is skipped when it holds the last remaining view of its sample or the
    last remaining sample of its view.
    """
    if n < 1 or n_views < 1:
        raise ConfigError("n and V must be positive")
    max_ratio = (n_views - 1) / n_views
    if not 0 <= ratio <= max_ratio + 1e-12:
        raise ConfigError(f"missing ratio {ratio} outside [0, {max_ratio:.4g}] for V={n_views}")
    quota = removal_quota(n, n_views, ratio)
    presence = np.ones((n_views, n), dtype=bool)
    if quota == 0:
        return PresenceMask(presence)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n * n_views)
    left_in_sample = np.full(n, n_views)
    left_in_view = np.full(n_views, n)
    removed = 0
    for cell in order:
        v, j = divmod(int(cell), n)
        if left_in_sample[j] > 1 and left_in_view[v] > 1:
            presence[v, j] = False
            left_in_sample[j] -= 1
            left_in_view[v] -= 1
            removed += 1
            if removed == quota:
                break
    if removed < quota:
        raise ConfigError(f"could only remove {removed} of {quota} cells")
    return PresenceMask(presence)


def mask_stats(mask: PresenceMask) -> dict:
    return {
        "ratio": float(mask.missing_ratio()),
        "observed_per_view": [int(c) for c in mask.presence.sum(axis=1)],
        "n": mask.n,
        "views": mask.n_views,
    }


# -- synthetic data -----------------------------------------------------------------

@dataclass
class SynthSpec:
    n: int
    k: int
    V: int
    dims: list
    cluster_separation: float = 8.0
    noise_std: float = 1.0
    anchor_permutations: Optional[list] = None  # per view, cluster -> mean index
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if len(self.dims) != self.V:
            raise ConfigError(f"dims has {len(self.dims)} entries for V={self.V}")
        if not self.cluster_separation > 0:
            raise ConfigError("cluster_separation must be positive")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        if self.n < self.k:
            raise ConfigError("n must be >= k")
        if self.anchor_permutations is not None:
            if len(self.anchor_permutations) != self.V:
                raise ConfigError("need one permutation per view")
            for p in self.anchor_permutations:
                if sorted(p) != list(range(self.k)):
                    raise ConfigError(f"{p} is not a permutation of 0..{self.k - 1}")

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth fields: {sorted(unknown)}")
        return cls(**d)


def cluster_means(rng, d, k, distance):
    """k means in R^d with all pairwise distances >= ``distance``.

    With d >= k the means are scaled coordinate axes (a regular simplex of
    edge ``distance``); otherwise random points rescaled to meet the bound.
    """
    if d >= k:
        means = np.zeros((d, k))
        means[np.arange(k), np.arange(k)] = distance / math.sqrt(2.0)
        return means
    pts = rng.standard_normal((d, k))
    diffs = pts[:, :, None] - pts[:, None, :]
    dist = np.sqrt((diffs ** 2).sum(0))[np.triu_indices(k, 1)]
    if dist.min() <= 1e-12:
        raise ConfigError(f"could not place {k} separated means in {d} dimension(s)")
    return pts * (distance / dist.min())


def synth_dataset(spec: SynthSpec):
    """Gaussian blobs per view sharing one latent cluster assignment.

    Returns the dataset (labels attached) and the latent labels.
    """
    rng = np.random.default_rng(spec.seed)
    labels = np.arange(spec.n) % spec.k
    rng.shuffle(labels)
    distance = spec.cluster_separation * (spec.noise_std if spec.noise_std > 0 else 1.0)
    views = []
    for v, d in enumerate(spec.dims):
        means = cluster_means(rng, d, spec.k, distance)
        if spec.anchor_permutations is not None:
            means = means[:, np.asarray(spec.anchor_permutations[v])]
        noise = rng.standard_normal((d, spec.n)) * spec.noise_std
        views.append(means[:, labels] + noise)
    data = MultiViewDataset(spec.name, tuple(views), labels)
    return data, labels


def write_dataset(data: MultiViewDataset, out_dir, labels=None, delimiter=","):
    """Write views/labels as delimited text plus a ``manifest.json``; returns its path."""
    os.makedirs(out_dir, exist_ok=True)
    views = []
    for v, X in enumerate(data.views):
        fname = f"view{v}.csv"
        write_matrix(os.path.join(out_dir, fname), X.T, delimiter)
        views.append({"path": fname, "dim": X.shape[0]})
    manifest = {"name": data.name, "n": data.n, "views": views}
    labels = data.labels if labels is None else labels
    if labels is not None:
        write_labels(os.path.join(out_dir, "labels.txt"), labels)
        manifest["labels_path"] = "labels.txt"
    if delimiter != ",":
        manifest["delimiter"] = delimiter
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
