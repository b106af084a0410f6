"""Dataset loading, synthetic generators and feature-tree files."""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import ParameterError, ParseError
from .fused import FeatureTree
from .losses import DesignMatrix


@dataclass
class Dataset:
    """A design matrix with labels and a record of where it came from."""

    X: DesignMatrix
    y: np.ndarray
    feature_names: list[str] | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.X, DesignMatrix):
            self.X = DesignMatrix(self.X)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64).ravel()
        if self.y.shape[0] != self.X.n:
            raise ParameterError(f"X has {self.X.n} rows but y has {self.y.shape[0]} labels")
        if not np.all(np.isfinite(self.y)):
            raise ParameterError("labels contain NaN or Inf")

    @property
    def n(self) -> int:
        return self.X.n

    @property
    def p(self) -> int:
        return self.X.p

    def __eq__(self, other):
        return (isinstance(other, Dataset) and self.X.shape == other.X.shape
                and np.array_equal(self.X.data, other.X.data) and np.array_equal(self.y, other.y))


def binary_labels(y, threshold: float | None = None) -> np.ndarray:
    """Map labels to {-1, +1}.

    With ``threshold`` every label above it becomes +1 and the rest -1.
    Otherwise the labels must take exactly two values; the smaller maps
    to -1.
    """
    y = np.asarray(y, dtype=float)
    if threshold is not None:
        return np.where(y > threshold, 1.0, -1.0)
    values = np.unique(y)
    if values.size != 2:
        raise ParameterError(f"expected two distinct labels, found {values.size}")
    return np.where(y == values[1], 1.0, -1.0)


def normalize_columns(X) -> tuple[np.ndarray, np.ndarray]:
    """Scale every nonzero column to unit Euclidean norm; returns ``(X, norms)``."""
    data = np.array(X.data if isinstance(X, DesignMatrix) else X, dtype=float, order="F")
    norms = np.linalg.norm(data, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    return data / scale, norms


def read_libsvm(path, relabel_gt4: bool = False, n_features: int | None = None,
                normalize: bool = False) -> Dataset:
    """Parse a LibSVM text file ``label idx:val ...`` with 1-based indices.

    Parameters
    ----------
    relabel_gt4 : bool
        Map labels greater than 4 to +1 and the rest to -1 (a common way to
        turn a digit data set into a binary task).
    n_features : int, optional
        Column count; defaults to the largest index seen.
    normalize : bool
        Scale columns to unit norm; recorded in the provenance.

    Raises
    ------
    ParseError
        For a malformed line, naming the line number.
    """
    rows, cols, vals, labels = [], [], [], []
    max_idx = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
            if not np.isfinite(label):
                raise ParseError(f"non-finite label {tokens[0]!r}", lineno)
            entries = {}
            dup = False
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"expected idx:val, got {tok!r}", lineno)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"bad entry {tok!r}", lineno) from None
                if idx < 1:
                    raise ParseError(f"feature index {idx} is not 1-based", lineno)
                if not np.isfinite(val):
                    raise ParseError(f"non-finite value in {tok!r}", lineno)
                dup |= idx in entries
                entries[idx] = val
            if dup:
                warnings.warn(f"line {lineno}: duplicate feature index, keeping the last value",
                              stacklevel=2)
            r = len(labels)
            labels.append(label)
            for idx, val in entries.items():
                rows.append(r)
                cols.append(idx - 1)
                vals.append(val)
                max_idx = max(max_idx, idx)
    p = max_idx if n_features is None else int(n_features)
    if p < max_idx:
        raise ParameterError(f"n_features={p} but the file uses index {max_idx}")
    X = sp.coo_matrix((vals, (rows, cols)), shape=(len(labels), p)).toarray()
    y = np.asarray(labels, dtype=float)
    if relabel_gt4:
        y = binary_labels(y, threshold=4.0)
    if normalize:
        X, _ = normalize_columns(X)
    prov = {"source": "libsvm", "path": os.fspath(path), "relabel_gt4": relabel_gt4,
            "normalized": normalize}
    return Dataset(X, y, provenance=prov)


def write_libsvm(path, dataset: Dataset):
    """Write ``dataset`` in LibSVM format; only nonzero entries are stored."""
    data = dataset.X.data
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(dataset.n):
            nz = np.flatnonzero(data[i])
            parts = [repr(float(dataset.y[i]))]
            parts += [f"{j + 1}:{float(data[i, j])!r}" for j in nz]
            fh.write(" ".join(parts) + "\n")


def _support(rng, p, active_fraction, dead_zone):
    if not 0.0 <= active_fraction <= 1.0:
        raise ParameterError(f"active_fraction must be in [0, 1], got {active_fraction!r}")
    if not 0.0 <= dead_zone < 1.0:
        raise ParameterError(f"dead_zone must be in [0, 1), got {dead_zone!r}")
    k = int(round(active_fraction * p))
    beta = np.zeros(p)
    idx = np.sort(rng.choice(p, size=k, replace=False)) if k else np.zeros(0, dtype=int)
    mags = rng.uniform(dead_zone, 1.0, size=k)
    signs = rng.choice([-1.0, 1.0], size=k)
    beta[idx] = mags * signs
    return beta


def _design(rng, n, p, design):
    if design == "uniform":
        return rng.uniform(-10.0, 10.0, size=(n, p))
    if design == "gaussian":
        return rng.standard_normal(size=(n, p))
    raise ParameterError(f"design must be 'uniform' or 'gaussian', got {design!r}")


def gen_synthetic_regression(n: int, p: int, active_fraction: float = 0.2, seed: int = 0,
                             design: str = "uniform", noise_std: float = 1.0,
                             dead_zone: float = 0.1, normalize: bool = False):
    """Sparse linear model ``y = X beta + noise``.

    ``X`` is uniform on [-10, 10] (or standard normal with
    ``design="gaussian"``); ``round(active_fraction * p)`` coefficients are
    nonzero with magnitude uniform on ``[dead_zone, 1]`` and random sign;
    the noise is ``N(0, noise_std^2)``.

    Returns
    -------
    dataset : Dataset
    beta_true : ndarray of shape (p,)
    """
    if n < 0 or p < 1:
        raise ParameterError(f"need n >= 0 and p >= 1, got n={n}, p={p}")
    rng = np.random.default_rng(seed)
    X = _design(rng, n, p, design)
    beta = _support(rng, p, active_fraction, dead_zone)
    y = X @ beta + noise_std * rng.standard_normal(n)
    if normalize:
        X, _ = normalize_columns(X)
    prov = {"source": "synthetic_regression", "n": n, "p": p, "active_fraction": active_fraction,
            "seed": seed, "design": design, "noise_std": noise_std, "dead_zone": dead_zone,
            "normalized": normalize}
    return Dataset(X, y, provenance=prov), beta


def gen_synthetic_classification(n: int, p: int, active_fraction: float = 0.2, seed: int = 0,
                                 design: str = "gaussian", noise_std: float = 1.0,
                                 dead_zone: float = 0.1, normalize: bool = False):
    """Labels ``sign(X beta + noise)`` in {-1, +1} from the same sparse model."""
    ds, beta = gen_synthetic_regression(n, p, active_fraction, seed, design, noise_std,
                                        dead_zone, normalize=False)
    y = np.where(ds.y > 0, 1.0, -1.0)
    X = ds.X.data
    if normalize:
        X, _ = normalize_columns(X)
    prov = dict(ds.provenance, source="synthetic_classification", normalized=normalize)
    return Dataset(X, y, provenance=prov), beta


def read_edge_list(path, p: int) -> FeatureTree:
    """Read a tree from ``a,b`` lines with 1-based node indices.

    A ``# root=<k>`` comment line (1-based) selects the root.
    """
    edges = []
    root = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "root":
                    try:
                        root = int(value) - 1
                    except ValueError:
                        raise ParseError(f"bad root {value.strip()!r}", lineno) from None
                continue
            if not line:
                continue
            parts = [s.strip() for s in line.split(",")]
            if len(parts) != 2:
                raise ParseError(f"expected 'a,b', got {line!r}", lineno)
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer node in {line!r}", lineno) from None
            edges.append((a - 1, b - 1))
    return FeatureTree(p, edges, root=root)


def write_edge_list(path, tree: FeatureTree):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# root={tree.root + 1}\n")
        for a, b in tree.edges:
            fh.write(f"{a + 1},{b + 1}\n")


def gen_chain_tree(p: int) -> FeatureTree:
    """Chain ``1-2-...-p`` (zero-based edges ``(i, i + 1)``)."""
    return FeatureTree(p, [(i, i + 1) for i in range(p - 1)])


def gen_random_tree(p: int, seed: int = 0) -> FeatureTree:
    """Random recursive tree with shuffled labels and edge orientations."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(p)
    edges = []
    for i in range(1, p):
        j = int(rng.integers(0, i))
        a, b = int(perm[i]), int(perm[j])
        edges.append((a, b) if rng.random() < 0.5 else (b, a))
    order = rng.permutation(len(edges))
    return FeatureTree(p, [edges[k] for k in order])
