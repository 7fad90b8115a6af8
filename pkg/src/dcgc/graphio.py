"""Graph data model, text-file loaders, Laplacian and homophily helpers,
and a seeded stochastic-block-model generator for desk-scale experiments.

File formats:
  edges: one edge per line, two whitespace-separated 0-based node ids,
         '#' lines ignored; undirected, deduplicated, self-loops dropped
  attributes: CSV, one node per row
  labels: one integer per line
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DataError


@dataclass(frozen=True, eq=False)
class Graph:
    """Attributed graph with optional ground-truth labels.

    adjacency is binary, symmetric, zero-diagonal CSR. Treat instances as
    immutable; every constructor in this module validates before returning.
    """

    n_nodes: int
    attributes: np.ndarray          # [N, D] float64
    adjacency: sp.csr_matrix        # [N, N]
    labels: np.ndarray | None = None  # [N] int64 in [0, C)

    @property
    def n_edges(self) -> int:
        """Undirected edge count."""
        return int(self.adjacency.nnz // 2)


def validate_graph(g: Graph) -> None:
    """Raise ValueError on any violated Graph invariant."""
    n = g.n_nodes
    if g.attributes.ndim != 2 or g.attributes.shape[0] != n:
        raise ValueError(
            f"attributes must be 2-D with {n} rows, got shape {g.attributes.shape}"
        )
    if not np.all(np.isfinite(g.attributes)):
        raise ValueError("attributes contain non-finite entries")
    a = g.adjacency
    if a.shape != (n, n):
        raise ValueError(f"adjacency must be {n}x{n}, got {a.shape}")
    if a.nnz:
        if a.diagonal().any():
            raise ValueError("adjacency has nonzero diagonal entries")
        if not np.all(np.isin(a.data, (0.0, 1.0))):
            raise ValueError("adjacency values must be 0 or 1")
        if (a != a.T).nnz != 0:
            raise ValueError("adjacency is not symmetric")
    if g.labels is not None:
        if g.labels.shape != (n,):
            raise ValueError(f"labels must have length {n}, got {g.labels.shape}")
        if g.labels.min(initial=0) < 0:
            raise ValueError("labels must be nonnegative")


def _adjacency_from_pairs(pairs, n: int) -> sp.csr_matrix:
    """Symmetric binary CSR from undirected (i, j) pairs; dedup, no loops."""
    if len(pairs):
        arr = np.asarray(pairs, dtype=np.int64)
        rows = np.concatenate([arr[:, 0], arr[:, 1]])
        cols = np.concatenate([arr[:, 1], arr[:, 0]])
        data = np.ones(rows.size, dtype=np.float64)
        a = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
        a.data[:] = 1.0  # collapse duplicates counted by coo summation
    else:
        a = sp.csr_matrix((n, n), dtype=np.float64)
    return a


def load_graph(attr_path, edge_path, label_path=None) -> Graph:
    """Load a Graph from attribute/edge(/label) text files.

    An edge listed once induces both directions; self-loops are dropped;
    duplicates collapse. Parse problems raise DataError naming file:line.
    """
    attrs = _load_attributes(attr_path)
    n = attrs.shape[0]
    pairs = _load_edges(edge_path, n)
    labels = _load_labels(label_path, n) if label_path is not None else None
    g = Graph(n_nodes=n, attributes=attrs,
              adjacency=_adjacency_from_pairs(pairs, n), labels=labels)
    validate_graph(g)
    return g


def _load_attributes(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            try:
                row = [float(c) for c in cells]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric attribute value")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(
                    f"{path}:{lineno}: expected {width} columns, got {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no attribute rows")
    return np.array(rows, dtype=np.float64)


def _load_edges(path, n: int):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected two node ids")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer node id")
            if not (0 <= i < n and 0 <= j < n):
                raise DataError(
                    f"{path}:{lineno}: node id out of range for {n} nodes"
                )
            if i == j:
                continue  # self-loops are dropped; Laplacian re-adds exactly one
            pairs.append((i, j))
    return pairs


def _load_labels(path, n: int) -> np.ndarray:
    vals = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(int(line))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer label")
            if vals[-1] < 0:
                raise DataError(f"{path}:{lineno}: negative label")
    if len(vals) != n:
        raise DataError(f"{path}: expected {n} labels, got {len(vals)}")
    return np.array(vals, dtype=np.int64)


def normalized_laplacian(g: Graph) -> sp.csr_matrix:
    """Symmetric normalized Laplacian with one self-loop added per node.

    Returns I - D^{-1/2} (A + I) D^{-1/2}; eigenvalues lie in [0, 2] and
    the added self-loops keep every degree positive.
    """
    n = g.n_nodes
    a_hat = (g.adjacency + sp.identity(n, format="csr")).tocsr()
    deg = np.asarray(a_hat.sum(axis=1)).ravel()
    d_inv_sqrt = sp.diags(1.0 / np.sqrt(deg))
    return (sp.identity(n) - d_inv_sqrt @ a_hat @ d_inv_sqrt).tocsr()


def homophily_ratio(g: Graph, labels=None):
    """Fraction of undirected edges whose endpoints share a label.

    Uses g.labels when none are passed. Returns None for an edgeless graph
    (the ratio is 0/0 there).
    """
    if labels is None:
        labels = g.labels
    if labels is None:
        raise ValueError("homophily_ratio needs labels")
    labels = np.asarray(labels)
    if labels.shape != (g.n_nodes,):
        raise ValueError("labels must cover every node")
    upper = sp.triu(g.adjacency, k=1).tocoo()
    if upper.nnz == 0:
        return None
    same = labels[upper.row] == labels[upper.col]
    return float(np.mean(same))


@dataclass(frozen=True)
class SbmSpec:
    """Stochastic block model with Gaussian attributes.

    Block b's attribute mean sits at attribute_separation times the unit
    basis vector e_{b mod attribute_dim}; noise is isotropic with std
    noise_std. Edge probability is p_in within a block, p_out across.
    """

    block_sizes: tuple
    p_in: float
    p_out: float
    attribute_dim: int
    attribute_separation: float
    noise_std: float


def validate_sbm_spec(spec: SbmSpec) -> None:
    if len(spec.block_sizes) < 2:
        raise ValueError("need at least 2 blocks")
    if any(int(b) < 1 for b in spec.block_sizes):
        raise ValueError("block sizes must be positive")
    for name in ("p_in", "p_out"):
        p = getattr(spec, name)
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"{name} must be in [0, 1], got {p}")
    if spec.attribute_dim < 1:
        raise ValueError("attribute_dim must be positive")
    if spec.attribute_separation < 0 or spec.noise_std < 0:
        raise ValueError("attribute_separation and noise_std must be nonnegative")


def generate_sbm(spec: SbmSpec, seed: int) -> Graph:
    """Sample a Graph from spec; the same seed gives a bit-identical Graph."""
    validate_sbm_spec(spec)
    rng = np.random.default_rng(seed)
    sizes = [int(b) for b in spec.block_sizes]
    n = sum(sizes)
    labels = np.repeat(np.arange(len(sizes), dtype=np.int64), sizes)

    d = spec.attribute_dim
    means = np.zeros((len(sizes), d))
    for b in range(len(sizes)):
        means[b, b % d] = spec.attribute_separation
    attrs = means[labels] + spec.noise_std * rng.standard_normal((n, d))

    p = np.where(labels[:, None] == labels[None, :], spec.p_in, spec.p_out)
    u = rng.random((n, n))
    iu, ju = np.triu_indices(n, k=1)
    hit = u[iu, ju] < p[iu, ju]
    pairs = np.stack([iu[hit], ju[hit]], axis=1)

    g = Graph(n_nodes=n, attributes=attrs,
              adjacency=_adjacency_from_pairs(pairs, n), labels=labels)
    validate_graph(g)
    return g


def expected_sbm_edges(spec: SbmSpec):
    """Mean and variance of the undirected edge count under spec."""
    sizes = [int(b) for b in spec.block_sizes]
    n = sum(sizes)
    intra = sum(b * (b - 1) // 2 for b in sizes)
    inter = n * (n - 1) // 2 - intra
    mean = intra * spec.p_in + inter * spec.p_out
    var = (intra * spec.p_in * (1 - spec.p_in)
           + inter * spec.p_out * (1 - spec.p_out))
    return mean, var


def export_graph(g: Graph, out_dir, meta: dict | None = None) -> dict:
    """Write attributes.csv / edges.txt (/ labels.txt / meta.txt) to out_dir.

    Attribute values use %.17g so a reload reproduces them bit-for-bit.
    Returns the written paths keyed by role.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "attributes": os.path.join(out_dir, "attributes.csv"),
        "edges": os.path.join(out_dir, "edges.txt"),
    }
    np.savetxt(paths["attributes"], g.attributes, fmt="%.17g", delimiter=",")
    upper = sp.triu(g.adjacency, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with open(paths["edges"], "w", encoding="utf-8") as fh:
        for i, j in zip(upper.row[order], upper.col[order]):
            fh.write(f"{i} {j}\n")
    if g.labels is not None:
        paths["labels"] = os.path.join(out_dir, "labels.txt")
        np.savetxt(paths["labels"], g.labels, fmt="%d")
    if meta is not None:
        paths["meta"] = os.path.join(out_dir, "meta.txt")
        with open(paths["meta"], "w", encoding="utf-8") as fh:
            for k, v in meta.items():
                fh.write(f"{k}: {v}\n")
    return paths
