"""Neighbor-distribution statistics and the pairwise hardness weighting.

Given per-node label distributions (one-hot or soft), each node's neighbor
distribution e_i averages its neighbors' rows; per-cluster centers pi_k
average e over cluster members. The hardness weights M compare a
neighbor-similarity gate against min-max-normalized embedding cosine
similarity so that hard pairs get large weights in the contrastive loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


@dataclass
class NeighborProfile:
    """Per-node neighbor distributions e [N×K] and cluster centers pi [K×K]."""

    e: np.ndarray
    pi: np.ndarray


@dataclass
class HardnessWeights:
    """Pairwise contrastive weights, diagonal 1, entries in [0, 1]."""

    m: np.ndarray


def validate_neighbor_profile(p: NeighborProfile, tol: float = 1e-9) -> None:
    for name, mat in (("e", p.e), ("pi", p.pi)):
        if mat.min() < -tol:
            raise ValueError(f"{name} has negative entries")
        gap = np.max(np.abs(mat.sum(axis=1) - 1.0))
        if gap > tol:
            raise ValueError(f"{name} rows are not stochastic (max gap {gap:.3g})")


def neighbor_mixing_matrix(adjacency) -> sp.csr_matrix:
    """Row-stochastic neighbor-averaging operator.

    Row i of W @ Y is the mean of Y over i's neighbors; an isolated node
    gets an identity row so it averages to its own label distribution.
    """
    a = adjacency.tocsr()
    deg = np.asarray(a.sum(axis=1)).ravel()
    isolated = deg == 0.0
    inv = np.where(isolated, 0.0, 1.0 / np.maximum(deg, 1.0))
    w = sp.diags(inv) @ a
    if isolated.any():
        w = w + sp.diags(isolated.astype(np.float64))
    return w.tocsr()


def neighbor_distributions(label_dist, adjacency) -> np.ndarray:
    """e_i = mean label distribution over i's neighbors (self for isolated)."""
    y = np.asarray(label_dist, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError("label_dist must be 2-D [N, K]")
    gaps = np.abs(y.sum(axis=1) - 1.0)
    if gaps.max() > 1e-6:
        raise ValueError(
            f"label distribution rows must sum to 1 (max gap {gaps.max():.3g})"
        )
    if y.min() < -1e-9:
        raise ValueError("label distribution rows must be nonnegative")
    if adjacency.shape[0] != y.shape[0]:
        raise ValueError(
            f"adjacency is {adjacency.shape} but label_dist has {y.shape[0]} rows"
        )
    return np.asarray(neighbor_mixing_matrix(adjacency) @ y)


def class_neighbor_centers(e, assignment) -> np.ndarray:
    """pi_k: (responsibility-weighted) mean of e rows assigned to cluster k.

    assignment is either an integer vector (hard) or an [N, K] matrix of
    soft responsibilities. A cluster with no mass gets a uniform row and a
    warning; training proceeds.
    """
    e = np.asarray(e, dtype=np.float64)
    n, k = e.shape
    assignment = np.asarray(assignment)
    if assignment.ndim == 1:
        if assignment.shape != (n,):
            raise ValueError(f"assignment must have length {n}")
        if assignment.min() < 0 or assignment.max() >= k:
            raise ValueError(f"hard assignments must lie in [0, {k})")
        weights = np.zeros((n, k))
        weights[np.arange(n), assignment.astype(np.int64)] = 1.0
    elif assignment.shape == (n, k):
        weights = assignment.astype(np.float64)
    else:
        raise ValueError(
            f"assignment must be length-{n} labels or an ({n}, {k}) matrix"
        )
    mass = weights.sum(axis=0)
    empty = mass <= 1e-12
    if empty.any():
        logger.warning(
            "%d empty cluster(s); using uniform neighbor centers for them",
            int(empty.sum()),
        )
    pi = np.full((k, k), 1.0 / k)
    occupied = ~empty
    pi[occupied] = (weights.T[occupied] @ e) / mass[occupied, None]
    return pi


def _cosine_matrix(x: np.ndarray, zero_row_context: str | None = None):
    """Pairwise cosine similarity; zero rows get cosine 0 everywhere."""
    norms = np.linalg.norm(x, axis=1)
    zero = norms <= 0.0
    if zero.any() and zero_row_context:
        logger.warning(
            "%d zero-norm %s row(s); their cosines are taken as 0",
            int(zero.sum()), zero_row_context,
        )
    safe = np.where(zero, 1.0, norms)
    s = (x @ x.T) / np.outer(safe, safe)
    return (s + s.T) * 0.5  # force exact symmetry


def neighbor_gate(e, tau: float) -> np.ndarray:
    """Binary gate: 1 where neighbor distributions agree (cosine > tau)."""
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    e = np.asarray(e, dtype=np.float64)
    gate = (_cosine_matrix(e, "neighbor-distribution") > tau).astype(np.float64)
    np.fill_diagonal(gate, 1.0)
    return gate


def label_gate(labels) -> np.ndarray:
    """Binary gate from pseudo-label equality (ablation supervision signal)."""
    labels = np.asarray(labels)
    return (labels[:, None] == labels[None, :]).astype(np.float64)


def hardness_weights_from_gate(gate: np.ndarray, z) -> HardnessWeights:
    """M_ij = |gate_ij - minmax(cos(z_i, z_j))| off-diagonal, M_ii = 1.

    Min-max normalization runs over the off-diagonal cosine population; if
    that population is constant the normalized similarity is taken as 0.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if gate.shape != (n, n):
        raise ValueError(f"gate must be ({n}, {n}), got {gate.shape}")
    if n == 1:
        return HardnessWeights(m=np.ones((1, 1)))
    s = _cosine_matrix(z)
    off = ~np.eye(n, dtype=bool)
    lo = s[off].min()
    hi = s[off].max()
    if hi > lo:
        norm = (s - lo) / (hi - lo)
    else:
        norm = np.zeros_like(s)
    m = np.abs(gate - norm)
    np.fill_diagonal(m, 1.0)
    return HardnessWeights(m=m)


def hardness_weights(e, z, tau: float) -> HardnessWeights:
    """Neighbor-similarity-gated hardness weights (the default signal)."""
    return hardness_weights_from_gate(neighbor_gate(e, tau), z)
