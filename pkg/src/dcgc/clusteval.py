"""K-means clustering and label-agreement metrics.

K-means is implemented here (k-means++ seeding, best-of-n_init by inertia)
because training needs deterministic tie-breaking and per-iteration inertia
guarantees. Metric computation reuses scipy's assignment solver and
sklearn's information-theoretic scores; accuracy is the Hungarian-matched
fraction and macro-F1 reuses that matching.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from sklearn.metrics import adjusted_rand_score, f1_score, normalized_mutual_info_score


@dataclass
class KmeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    # assignment-optimal inertia after every center update, per Lloyd's run
    inertia_history: list = field(default_factory=list)


@dataclass
class MetricReport:
    acc: float
    nmi: float
    ari: float
    f1: float

    def as_dict(self) -> dict:
        return {"acc": self.acc, "nmi": self.nmi, "ari": self.ari, "f1": self.f1}


def _plusplus_seeding(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:  # every point already coincides with a center
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int = 300):
    """One Lloyd's run. Ties in assignment go to the lowest center index;
    an emptied cluster is relocated to the point farthest from its center."""
    k = centers.shape[0]
    centers = centers.copy()
    labels = None
    history = []
    for _ in range(max_iter):
        d2 = cdist(x, centers, "sqeuclidean")
        new_labels = d2.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
            else:
                farthest = int(d2[np.arange(len(labels)), labels].argmax())
                centers[j] = x[farthest]
        history.append(float(cdist(x, centers, "sqeuclidean").min(axis=1).sum()))
    d2 = cdist(x, centers, "sqeuclidean")
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(labels)), labels].sum())
    return labels.astype(np.int64), centers, inertia, history


def kmeans(points, k: int, seed: int, n_init: int = 10) -> KmeansResult:
    """Best of n_init seeded Lloyd's runs, selected by inertia (ties keep
    the earliest restart)."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("points must be 2-D")
    n = x.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points {n}")
    if n_init < 1:
        raise ValueError(f"n_init must be >= 1, got {n_init}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        labels, centers, inertia, history = _lloyd(x, _plusplus_seeding(x, k, rng))
        if best is None or inertia < best.inertia:
            best = KmeansResult(labels=labels, centers=centers,
                                inertia=inertia, inertia_history=history)
    return best


def _match_clusters(pred: np.ndarray, truth: np.ndarray):
    """Hungarian matching on the (square-padded) confusion matrix.

    Returns (matched count, mapping array from pred id to truth id)."""
    size = int(max(pred.max(), truth.max())) + 1
    w = np.zeros((size, size), dtype=np.int64)
    np.add.at(w, (pred, truth), 1)
    rows, cols = linear_sum_assignment(w.max() - w)
    mapping = np.empty(size, dtype=np.int64)
    mapping[rows] = cols
    return int(w[rows, cols].sum()), mapping


def clustering_metrics(pred, truth) -> MetricReport:
    """ACC (optimal matching), NMI (arithmetic-mean normalization), ARI,
    and macro-F1 under the ACC-optimal matching."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(
            f"pred and truth must be equal-length vectors, got {pred.shape} "
            f"and {truth.shape}"
        )
    if pred.size == 0:
        raise ValueError("empty label vectors")
    if pred.min() < 0 or truth.min() < 0:
        raise ValueError("labels must be nonnegative")
    matched, mapping = _match_clusters(pred, truth)
    acc = matched / pred.size
    f1 = f1_score(truth, mapping[pred], average="macro", zero_division=0)
    nmi = normalized_mutual_info_score(truth, pred)
    ari = adjusted_rand_score(truth, pred)
    return MetricReport(acc=float(acc), nmi=float(nmi), ari=float(ari), f1=float(f1))
