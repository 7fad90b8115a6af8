"""Dual one-layer encoders with L2 row normalization, view fusion, and the
inner-product structure decoder."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import numeric as nm

logger = logging.getLogger(__name__)

_NORM_FLOOR = 1e-12


@dataclass
class EncoderParams:
    """Two unshared linear maps, one per view."""

    w1: nm.Tensor
    b1: nm.Tensor
    w2: nm.Tensor
    b2: nm.Tensor

    @classmethod
    def init(cls, in_dim: int, emb_dim: int, seed: int) -> "EncoderParams":
        if in_dim < 1 or emb_dim < 1:
            raise ValueError("encoder dimensions must be positive")
        rng = np.random.default_rng(seed)
        bound = np.sqrt(6.0 / (in_dim + emb_dim))

        def linear():
            w = rng.uniform(-bound, bound, size=(in_dim, emb_dim))
            b = np.zeros(emb_dim)
            return nm.Tensor(w, requires_grad=True), nm.Tensor(b, requires_grad=True)

        w1, b1 = linear()
        w2, b2 = linear()
        return cls(w1=w1, b1=b1, w2=w2, b2=b2)

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]


def _rownorm(y):
    """Divide each row by max(||row||, 1e-12); zero rows stay zero."""
    sq = nm.reduce_sum(nm.square(y), axis=1, keepdims=True)
    # floor the squared norm so sqrt never sees 0 on the tape
    norm = nm.sqrt(nm.clamp_min(sq, _NORM_FLOOR * _NORM_FLOOR))
    data = norm.data if isinstance(norm, nm.Tensor) else norm
    degenerate = int(np.count_nonzero(data <= _NORM_FLOOR))
    if degenerate:
        logger.warning("%d degenerate zero row(s) in encoder output", degenerate)
    return y / norm


def encode_views(h, params: EncoderParams):
    """Two L2-row-normalized views of h; unshared parameters per view."""
    width = h.shape[1] if isinstance(h, nm.Tensor) else np.shape(h)[1]
    if width != params.in_dim:
        raise ValueError(
            f"input width {width} does not match encoder input {params.in_dim}"
        )
    z1 = _rownorm(nm.matmul(h, params.w1) + params.b1)
    z2 = _rownorm(nm.matmul(h, params.w2) + params.b2)
    return z1, z2


def combine_views(z1, z2):
    """Elementwise average of the two views; not re-normalized."""
    s1 = z1.shape if isinstance(z1, nm.Tensor) else np.shape(z1)
    s2 = z2.shape if isinstance(z2, nm.Tensor) else np.shape(z2)
    if s1 != s2:
        raise ValueError(f"view shapes differ: {s1} vs {s2}")
    return (z1 + z2) * 0.5


def reconstruct_adjacency(z):
    """sigmoid(z z^T): pairwise link probabilities, symmetric, in (0, 1)."""
    return nm.sigmoid(nm.matmul(z, nm.transpose(z)))


def export_embeddings(z, path) -> None:
    """Write embeddings as CSV, one node per row."""
    data = z.data if isinstance(z, nm.Tensor) else np.asarray(z)
    np.savetxt(path, data, fmt="%.17g", delimiter=",")
