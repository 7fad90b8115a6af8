"""Three-channel spectral filterbank.

The filtered representation mixes a low-pass channel (I - L)^t X, a
high-pass channel L^t X, and the raw attributes X with three trainable
scalars. Propagation happens by repeated sparse products; the propagated
channels are constants for a fixed graph, so callers cache them and only
the mixing runs on the gradient tape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import numeric as nm


@dataclass
class FilterbankParams:
    """Trainable channel weights plus the fixed filtering depth t."""

    alpha1: nm.Tensor
    alpha2: nm.Tensor
    alpha3: nm.Tensor
    t: int

    @classmethod
    def init(cls, t: int = 2) -> "FilterbankParams":
        if t < 1:
            raise ValueError(f"filtering depth t must be >= 1, got {t}")
        third = 1.0 / 3.0
        return cls(
            alpha1=nm.Tensor(third, requires_grad=True),
            alpha2=nm.Tensor(third, requires_grad=True),
            alpha3=nm.Tensor(third, requires_grad=True),
            t=t,
        )

    def parameters(self):
        return [self.alpha1, self.alpha2, self.alpha3]


def propagate_channels(x: np.ndarray, laplacian, t: int):
    """Return ((I - L)^t X, L^t X) via t successive sparse products each."""
    if t < 1:
        raise ValueError(f"filtering depth t must be >= 1, got {t}")
    if laplacian.shape[0] != laplacian.shape[1]:
        raise ValueError(f"laplacian must be square, got {laplacian.shape}")
    if x.shape[0] != laplacian.shape[0]:
        raise ValueError(
            f"attribute rows {x.shape[0]} do not match laplacian {laplacian.shape}"
        )
    n = laplacian.shape[0]
    smooth = (sp.identity(n) - laplacian).tocsr()
    lap = laplacian.tocsr()
    low = np.asarray(x, dtype=np.float64)
    high = low
    for _ in range(t):
        low = nm.spmm(smooth, low)
        high = nm.spmm(lap, high)
    return low, high


def mix_channels(params: FilterbankParams, low, high, x):
    """alpha1*low + alpha2*high + alpha3*x on the gradient tape."""
    return params.alpha1 * low + params.alpha2 * high + params.alpha3 * x


def apply_filterbank(x, laplacian, params: FilterbankParams):
    """Full filterbank pass; prefer caching propagate_channels in loops."""
    low, high = propagate_channels(x, laplacian, params.t)
    return mix_channels(params, low, high, x)
