"""Training objectives: weighted contrastive loss, structure
reconstruction, Student-t soft assignments with sharpened targets, and the
dual-center KL loss.

All losses run on the gradient tape when given Tensor inputs and reduce to
plain floats on numpy inputs. Weighting matrices and sharpened targets are
constants with respect to gradients; callers pass them as numpy arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import xlogy

from . import numeric as nm
from .errors import NumericError
from .neighborhood import HardnessWeights

logger = logging.getLogger(__name__)

_PROB_FLOOR = 1e-12


@dataclass
class AssignmentSet:
    """Soft assignments and their sharpened targets.

    q/p live in feature space, f/g in neighbor-distribution space; p and g
    are training targets and always plain arrays.
    """

    q: object
    p: np.ndarray
    f: object
    g: np.ndarray


@dataclass
class DualCenters:
    """Trainable feature centers mu [K×d] and neighbor-distribution
    centers pi_centers [K×K]."""

    mu: nm.Tensor
    pi_centers: nm.Tensor

    def parameters(self):
        return [self.mu, self.pi_centers]


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, nm.Tensor) else np.asarray(x, dtype=np.float64)


def _check_rows_stochastic(mat: np.ndarray, name: str, tol: float = 1e-6) -> None:
    gap = np.max(np.abs(mat.sum(axis=1) - 1.0)) if mat.size else 0.0
    if gap > tol:
        raise ValueError(f"{name} rows must sum to 1 (max gap {gap:.3g})")
    if mat.size and mat.min() < -1e-9:
        raise ValueError(f"{name} has negative entries")


def validate_assignment_set(assign: AssignmentSet, tol: float = 1e-9) -> None:
    for name in ("q", "p", "f", "g"):
        mat = _data(getattr(assign, name))
        _check_rows_stochastic(mat, name, tol)
        if mat.max(initial=0.0) > 1.0 + tol:
            raise ValueError(f"{name} has entries above 1")


def contrastive_loss(z1, z2, m: HardnessWeights):
    """Weighted two-view InfoNCE-style loss, averaged over 2N anchors.

    For anchor i in view l the positive is its cross-view twin; negatives
    are every other node in both views, each similarity scaled by the
    hardness weight. Rows of z1/z2 must be L2-normalized so that every
    weighted similarity stays in [-1, 1] and the exponentials need no
    shifting (guarded here).
    """
    n = _data(z1).shape[0]
    if _data(z1).shape != _data(z2).shape:
        raise ValueError(
            f"view shapes differ: {_data(z1).shape} vs {_data(z2).shape}"
        )
    if m.m.shape != (n, n):
        raise ValueError(f"weights must be ({n}, {n}), got {m.m.shape}")

    weights = m.m
    s11 = nm.matmul(z1, nm.transpose(z1))
    s22 = nm.matmul(z2, nm.transpose(z2))
    s12 = nm.matmul(z1, nm.transpose(z2))
    for s in (s11, s22, s12):
        peak = np.max(np.abs(weights * _data(s)))
        if peak > 1.0 + 1e-6:
            raise NumericError(
                f"weighted similarity {peak:.6f} exceeds 1; views not normalized?"
            )

    pos = nm.reduce_sum(z1 * z2, axis=1)  # diag of s12
    off = 1.0 - np.eye(n)
    pos_exp = nm.exp(pos)
    den1 = pos_exp + nm.reduce_sum(
        off * (nm.exp(weights * s11) + nm.exp(weights * s12)), axis=1
    )
    den2 = pos_exp + nm.reduce_sum(
        off * (nm.exp(weights * s22) + nm.exp(weights * nm.transpose(s12))), axis=1
    )
    total = nm.reduce_sum(nm.log(den1) - pos) + nm.reduce_sum(nm.log(den2) - pos)
    return total / (2.0 * n)


def reconstruction_loss(a, a_hat, normalize: bool = False):
    """Binary cross-entropy between adjacency and predicted link
    probabilities over all N^2 ordered pairs, diagonal included.

    Predictions are clamped into [1e-12, 1 - 1e-12]; clamping anything
    outside (0, 1) is logged. normalize=True divides by N^2 (off by
    default; the raw sum is the contract).
    """
    target = a.toarray() if sp.issparse(a) else np.asarray(a, dtype=np.float64)
    n = target.shape[0]
    if target.shape != _data(a_hat).shape:
        raise ValueError(
            f"shape mismatch: adjacency {target.shape} vs prediction "
            f"{_data(a_hat).shape}"
        )
    raw = _data(a_hat)
    outside = int(np.count_nonzero((raw <= 0.0) | (raw >= 1.0)))
    if outside:
        logger.warning(
            "%d predicted link probabilities outside (0, 1) were clamped",
            outside,
        )
    ah = nm.clamp_min(a_hat, _PROB_FLOOR)
    one_minus = nm.clamp_min(1.0 - ah, _PROB_FLOOR)
    loss = -nm.reduce_sum(target * nm.log(ah) + (1.0 - target) * nm.log(one_minus))
    if normalize:
        loss = loss / float(n * n)
    return loss


def soft_assignment(points, centers):
    """Student-t kernel responsibilities of each point for each center.

    q_ij = (1 + ||x_i - c_j||^2)^{-1}, normalized per row. Differentiable
    in both arguments.
    """
    pd, cd = _data(points), _data(centers)
    if cd.shape[0] < 1:
        raise ValueError("need at least one center")
    if pd.shape[1] != cd.shape[1]:
        raise ValueError(
            f"dimension mismatch: points are {pd.shape}, centers {cd.shape}"
        )
    sq_p = nm.reduce_sum(nm.square(points), axis=1, keepdims=True)  # N×1
    sq_c = nm.reduce_sum(nm.square(centers), axis=1, keepdims=True)  # K×1
    cross = nm.matmul(points, nm.transpose(centers))
    d2 = sq_p + nm.transpose(sq_c) - 2.0 * cross
    kernel = 1.0 / (1.0 + nm.clamp_min(d2, 0.0))  # tiny negatives are roundoff
    return kernel / nm.reduce_sum(kernel, axis=1, keepdims=True)


def sharpen(q) -> np.ndarray:
    """Square entries, discount by column mass, renormalize rows.

    p_ij = (q_ij^2 / sum_i q_ij) / sum_k (q_ik^2 / sum_i q_ik). Targets are
    constants, so this is plain numpy. An all-zero column contributes 0
    (logged); rows stay stochastic.
    """
    qd = np.asarray(_data(q), dtype=np.float64)
    _check_rows_stochastic(qd, "q")
    col = qd.sum(axis=0)
    dead = col <= 0.0
    if dead.any():
        logger.warning("%d cluster column(s) carry no mass", int(dead.sum()))
    weighted = np.where(dead, 0.0, qd * qd / np.where(dead, 1.0, col))
    return weighted / weighted.sum(axis=1, keepdims=True)


def dual_center_loss(assign: AssignmentSet, lam):
    """lam * KL(P||Q) + (1 - lam) * KL(G||F), summed over all entries.

    P and G are constants (self-training targets); gradients reach Q and F
    only. Q/F entries are floored at 1e-12 inside the log (logged if the
    floor fires under positive target mass). lam may be a float in [0, 1]
    or a 0-d Tensor (learnable mode).
    """
    if not isinstance(lam, nm.Tensor):
        if not (0.0 <= lam <= 1.0):
            raise ValueError(f"lambda must be in [0, 1], got {lam}")
    p, g = np.asarray(assign.p), np.asarray(assign.g)
    for name, target, soft in (("q", p, assign.q), ("f", g, assign.f)):
        floored = (_data(soft) < _PROB_FLOOR) & (target > 1e-9)
        if floored.any():
            logger.warning(
                "%d %s entries hit the 1e-12 floor under positive target mass",
                int(floored.sum()), name,
            )
    kl_feature = float(xlogy(p, p).sum()) - nm.reduce_sum(
        p * nm.log(nm.clamp_min(assign.q, _PROB_FLOOR))
    )
    kl_neighbor = float(xlogy(g, g).sum()) - nm.reduce_sum(
        g * nm.log(nm.clamp_min(assign.f, _PROB_FLOOR))
    )
    return lam * kl_feature + (1.0 - lam) * kl_neighbor


def total_loss(lc, lr, ld, beta: float, gamma: float):
    """beta * L_c + (1 - beta) * L_r + gamma * L_d (fine-tuning objective)."""
    if not (0.0 <= beta <= 1.0):
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    return beta * lc + (1.0 - beta) * lr + gamma * ld
