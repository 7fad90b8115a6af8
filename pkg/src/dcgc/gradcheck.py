"""Finite-difference validation of every trained loss.

Each case builds a small random instance and a loss closure that accepts
either plain arrays (for the central-difference oracle) or Tensors (for
the tape). The two gradients must agree to a relative tolerance on the
order of sqrt(machine eps); anything worse means a broken backward rule.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import numeric as nm
from .losses import (
    AssignmentSet,
    contrastive_loss,
    dual_center_loss,
    reconstruction_loss,
    sharpen,
    soft_assignment,
    total_loss,
)
from .neighborhood import hardness_weights, neighbor_mixing_matrix

TOLERANCE = 1e-4

# Denominator floor for the relative comparison. The probe quotient carries
# absolute noise of about |loss| * ulp / (2 * eps) ~ 1e-10, so gradient
# entries far below 1e-5 cannot be certified to 1e-4 relative by any double
# precision oracle; the floor keeps those entries judged on absolute terms
# (gap <= floor * tolerance) without masking wrong-sign or wrong-factor
# bugs, which show up on entries many orders of magnitude larger.
FD_FLOOR = 1e-5


def _unit_rows(x):
    sq = nm.reduce_sum(nm.square(x), axis=1, keepdims=True)
    return x / nm.sqrt(nm.clamp_min(sq, 1e-24))


def _random_adjacency(rng, n: int) -> sp.csr_matrix:
    upper = np.triu(rng.random((n, n)) < 0.5, k=1).astype(np.float64)
    return sp.csr_matrix(upper + upper.T)


def _sizes(rng):
    n = int(rng.integers(2, 9))
    d = int(rng.integers(2, 5))
    k = int(rng.integers(2, min(4, n) + 1))
    return n, d, k


def _case_contrastive(rng):
    n, d, _ = _sizes(rng)
    x1 = rng.normal(size=(n, d))
    x2 = rng.normal(size=(n, d))
    e = rng.dirichlet(np.ones(3), size=n)
    m = hardness_weights(e, rng.normal(size=(n, d)), tau=0.5)

    def build(ps):
        return contrastive_loss(_unit_rows(ps[0]), _unit_rows(ps[1]), m)

    return [x1, x2], build


def _case_reconstruction(rng):
    n, d, _ = _sizes(rng)
    x = rng.normal(size=(n, d))
    a = _random_adjacency(rng, n).toarray()

    def build(ps):
        z = _unit_rows(ps[0])
        return reconstruction_loss(a, nm.sigmoid(nm.matmul(z, nm.transpose(z))))

    return [x], build


def _case_dual_center(rng):
    n, d, k = _sizes(rng)
    z = rng.normal(size=(n, d))
    mu = rng.normal(size=(k, d))
    pi = rng.dirichlet(np.ones(k), size=k)
    w = neighbor_mixing_matrix(_random_adjacency(rng, n))
    # targets are constants of the optimization, frozen from the base point
    q0 = soft_assignment(z, mu)
    f0 = soft_assignment(nm.spmm(w, q0), pi)
    p, g = sharpen(q0), sharpen(f0)

    def build(ps):
        q = soft_assignment(ps[0], ps[1])
        f = soft_assignment(nm.spmm(w, q), ps[2])
        return dual_center_loss(AssignmentSet(q=q, p=p, f=f, g=g), lam=0.6)

    return [z, mu, pi], build


def _case_total(rng):
    n, d, k = _sizes(rng)
    x1 = rng.normal(size=(n, d))
    x2 = rng.normal(size=(n, d))
    mu = rng.normal(size=(k, d))
    pi = rng.dirichlet(np.ones(k), size=k)
    adj = _random_adjacency(rng, n)
    a = adj.toarray()
    w = neighbor_mixing_matrix(adj)
    e = rng.dirichlet(np.ones(3), size=n)
    m = hardness_weights(e, rng.normal(size=(n, d)), tau=0.5)

    z0 = 0.5 * (np.asarray(_unit_rows(x1)) + np.asarray(_unit_rows(x2)))
    q0 = soft_assignment(z0, mu)
    f0 = soft_assignment(nm.spmm(w, q0), pi)
    p, g = sharpen(q0), sharpen(f0)

    def build(ps):
        z1, z2 = _unit_rows(ps[0]), _unit_rows(ps[1])
        z = (z1 + z2) * 0.5
        lc = contrastive_loss(z1, z2, m)
        # normalized variant keeps |loss| near 1 so the probe quotient
        # keeps enough significant digits for small gradient entries
        lr = reconstruction_loss(a, nm.sigmoid(nm.matmul(z, nm.transpose(z))),
                                 normalize=True)
        q = soft_assignment(z, ps[2])
        f = soft_assignment(nm.spmm(w, q), ps[3])
        ld = dual_center_loss(AssignmentSet(q=q, p=p, f=f, g=g), lam=0.5)
        return total_loss(lc, lr, ld, beta=0.3, gamma=2.0)

    return [x1, x2, mu, pi], build


LOSS_BUILDERS = {
    "contrastive": _case_contrastive,
    "reconstruction": _case_reconstruction,
    "dual_center": _case_dual_center,
    "total": _case_total,
}


def _tape_gradients(build, params):
    tensors = [nm.Tensor(p, requires_grad=True) for p in params]
    build(tensors).backward()
    return [t.grad for t in tensors]


def run_gradient_checks(trials: int = 20, seed: int = 0,
                        eps: float = 1e-5) -> dict:
    """Max relative tape-vs-finite-difference error per loss.

    Every trial draws a fresh instance (N <= 8, d <= 4) from a seeded
    stream, so failures reproduce exactly.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    worst = {name: 0.0 for name in LOSS_BUILDERS}
    for name, case in LOSS_BUILDERS.items():
        for t in range(trials):
            rng = np.random.default_rng([seed, t])
            params, build = case(rng)
            tape = _tape_gradients(build, params)
            fd = nm.finite_diff_gradient(
                lambda ps: float(build(ps)), params, eps=eps
            )
            err = nm.relative_gradient_error(tape, fd, floor=FD_FLOOR)
            worst[name] = max(worst[name], err)
    return worst
