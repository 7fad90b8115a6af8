"""End-to-end training: contrastive pretraining with pseudo-label
weighting, dual-center initialization, KL fine-tuning, final clustering.

Both stages run full-batch by default. Every source of randomness (encoder
init, clustering restarts, minibatch draws) derives from the config seed,
so one (graph, config) pair always produces the same report.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numeric as nm
from .clusteval import clustering_metrics, kmeans
from .encoder import EncoderParams, combine_views, encode_views, reconstruct_adjacency
from .errors import ConfigError, NumericError
from .filterbank import FilterbankParams, mix_channels, propagate_channels
from .graphio import Graph, homophily_ratio, normalized_laplacian, validate_graph
from .losses import (
    AssignmentSet,
    DualCenters,
    contrastive_loss,
    dual_center_loss,
    reconstruction_loss,
    sharpen,
    soft_assignment,
    total_loss,
)
from .neighborhood import (
    HardnessWeights,
    class_neighbor_centers,
    hardness_weights_from_gate,
    label_gate,
    neighbor_distributions,
    neighbor_gate,
    neighbor_mixing_matrix,
)
from .report import ClusterReport

SUPERVISION_MODES = ("neighbor_distribution", "pseudo_label", "none")
CENTER_MODES = ("dual", "feature_only", "nd_only")


@dataclass
class TrainConfig:
    k: int
    epochs_pretrain: int = 300
    epochs_finetune: int = 100
    t: int = 2
    target_update_interval: int = 5
    tau: float = 0.7
    beta: float = 0.3
    gamma: float = 10.0
    lam: float = 0.5
    embed_dim: int = 500
    learning_rate: float = 1e-3
    seed: int = 0
    batch_size: int | None = None  # None = full batch
    supervision_mode: str = "neighbor_distribution"
    center_mode: str = "dual"
    learnable_lambda: bool = False
    normalize_reconstruction: bool = False
    kmeans_n_init: int = 10
    pseudo_refresh_interval: int = 1

    def validate(self) -> None:
        """Collect every violated constraint before raising."""
        bad = []
        if self.k < 2:
            bad.append(f"k must be >= 2 (got {self.k})")
        for name in ("epochs_pretrain", "epochs_finetune"):
            if getattr(self, name) < 1:
                bad.append(f"{name} must be positive (got {getattr(self, name)})")
        if self.t < 1:
            bad.append(f"t must be >= 1 (got {self.t})")
        if self.target_update_interval < 1:
            bad.append("target_update_interval must be >= 1 "
                       f"(got {self.target_update_interval})")
        if not (0.0 < self.tau < 1.0):
            bad.append(f"tau must be in (0, 1) (got {self.tau})")
        if not (0.0 <= self.beta <= 1.0):
            bad.append(f"beta must be in [0, 1] (got {self.beta})")
        if self.gamma < 0.0:
            bad.append(f"gamma must be nonnegative (got {self.gamma})")
        if not (0.0 <= self.lam <= 1.0):
            bad.append(f"lam must be in [0, 1] (got {self.lam})")
        if self.embed_dim < 1:
            bad.append(f"embed_dim must be positive (got {self.embed_dim})")
        if self.learning_rate <= 0.0:
            bad.append(f"learning_rate must be positive (got {self.learning_rate})")
        if self.batch_size is not None and self.batch_size < 2:
            bad.append(f"batch_size must be >= 2 (got {self.batch_size})")
        if self.supervision_mode not in SUPERVISION_MODES:
            bad.append(f"supervision_mode must be one of {SUPERVISION_MODES} "
                       f"(got {self.supervision_mode!r})")
        if self.center_mode not in CENTER_MODES:
            bad.append(f"center_mode must be one of {CENTER_MODES} "
                       f"(got {self.center_mode!r})")
        if self.kmeans_n_init < 1:
            bad.append(f"kmeans_n_init must be >= 1 (got {self.kmeans_n_init})")
        if self.pseudo_refresh_interval < 1:
            bad.append("pseudo_refresh_interval must be >= 1 "
                       f"(got {self.pseudo_refresh_interval})")
        if bad:
            raise ConfigError("; ".join(bad))


@dataclass
class RunTrace:
    stage: str
    epochs: list = field(default_factory=list)
    seconds: float = 0.0
    metrics: dict | None = None

    def to_dict(self) -> dict:
        return {"stage": self.stage, "epochs": self.epochs,
                "seconds": self.seconds, "metrics": self.metrics}


class Adam:
    """Adaptive-moment optimizer over Tensor parameters.

    Parameters may join later (the centers appear at fine-tuning); each
    slot keeps its own step count so bias correction stays per-parameter.
    """

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.slots = []
        self.add_params(params)

    def add_params(self, params) -> None:
        for p in params:
            self.slots.append([p, np.zeros_like(p.data), np.zeros_like(p.data), 0])

    def zero_grad(self) -> None:
        for slot in self.slots:
            slot[0].grad = None

    def step(self) -> None:
        for slot in self.slots:
            p, m, v, t = slot
            if p.grad is None:
                continue
            g = p.grad
            t += 1
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            slot[1], slot[2], slot[3] = m, v, t
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class ModelState:
    filterbank: FilterbankParams
    encoder: EncoderParams
    optimizer: Adam
    centers: DualCenters | None = None


def init_state(g: Graph, cfg: TrainConfig) -> ModelState:
    fb = FilterbankParams.init(cfg.t)
    enc = EncoderParams.init(g.attributes.shape[1], cfg.embed_dim, seed=cfg.seed)
    opt = Adam(fb.parameters() + enc.parameters(), lr=cfg.learning_rate)
    return ModelState(filterbank=fb, encoder=enc, optimizer=opt)


def _forward(state: ModelState, low, high, x):
    h = mix_channels(state.filterbank, low, high, x)
    z1, z2 = encode_views(h, state.encoder)
    return z1, z2, combine_views(z1, z2)


def _check_finite(value: float, stage: str, epoch: int) -> None:
    if not np.isfinite(value):
        raise NumericError(f"non-finite {stage} loss at epoch {epoch}")


def _check_embedding(z: np.ndarray, stage: str, epoch: int) -> None:
    if not np.isfinite(z).all():
        raise NumericError(f"non-finite {stage} embedding at epoch {epoch}")


def _ones_weights(n: int) -> HardnessWeights:
    return HardnessWeights(m=np.ones((n, n)))


def _gate_for_mode(cfg: TrainConfig, e: np.ndarray, pseudo: np.ndarray):
    if cfg.supervision_mode == "neighbor_distribution":
        return neighbor_gate(e, cfg.tau)
    if cfg.supervision_mode == "pseudo_label":
        return label_gate(pseudo)
    return None  # "none": weights stay all-ones


def pretrain(g: Graph, cfg: TrainConfig, state: ModelState):
    """Contrastive + reconstruction stage; returns (state, Z, trace)."""
    rng = np.random.default_rng([cfg.seed, 0])
    lap = normalized_laplacian(g)
    low, high = propagate_channels(g.attributes, lap, cfg.t)
    adj_dense = g.adjacency.toarray()
    n = g.n_nodes
    if cfg.batch_size is not None and cfg.batch_size > n:
        raise ConfigError(f"batch_size {cfg.batch_size} exceeds graph size {n}")
    trace = RunTrace(stage="pretrain")
    weights = _ones_weights(n)
    started = time.perf_counter()
    for epoch in range(cfg.epochs_pretrain):
        epoch_started = time.perf_counter()
        z1, z2, z = _forward(state, low, high, g.attributes)
        zd = z.data
        _check_embedding(zd, "pretraining", epoch)
        if epoch % cfg.pseudo_refresh_interval == 0:
            pseudo = kmeans(zd, cfg.k, seed=int(rng.integers(2**31)),
                            n_init=cfg.kmeans_n_init).labels
            onehot = np.zeros((n, cfg.k))
            onehot[np.arange(n), pseudo] = 1.0
            e = neighbor_distributions(onehot, g.adjacency)
            gate = _gate_for_mode(cfg, e, pseudo)
            if gate is not None:
                weights = hardness_weights_from_gate(gate, zd)
        if cfg.batch_size is None:
            lc = contrastive_loss(z1, z2, weights)
        else:
            idx = rng.choice(n, size=cfg.batch_size, replace=False)
            lc = contrastive_loss(
                nm.take_rows(z1, idx),
                nm.take_rows(z2, idx),
                HardnessWeights(m=weights.m[np.ix_(idx, idx)]),
            )
        lr_loss = reconstruction_loss(
            adj_dense, reconstruct_adjacency(z),
            normalize=cfg.normalize_reconstruction,
        )
        loss = lc + lr_loss
        _check_finite(loss.item(), "pretraining", epoch)
        state.optimizer.zero_grad()
        loss.backward()
        state.optimizer.step()
        trace.epochs.append({
            "epoch": epoch,
            "loss": loss.item(),
            "contrastive": lc.item(),
            "reconstruction": lr_loss.item(),
            "seconds": time.perf_counter() - epoch_started,
        })
    trace.seconds = time.perf_counter() - started
    _, _, z = _forward(state, low, high, g.attributes)
    return state, z.data.copy(), trace


def finetune(g: Graph, cfg: TrainConfig, state: ModelState, z0: np.ndarray):
    """Dual-center self-training stage; returns (Z, AssignmentSet, trace)."""
    rng = np.random.default_rng([cfg.seed, 1])
    lap = normalized_laplacian(g)
    low, high = propagate_channels(g.attributes, lap, cfg.t)
    adj_dense = g.adjacency.toarray()
    w_mix = neighbor_mixing_matrix(g.adjacency)
    n = g.n_nodes

    km = kmeans(z0, cfg.k, seed=int(rng.integers(2**31)), n_init=cfg.kmeans_n_init)
    mu = nm.Tensor(km.centers, requires_grad=True)
    q0 = soft_assignment(z0, km.centers)
    e0 = neighbor_distributions(q0, g.adjacency)
    pi0 = class_neighbor_centers(e0, q0)
    state.centers = DualCenters(mu=mu, pi_centers=nm.Tensor(pi0, requires_grad=True))
    state.optimizer.add_params(state.centers.parameters())

    lam_param = None
    if cfg.center_mode == "feature_only":
        lam = 1.0
    elif cfg.center_mode == "nd_only":
        lam = 0.0
    elif cfg.learnable_lambda:
        # sigmoid-parameterized so lam stays in (0, 1); starts at cfg.lam
        start = np.clip(cfg.lam, 1e-6, 1.0 - 1e-6)
        lam_param = nm.Tensor(np.log(start / (1.0 - start)), requires_grad=True)
        state.optimizer.add_params([lam_param])
        lam = None
    else:
        lam = cfg.lam

    trace = RunTrace(stage="finetune")
    weights = _ones_weights(n)
    p_target = g_target = None
    started = time.perf_counter()
    for epoch in range(cfg.epochs_finetune):
        epoch_started = time.perf_counter()
        z1, z2, z = _forward(state, low, high, g.attributes)
        _check_embedding(z.data, "fine-tuning", epoch)
        q = soft_assignment(z, state.centers.mu)
        e = nm.spmm(w_mix, q)
        f = soft_assignment(e, state.centers.pi_centers)
        if epoch % cfg.target_update_interval == 0:
            p_target = sharpen(q.data)
            g_target = sharpen(f.data)
            gate = _gate_for_mode(cfg, e.data, np.argmax(q.data, axis=1))
            if gate is not None:
                weights = hardness_weights_from_gate(gate, z.data)
        lc = contrastive_loss(z1, z2, weights)
        lr_loss = reconstruction_loss(
            adj_dense, reconstruct_adjacency(z),
            normalize=cfg.normalize_reconstruction,
        )
        assign = AssignmentSet(q=q, p=p_target, f=f, g=g_target)
        ld = dual_center_loss(
            assign, nm.sigmoid(lam_param) if lam_param is not None else lam
        )
        loss = total_loss(lc, lr_loss, ld, beta=cfg.beta, gamma=cfg.gamma)
        _check_finite(loss.item(), "fine-tuning", epoch)
        state.optimizer.zero_grad()
        loss.backward()
        state.optimizer.step()
        entry = {
            "epoch": epoch,
            "loss": loss.item(),
            "contrastive": lc.item(),
            "reconstruction": lr_loss.item(),
            "dual_center": ld.item(),
            "seconds": time.perf_counter() - epoch_started,
        }
        if lam_param is not None:
            entry["lambda"] = float(nm.sigmoid(lam_param.data))
        trace.epochs.append(entry)
    trace.seconds = time.perf_counter() - started

    z1, z2, z = _forward(state, low, high, g.attributes)
    q = soft_assignment(z, state.centers.mu)
    e = nm.spmm(w_mix, q)
    f = soft_assignment(e, state.centers.pi_centers)
    final = AssignmentSet(q=q.data.copy(), p=p_target, f=f.data.copy(), g=g_target)
    return z.data.copy(), final, trace


def run_dcgc(g: Graph, cfg: TrainConfig,
             return_embedding: bool = False) -> ClusterReport:
    """Whole pipeline; final labels come from K-means on the fused
    embedding, with argmax of the feature soft assignment as an alternate."""
    cfg.validate()
    validate_graph(g)
    if cfg.k > g.n_nodes:
        raise ConfigError(f"k={cfg.k} exceeds the number of nodes ({g.n_nodes})")
    state = init_state(g, cfg)
    state, z0, pre_trace = pretrain(g, cfg, state)
    if g.labels is not None:
        snap = kmeans(z0, cfg.k, seed=int(np.random.default_rng(
            [cfg.seed, 2]).integers(2**31)), n_init=cfg.kmeans_n_init)
        pre_trace.metrics = clustering_metrics(snap.labels, g.labels).as_dict()
    z_final, assign, fine_trace = finetune(g, cfg, state, z0)
    final_km = kmeans(z_final, cfg.k, seed=int(np.random.default_rng(
        [cfg.seed, 3]).integers(2**31)), n_init=cfg.kmeans_n_init)
    predicted = final_km.labels
    metrics = None
    if g.labels is not None:
        metrics = clustering_metrics(predicted, g.labels).as_dict()
        fine_trace.metrics = metrics
    return ClusterReport(
        config=asdict(cfg),
        seed=cfg.seed,
        predicted=predicted.tolist(),
        argmax_q=np.argmax(assign.q, axis=1).tolist(),
        metrics=metrics,
        homophily=homophily_ratio(g) if g.labels is not None else None,
        pretrain_trace=pre_trace.to_dict(),
        finetune_trace=fine_trace.to_dict(),
        embedding=z_final.tolist() if return_embedding else None,
    )


def attribute_kmeans_baseline(g: Graph, k: int, seed: int, n_init: int = 10):
    """Plain K-means on raw attributes: the comparison baseline."""
    labels = kmeans(g.attributes, k, seed=seed, n_init=n_init).labels
    metrics = None
    if g.labels is not None:
        metrics = clustering_metrics(labels, g.labels).as_dict()
    return labels, metrics
