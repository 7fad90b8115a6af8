import numpy as np
import pytest

from dcgc import clusteval as ce

from oracles import brute_force_accuracy


# ------------------------------------------------------------- kmeans

def test_kmeans_recovers_separated_groups():
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 0.0], [10.1, 0.0]])
    res = ce.kmeans(pts, k=2, seed=0)
    assert res.labels[0] == res.labels[1]
    assert res.labels[2] == res.labels[3]
    assert res.labels[0] != res.labels[2]
    assert abs(res.inertia - 4 * 0.05**2) <= 1e-12


def test_kmeans_single_cluster_is_mean():
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((9, 3))
    res = ce.kmeans(pts, k=1, seed=0)
    assert np.max(np.abs(res.centers[0] - pts.mean(axis=0))) <= 1e-12
    assert np.all(res.labels == 0)


def test_kmeans_k_equals_n():
    rng = np.random.default_rng(2)
    pts = rng.standard_normal((5, 2))
    res = ce.kmeans(pts, k=5, seed=0)
    assert res.inertia <= 1e-20
    assert sorted(res.labels.tolist()) == [0, 1, 2, 3, 4]


def test_kmeans_validates_k():
    pts = np.zeros((3, 2))
    with pytest.raises(ValueError):
        ce.kmeans(pts, k=4, seed=0)
    with pytest.raises(ValueError):
        ce.kmeans(pts, k=0, seed=0)


def test_kmeans_deterministic_per_seed():
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((40, 4))
    a = ce.kmeans(pts, k=3, seed=7)
    b = ce.kmeans(pts, k=3, seed=7)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.centers, b.centers)
    assert a.inertia == b.inertia


def test_kmeans_inertia_matches_labels_and_centers():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((30, 3))
        res = ce.kmeans(pts, k=4, seed=seed)
        assert set(res.labels.tolist()) <= set(range(4))
        direct = float(((pts - res.centers[res.labels]) ** 2).sum())
        assert abs(direct - res.inertia) <= 1e-10


def test_kmeans_inertia_history_non_increasing():
    for seed in range(8):
        rng = np.random.default_rng(100 + seed)
        pts = rng.standard_normal((50, 2)) * rng.uniform(0.5, 3.0)
        res = ce.kmeans(pts, k=5, seed=seed, n_init=3)
        hist = res.inertia_history
        assert len(hist) >= 1
        assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


def test_lloyd_relocates_emptied_cluster():
    # coincident starting centers: cluster 1 starts empty and must be
    # relocated to the farthest point rather than dropped
    pts = np.array([[0.0, 0.0], [0.2, 0.0], [5.0, 0.0], [5.2, 0.0]])
    start = np.array([[0.0, 0.0], [0.0, 0.0]])
    labels, centers, inertia, hist = ce._lloyd(pts, start)
    assert set(labels.tolist()) == {0, 1}
    assert abs(inertia - 2 * 0.1**2 * 2) <= 1e-12
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


# ------------------------------------------------------------ metrics

def test_metrics_perfect_prediction():
    y = np.array([0, 1, 2, 0, 1, 2])
    rep = ce.clustering_metrics(y, y)
    assert rep.acc == 1.0 and rep.nmi == 1.0
    assert rep.ari == 1.0 and rep.f1 == 1.0


def test_metrics_permutation_invariance():
    truth = np.array([0, 0, 1, 1, 2, 2])
    pred = np.array([2, 2, 0, 0, 1, 1])  # relabeled but identical partition
    rep = ce.clustering_metrics(pred, truth)
    assert rep.acc == 1.0 and rep.f1 == 1.0
    assert rep.nmi == 1.0 and rep.ari == 1.0


def test_metrics_derived_example():
    rep = ce.clustering_metrics(np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1]))
    assert abs(rep.acc - 0.5) <= 1e-12
    assert abs(rep.ari - (-0.5)) <= 1e-12
    assert abs(rep.nmi - 0.0) <= 1e-12
    assert abs(rep.f1 - 0.5) <= 1e-12


def test_metrics_reject_bad_inputs():
    with pytest.raises(ValueError):
        ce.clustering_metrics(np.array([0, 1]), np.array([0, 1, 1]))
    with pytest.raises(ValueError):
        ce.clustering_metrics(np.array([0, -1]), np.array([0, 1]))
    with pytest.raises(ValueError):
        ce.clustering_metrics(np.array([], dtype=int), np.array([], dtype=int))


def test_hungarian_accuracy_matches_brute_force():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 40))
        k = int(rng.integers(2, 7))
        pred = rng.integers(0, k, size=n)
        truth = rng.integers(0, k, size=n)
        rep = ce.clustering_metrics(pred, truth)
        assert abs(rep.acc - brute_force_accuracy(pred, truth)) <= 1e-12, (
            f"seed {seed}"
        )


def test_metrics_invariance_under_relabeling():
    rng = np.random.default_rng(11)
    pred = rng.integers(0, 4, size=60)
    truth = rng.integers(0, 4, size=60)
    base = ce.clustering_metrics(pred, truth)
    perm = np.array([2, 0, 3, 1])
    relabeled = ce.clustering_metrics(perm[pred], truth)
    assert abs(base.acc - relabeled.acc) <= 1e-12
    assert abs(base.nmi - relabeled.nmi) <= 1e-12
    assert abs(base.ari - relabeled.ari) <= 1e-12
    assert abs(base.f1 - relabeled.f1) <= 1e-12
    # NMI and ARI are additionally invariant when truth is relabeled
    truth_perm = ce.clustering_metrics(pred, perm[truth])
    assert abs(base.nmi - truth_perm.nmi) <= 1e-12
    assert abs(base.ari - truth_perm.ari) <= 1e-12


def test_metrics_handle_unequal_cluster_counts():
    pred = np.array([0, 1, 2, 2])
    truth = np.array([0, 1, 1, 1])
    rep = ce.clustering_metrics(pred, truth)
    assert abs(rep.acc - 0.75) <= 1e-12
    assert 0.0 <= rep.nmi <= 1.0
    assert -1.0 <= rep.ari <= 1.0
    assert 0.0 <= rep.f1 <= 1.0


def test_metric_report_as_dict():
    rep = ce.MetricReport(acc=0.5, nmi=0.25, ari=0.1, f1=0.4)
    assert rep.as_dict() == {"acc": 0.5, "nmi": 0.25, "ari": 0.1, "f1": 0.4}
