import logging

import numpy as np
import pytest

from dcgc import encoder as enc
from dcgc import numeric as nm

SIGMOID_1 = 0.7310585786300049  # 1 / (1 + e^-1)


def identity_params(d):
    eye = np.eye(d)
    zero = np.zeros(d)
    return enc.EncoderParams(
        w1=nm.Tensor(eye, requires_grad=True),
        b1=nm.Tensor(zero, requires_grad=True),
        w2=nm.Tensor(eye, requires_grad=True),
        b2=nm.Tensor(zero, requires_grad=True),
    )


def test_identity_encoder_normalizes_rows():
    z1, z2 = enc.encode_views(np.array([[3.0, 4.0]]), identity_params(2))
    assert np.max(np.abs(z1.data - np.array([[0.6, 0.8]]))) <= 1e-12
    assert np.max(np.abs(z2.data - np.array([[0.6, 0.8]]))) <= 1e-12


def test_output_rows_have_unit_norm():
    rng = np.random.default_rng(0)
    params = enc.EncoderParams.init(5, 3, seed=1)
    z1, z2 = enc.encode_views(rng.standard_normal((20, 5)), params)
    for z in (z1, z2):
        norms = np.linalg.norm(z.data, axis=1)
        assert np.max(np.abs(norms - 1.0)) <= 1e-9


def test_zero_row_maps_to_zero_and_warns(caplog):
    x = np.array([[0.0, 0.0], [1.0, 0.0]])
    with caplog.at_level(logging.WARNING, logger="dcgc.encoder"):
        z1, _ = enc.encode_views(x, identity_params(2))
    assert np.max(np.abs(z1.data[0])) <= 1e-9
    assert any("degenerate" in r.message for r in caplog.records)


def test_views_are_unshared():
    rng = np.random.default_rng(2)
    params = enc.EncoderParams.init(4, 3, seed=3)
    z1, z2 = enc.encode_views(rng.standard_normal((10, 4)), params)
    assert np.mean(np.abs(z1.data - z2.data)) > 0.0


def test_encode_rejects_width_mismatch():
    params = enc.EncoderParams.init(4, 3, seed=0)
    with pytest.raises(ValueError):
        enc.encode_views(np.zeros((5, 7)), params)


def test_combine_views_examples():
    z1 = np.array([[1.0, 0.0]])
    z2 = np.array([[0.0, 1.0]])
    assert np.array_equal(enc.combine_views(z1, z1), z1)
    assert np.array_equal(enc.combine_views(z1, -z1), np.zeros((1, 2)))
    assert np.array_equal(enc.combine_views(z1, z2), np.array([[0.5, 0.5]]))
    with pytest.raises(ValueError):
        enc.combine_views(np.zeros((2, 2)), np.zeros((3, 2)))


def test_reconstruct_zero_embeddings():
    out = enc.reconstruct_adjacency(np.zeros((3, 2)))
    assert np.array_equal(out, np.full((3, 3), 0.5))


def test_reconstruct_identical_and_orthogonal_rows():
    same = enc.reconstruct_adjacency(np.array([[1.0, 0.0], [1.0, 0.0]]))
    assert abs(same[0, 1] - SIGMOID_1) <= 1e-12
    orth = enc.reconstruct_adjacency(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert abs(orth[0, 1] - 0.5) <= 1e-12
    assert abs(orth[0, 0] - SIGMOID_1) <= 1e-12


def test_reconstruct_symmetric_and_bounded():
    rng = np.random.default_rng(4)
    z = rng.standard_normal((12, 4))
    out = enc.reconstruct_adjacency(z)
    assert np.max(np.abs(out - out.T)) <= 1e-12
    assert out.min() > 0.0 and out.max() < 1.0


def test_encoder_gradients_match_fd():
    rng = np.random.default_rng(5)
    h = rng.standard_normal((6, 4))
    r1 = rng.standard_normal((6, 3))
    r2 = rng.standard_normal((6, 3))
    init = enc.EncoderParams.init(4, 3, seed=6)
    flat = [p.data.copy() for p in init.parameters()]

    def build(ps):
        params = enc.EncoderParams(w1=ps[0], b1=ps[1], w2=ps[2], b2=ps[3])
        z1, z2 = enc.encode_views(h, params)
        return nm.reduce_sum(z1 * r1) + nm.reduce_sum(z2 * r2)

    tensors = [nm.Tensor(v, requires_grad=True) for v in flat]
    build(tensors).backward()
    fd = nm.finite_diff_gradient(
        lambda ps: build([nm.Tensor(p) for p in ps]).item(), flat, eps=1e-5
    )
    assert nm.relative_gradient_error([t.grad for t in tensors], fd) <= 1e-4


def test_export_embeddings_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    z = rng.standard_normal((5, 3))
    path = tmp_path / "emb.csv"
    enc.export_embeddings(z, str(path))
    back = np.loadtxt(str(path), delimiter=",")
    assert np.array_equal(back, z)
