import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimtrust import autodiff as ad
from dimtrust.autodiff import ShapeError, Tensor, numerical_gradient
from dimtrust.graph import GraphObservation, batch_graphs, chain_edges
from dimtrust.nn import (
    Adam,
    CheckpointError,
    FeatureExtractorConfig,
    GraphPolicy,
    edge_conditioned_conv,
    load_checkpoint,
    save_checkpoint,
)

SMALL = FeatureExtractorConfig(conv1_channels=3, conv2_channels=2, global_hidden=4, global_out=2, edge_net_hidden=2)


def chain_obs(d, rng, scale=1.0):
    ei, ef = chain_edges(d, 0.1)
    return GraphObservation(rng.normal(size=(d, 2)) * scale, ei, ef, rng.normal(size=4) * scale)


def max_rel_error(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-6)))


def test_default_census():
    census = GraphPolicy().census()
    # conv1 222 + conv2 1558 + global 640 + 2064
    assert census["extractor"] == 4484
    assert census["heads"] == 16 * 2 + 1 + 16 * 2 + 1 + 1
    assert abs(census["extractor"] - 4376) / 4376 < 0.03


def test_conv_zero_inputs_give_bias():
    pol = GraphPolicy(SMALL, seed=1)
    pol.params["extractor.conv1.bias"].data = np.array([0.3, -0.2, 1.0])
    ei = np.array([[0, 1, 1, 2], [1, 0, 2, 1]])
    obs = GraphObservation(np.zeros((3, 2)), ei, np.zeros((4, 2)), np.zeros(4))
    b = batch_graphs([obs])
    out = edge_conditioned_conv(pol.params, "extractor.conv1", Tensor(b.node_features), b, 2, 3)
    np.testing.assert_array_equal(out.data, np.tile([0.3, -0.2, 1.0], (3, 1)))


def test_conv_two_node_hand_computed():
    pol = GraphPolicy(SMALL, seed=2)
    p = pol.params
    p["extractor.conv1.edge1.W"].data = np.array([[1.0, 0.0], [0.0, 2.0]])
    p["extractor.conv1.edge1.b"].data = np.array([0.0, -0.1])
    p["extractor.conv1.edge2.W"].data = np.arange(12, dtype=float).reshape(2, 6) * 0.1
    p["extractor.conv1.edge2.b"].data = np.linspace(-0.3, 0.2, 6)
    p["extractor.conv1.root"].data = np.array([[1.0, 0.5, 0.0], [0.0, -1.0, 2.0]])
    p["extractor.conv1.bias"].data = np.array([0.1, 0.2, 0.3])
    x = np.array([[1.0, -2.0], [0.5, 3.0]])
    e = np.array([[1.0, 0.1]])
    obs = GraphObservation(x, np.array([[0], [1]]), e, np.zeros(4))
    b = batch_graphs([obs])
    out = edge_conditioned_conv(p, "extractor.conv1", Tensor(x), b, 2, 3).data

    hidden = np.maximum(e[0] @ p["extractor.conv1.edge1.W"].data + p["extractor.conv1.edge1.b"].data, 0)
    theta = (hidden @ p["extractor.conv1.edge2.W"].data + p["extractor.conv1.edge2.b"].data).reshape(2, 3)
    root, bias = p["extractor.conv1.root"].data, p["extractor.conv1.bias"].data
    expected0 = x[0] @ root + bias  # no incoming edge
    expected1 = x[1] @ root + bias
    for i in range(3):
        expected1[i] += sum(x[0, k] * theta[k, i] for k in range(2))
    np.testing.assert_allclose(out[0], expected0, rtol=1e-14)
    np.testing.assert_allclose(out[1], expected1, rtol=1e-14)


def test_conv_rejects_dangling_edges():
    pol = GraphPolicy(SMALL)
    obs = GraphObservation(np.zeros((2, 2)), np.array([[0], [5]]), np.zeros((1, 2)), np.zeros(4))
    b = batch_graphs([obs])
    with pytest.raises(ShapeError):
        edge_conditioned_conv(pol.params, "extractor.conv1", Tensor(b.node_features), b, 2, 3)
    with pytest.raises(ShapeError):
        b.validate()


def test_extractor_rejects_wrong_global_width():
    pol = GraphPolicy(SMALL)
    b = batch_graphs([chain_obs(3, np.random.default_rng(0))])
    b.global_features = np.zeros((1, 3))
    with pytest.raises(ShapeError):
        pol.extract(b)


def test_permutation_equivariance():
    rng = np.random.default_rng(4)
    pol = GraphPolicy(seed=3)
    obs = chain_obs(6, rng)
    perm = rng.permutation(6)
    inv = np.argsort(perm)
    permuted = GraphObservation(obs.node_features[perm], inv[obs.edge_index], obs.edge_features, obs.global_features)
    _, f1 = pol.extract(batch_graphs([obs]))
    _, f2 = pol.extract(batch_graphs([permuted]))
    np.testing.assert_allclose(f2.data, f1.data[perm], atol=1e-12)


def test_batching_transparency_and_weight_sharing():
    rng = np.random.default_rng(5)
    pol = GraphPolicy(seed=4)
    graphs = [chain_obs(d, rng) for d in (2, 5, 3)]
    _, fused = pol.extract(batch_graphs(graphs))
    means, values, _ = pol.forward(batch_graphs(graphs))
    start = 0
    for k, g in enumerate(graphs):
        _, alone = pol.extract(batch_graphs([g]))
        m1, v1, _ = pol.forward(batch_graphs([g]))
        np.testing.assert_allclose(fused.data[start:start + g.dim], alone.data, atol=1e-10)
        np.testing.assert_allclose(means.data[start:start + g.dim], m1.data, atol=1e-10)
        assert values.data[k] == pytest.approx(v1.data[0], abs=1e-10)
        start += g.dim
    twin = [graphs[1], graphs[1]]
    m, v, _ = pol.forward(batch_graphs(twin))
    np.testing.assert_allclose(m.data[:5], m.data[5:], rtol=1e-12, atol=1e-15)
    assert v.data[0] == pytest.approx(v.data[1], rel=1e-12)


@settings(max_examples=19, deadline=None)
@given(st.integers(2, 20))
def test_dimension_agnostic(n):
    pol = GraphPolicy(seed=0)
    means, values, log_std = pol.forward(batch_graphs([chain_obs(n, np.random.default_rng(n))]))
    assert means.shape == (n,) and values.shape == (1,) and log_std.shape == (1,)
    assert np.all(np.isfinite(means.data))


def test_heads_shape_contract_and_zero_value_head():
    rng = np.random.default_rng(6)
    pol = GraphPolicy(seed=5)
    b = batch_graphs([chain_obs(3, rng), chain_obs(5, rng)])
    means, values, _ = pol.forward(b)
    split = pol.split_means(means.data, b)
    assert [s.size for s in split] == [3, 5]
    assert values.shape == (2,)
    pol.params["heads.value.W"].data[:] = 0.0
    pol.params["heads.value.b"].data[:] = 0.37
    _, values, _ = pol.forward(b)
    np.testing.assert_array_equal(values.data, [0.37, 0.37])


def _gradcheck_policy(pol, loss_fn, names, h=1e-5, tol=1e-4, max_entries=40):
    pol.params.zero_grad()
    loss_fn().backward()
    rng = np.random.default_rng(0)
    for name in names:
        p = pol.params[name]
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = numerical_gradient(lambda: float(loss_fn().data), p, h)
        flat_a, flat_n = analytic.ravel(), numeric.ravel()
        idx = rng.choice(flat_a.size, size=min(max_entries, flat_a.size), replace=False)
        assert max_rel_error(flat_a[idx], flat_n[idx]) < tol, name
    return pol


def test_full_extractor_gradcheck():
    rng = np.random.default_rng(7)
    pol = GraphPolicy(SMALL, seed=6)
    b = batch_graphs([chain_obs(3, rng), chain_obs(4, rng)])
    w = rng.normal(size=(7, SMALL.fused_dim))

    def loss():
        _, fused = pol.extract(b)
        return ad.total(ad.mul(fused, w))

    _gradcheck_policy(pol, loss, [k for k in pol.params if k.startswith("extractor.")])


def test_each_layer_gradcheck_default_width():
    rng = np.random.default_rng(8)
    pol = GraphPolicy(seed=7)
    b = batch_graphs([chain_obs(4, rng), chain_obs(2, rng)])

    def loss():
        means, values, log_std = pol.forward(b)
        return ad.add(ad.total(ad.square(means)), ad.add(ad.total(ad.square(values)), ad.total(log_std)))

    _gradcheck_policy(pol, loss, list(pol.params.keys()), max_entries=25)


def test_value_loss_reaches_extractor():
    rng = np.random.default_rng(9)
    pol = GraphPolicy(SMALL, seed=8)
    b = batch_graphs([chain_obs(5, rng)])
    pol.params.zero_grad()
    _, values, _ = pol.forward(b)
    ad.total(ad.square(ad.add(values, -1.0))).backward()
    g = pol.params["extractor.global1.W"].grad
    assert g is not None and np.abs(g).max() > 0
    assert np.abs(pol.params["extractor.conv2.root"].grad).max() > 0


def test_adam_zero_gradient_noop_and_first_step():
    pol = GraphPolicy(SMALL)
    before = {k: v.data.copy() for k, v in pol.params.items()}
    opt = Adam(pol.params, lr=1e-3)
    opt.step(pol.params, {k: np.zeros_like(v.data) for k, v in pol.params.items()})
    for k, v in pol.params.items():
        np.testing.assert_array_equal(v.data, before[k])
    rng = np.random.default_rng(0)
    grads = {k: rng.normal(size=v.data.shape) for k, v in pol.params.items()}
    opt = Adam(pol.params, lr=1e-3)
    opt.step(pol.params, grads)
    for k, v in pol.params.items():
        delta = v.data - before[k]
        np.testing.assert_array_equal(np.sign(delta), -np.sign(grads[k]))
        np.testing.assert_allclose(np.abs(delta), 1e-3, rtol=1e-4)


def test_adam_minimizes_quadratic():
    from dimtrust.nn import Params

    p = Params()
    x = p.add("x", np.array([3.0, -2.0, 1.0]))
    A = np.diag([1.0, 2.0, 0.5])
    opt = Adam(p, lr=0.1)
    for _ in range(300):
        p.zero_grad()
        ad.total(ad.mul(ad.square(x), np.diag(A))).backward()
        opt.step(p)
    grad = 2 * np.diag(A) * x.data
    assert np.linalg.norm(grad) < 1e-3


def test_checkpoint_roundtrip_is_byte_stable(tmp_path):
    pol = GraphPolicy(seed=11)
    opt = Adam(pol.params, lr=5e-4)
    rng = np.random.default_rng(3)
    opt.step(pol.params, {k: rng.normal(size=v.data.shape) for k, v in pol.params.items()})
    a, b = tmp_path / "a.npz", tmp_path / "b.npz"
    save_checkpoint(a, pol, opt, rng, extra={"timestep": 6000})
    ck = load_checkpoint(a)
    save_checkpoint(b, ck.policy, ck.optimizer, ck.rng, extra=ck.extra)
    assert a.read_bytes() == b.read_bytes()
    assert ck.extra["timestep"] == 6000
    assert ck.rng.random() == rng.random()
    for k in pol.params:
        np.testing.assert_array_equal(ck.policy.params[k].data, pol.params[k].data)


def test_checkpoint_version_mismatch(tmp_path, monkeypatch):
    from dimtrust import nn

    path = tmp_path / "old.npz"
    monkeypatch.setattr(nn, "CHECKPOINT_VERSION", 0)
    save_checkpoint(path, GraphPolicy(SMALL))
    monkeypatch.setattr(nn, "CHECKPOINT_VERSION", 1)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
