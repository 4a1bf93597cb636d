import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsr import nn
from fsr.errors import ConfigurationError
from oracles import central_diff, loop_forward, loop_xent, rel_err


def small_net(seed, sizes=(4, 5, 3), meta="fc"):
    return nn.init_mlp(list(sizes), seed=seed, meta_layers=meta)


def random_batch(rng, b, d, C, soft=False):
    x = rng.standard_normal((b, d))
    if soft:
        y = rng.dirichlet(np.ones(C), size=b)
    else:
        y = nn.one_hot(rng.integers(0, C, b), C)
    return nn.Batch(x, y, np.arange(b))


# -- forward -----------------------------------------------------------------


def test_zero_net_gives_uniform_softmax():
    p = nn.ModelParams([np.zeros((3, 2))], [np.zeros(3)], (True,))
    logits, _ = nn.forward(p, np.array([[0.3, -2.0], [5.0, 1.0]]))
    assert np.all(logits == 0)
    np.testing.assert_allclose(nn.softmax(logits), 1 / 3)


def test_identity_net():
    p = nn.ModelParams([np.eye(2)], [np.zeros(2)], (True,))
    logits, _ = nn.forward(p, np.array([[1.0, 0.0]]))
    np.testing.assert_array_equal(logits, [[1.0, 0.0]])


def test_forward_matches_scalar_loops():
    p = nn.init_mlp([3, 6, 5, 4], seed=0)
    x = np.random.default_rng(1).standard_normal((7, 3))
    logits, cache = nn.forward(p, x)
    for i in range(len(x)):
        np.testing.assert_allclose(logits[i], loop_forward(p.weights, p.biases, x[i]), rtol=1e-12, atol=1e-12)
    assert len(cache.inputs) == 3 and len(cache.preacts) == 2


def test_forward_rejects_wrong_width():
    with pytest.raises(ConfigurationError):
        nn.forward(small_net(0), np.zeros((2, 7)))


def test_forward_from_shares_lower_layers():
    p = small_net(0, (4, 6, 5, 3))
    x = np.random.default_rng(0).standard_normal((5, 4))
    cache = nn.forward_cached(p, x)
    np.testing.assert_allclose(nn.forward_from(p, cache, 2), cache.logits)
    np.testing.assert_allclose(nn.forward_from(p, cache, 1), cache.logits)


def test_model_params_validation():
    with pytest.raises(ConfigurationError):
        nn.ModelParams([np.zeros((3, 2)), np.zeros((2, 4))], [np.zeros(3), np.zeros(2)], (True, True))
    with pytest.raises(ConfigurationError):
        nn.ModelParams([np.zeros((3, 2))], [np.zeros(3)], (False,))
    with pytest.raises(ConfigurationError):
        nn.ModelParams([np.zeros((3, 2))], [np.zeros(2)], (True,))


def test_meta_mask_selection():
    assert nn.meta_mask_for("fc", 3) == (False, False, True)
    assert nn.meta_mask_for("all", 3) == (True, True, True)
    assert nn.meta_mask_for("last_k:2", 3) == (False, True, True)
    for bad in ("last_k:0", "last_k:4", "last_k:x", "conv"):
        with pytest.raises(ConfigurationError):
            nn.meta_mask_for(bad, 3)


# -- loss ----------------------------------------------------------------------


def test_xent_examples():
    assert nn.softmax_xent(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))[0] == pytest.approx(math.log(2))
    # log(1 + e^-20) ~ e^-20
    assert nn.softmax_xent(np.array([[10.0, -10.0]]), np.array([[1.0, 0.0]]))[0] == pytest.approx(2.06e-9, rel=1e-2)
    assert nn.softmax_xent(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]), 0.1)[0] == pytest.approx(math.log(2))


def test_xent_matches_loop_with_smoothing():
    rng = np.random.default_rng(3)
    z = rng.standard_normal((6, 4)) * 3
    y = nn.one_hot(rng.integers(0, 4, 6), 4)
    got = nn.softmax_xent(z, y, 0.2)
    for i in range(6):
        want = loop_xent(z[i], 0.8 * y[i] + 0.05)
        assert got[i] == pytest.approx(want, rel=1e-12)


def test_xent_is_ln_c_at_zero_logits():
    for C in (2, 5, 10):
        loss = nn.softmax_xent(np.zeros((3, C)), nn.one_hot([0, 1, C - 1], C))
        np.testing.assert_allclose(loss, math.log(C))


def test_xent_and_grad_agrees_with_separate_calls():
    rng = np.random.default_rng(0)
    z, y = rng.standard_normal((5, 3)), rng.dirichlet(np.ones(3), 5)
    loss, grad = nn.xent_and_grad(z, y, 0.1)
    np.testing.assert_allclose(loss, nn.softmax_xent(z, y, 0.1))
    np.testing.assert_allclose(grad, nn.logit_grad(z, y, 0.1))


def test_xent_stable_for_huge_logits():
    loss = nn.softmax_xent(np.array([[1000.0, -1000.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
    assert np.isfinite(loss).all() and loss[0] == pytest.approx(2000.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(2, 6), st.floats(0, 0.9), st.integers(0, 10_000))
def test_xent_nonnegative(b, C, s, seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((b, C)) * 10
    y = rng.dirichlet(np.ones(C), b)
    assert np.all(nn.softmax_xent(z, y, s) >= -1e-12)


# -- gradients ---------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_backward_weighted_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p = nn.init_mlp([3, 5, 4, 3], seed=seed)
    batch = random_batch(rng, 6, 3, 3, soft=seed % 2 == 1)
    w = rng.random(6)
    s = 0.1 * (seed % 2)
    grads = nn.backward_weighted(p, batch, w, s)

    def loss():
        return float(w @ nn.softmax_xent(nn.forward(p, batch.features)[0], batch.labels, s))

    fd = central_diff(loss, p.weights + p.biases)
    for l in range(p.num_layers):
        assert rel_err(grads.weights[l], fd[l]) < 1e-4
        assert rel_err(grads.biases[l], fd[p.num_layers + l]) < 1e-4


def test_backward_weighted_linearity():
    rng = np.random.default_rng(0)
    p = small_net(1)
    batch = random_batch(rng, 5, 4, 3)
    zero = nn.backward_weighted(p, batch, np.zeros(5))
    assert np.all(zero.flat() == 0)
    single = nn.backward_weighted(p, batch, np.eye(5)[2])
    alone = nn.backward_weighted(p, batch.subset([2]), [1.0])
    np.testing.assert_allclose(single.flat(), alone.flat(), atol=1e-14)


def test_per_sample_closed_form_example():
    # zero final layer: logits 0, softmax [0.5, 0.5], y = class 0
    p = nn.ModelParams([np.zeros((2, 1))], [np.zeros(2)], (True,))
    g = nn.per_sample_grad_meta(p, nn.Batch(np.array([[1.0]]), np.array([[1.0, 0.0]])))
    np.testing.assert_allclose(g.weights[0][0, :, 0], [-0.5, 0.5])
    np.testing.assert_allclose(g.biases[0][0], [-0.5, 0.5])


@pytest.mark.parametrize("meta", ["fc", "all", "last_k:2"])
def test_per_sample_mean_equals_uniform_aggregate(meta):
    rng = np.random.default_rng(5)
    p = small_net(2, (4, 6, 5, 3), meta)
    batch = random_batch(rng, 8, 4, 3)
    ps = nn.per_sample_grad_meta(p, batch)
    agg = nn.backward_weighted(p, batch, np.full(8, 1 / 8)).restrict(p.meta_layers)
    assert ps.layers == p.meta_layers
    assert np.abs(ps.mean().flat() - agg.flat()).max() < 1e-10


def test_per_sample_rows_for_duplicates_are_identical():
    rng = np.random.default_rng(0)
    p = small_net(0, meta="all")
    batch = random_batch(rng, 3, 4, 3)
    dup = batch.subset([0, 1, 0])
    g = nn.per_sample_grad_meta(p, dup).flat()
    np.testing.assert_array_equal(g[0], g[2])


def test_per_sample_matches_one_row_backward():
    rng = np.random.default_rng(9)
    p = small_net(3, (4, 6, 3), "all")
    batch = random_batch(rng, 4, 4, 3)
    ps = nn.per_sample_grad_meta(p, batch).flat()
    for i in range(4):
        one = nn.backward_weighted(p, batch.subset([i]), [1.0]).flat()
        np.testing.assert_allclose(ps[i], one, atol=1e-13)


# -- optimiser ---------------------------------------------------------------------


def test_sgd_examples():
    p = nn.ModelParams([np.array([[1.0]])], [np.array([0.0])], (True,))
    g = nn.GradientSet({0: np.array([[2.0]])}, {0: np.array([0.0])})
    assert nn.sgd_step(p, g, 0.1).weights[0][0, 0] == pytest.approx(0.8)
    same = nn.sgd_step(p, g, 0.0)
    assert same.weights[0][0, 0] == 1.0


def test_sgd_mask_leaves_other_layers_bit_identical():
    rng = np.random.default_rng(0)
    p = small_net(0, (4, 5, 5, 3))
    grads = nn.backward_weighted(p, random_batch(rng, 4, 4, 3), np.full(4, 0.25))
    stepped = nn.sgd_step(p, grads, 0.5, mask=(False, False, True))
    for l in (0, 1):
        assert np.array_equal(stepped.weights[l], p.weights[l]) and np.array_equal(stepped.biases[l], p.biases[l])
    assert not np.array_equal(stepped.weights[2], p.weights[2])


def test_sgd_rejects_negative_lr():
    p = small_net(0)
    with pytest.raises(ConfigurationError):
        nn.sgd_step(p, nn.GradientSet({}, {}), -1.0)


def test_cosine_schedule():
    assert nn.cosine_lr(0, 100, 0.1) == 0.1
    assert nn.cosine_lr(50, 100, 0.1) == pytest.approx(0.05)
    values = [nn.cosine_lr(s, 100, 0.1) for s in range(100)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert all(0 < v <= 0.1 for v in values)
    with pytest.raises(ValueError):
        nn.cosine_lr(100, 100, 0.1)
