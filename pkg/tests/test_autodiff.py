"""Finite-difference checks for every autodiff op."""

import numpy as np

from splinefit import autodiff as ad


def fd_check(build, x0, rtol=1e-6, h=1e-6, seed=1.0):
    """Compare backward() gradients against central differences.

    ``build`` maps a leaf Tensor to the scalar output Tensor.
    """
    leaf = ad.tensor(x0.copy(), requires_grad=True)
    out = build(leaf)
    ad.backward(out, seed=seed)
    got = leaf.grad
    num = np.zeros_like(x0)
    flat = x0.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = float(build(ad.tensor(x0)).data)
        flat[i] = orig - h
        dn = float(build(ad.tensor(x0)).data)
        flat[i] = orig
        num.ravel()[i] = seed * (up - dn) / (2 * h)
    np.testing.assert_allclose(got, num, rtol=rtol, atol=1e-9)
    return got


rng = np.random.default_rng(0)


def test_matmul():
    B = ad.tensor(rng.normal(size=(4, 3)))
    w = rng.normal(size=(5, 3))
    fd_check(lambda a: ad.wsum(ad.matmul(a, B), w), rng.normal(size=(5, 4)))


def test_add_sub_mul_broadcast():
    b = ad.tensor(rng.normal(size=(4,)))
    x0 = rng.normal(size=(3, 4))
    w = rng.normal(size=(3, 4))
    fd_check(lambda a: ad.wsum(ad.add(a, b), w), x0)
    fd_check(lambda a: ad.wsum(ad.sub(b, a), w), x0)
    fd_check(lambda a: ad.wsum(ad.mul(a, ad.tensor(w)), w), x0)
    # gradient w.r.t. the broadcast side
    leaf = ad.tensor(rng.normal(size=(4,)), requires_grad=True)
    out = ad.wsum(ad.add(ad.tensor(x0), leaf), w)
    ad.backward(out)
    np.testing.assert_allclose(leaf.grad, w.sum(axis=0))


def test_leaky_relu_scale_addconst():
    x0 = rng.normal(size=(6, 2))
    w = rng.normal(size=(6, 2))
    fd_check(lambda a: ad.wsum(ad.leaky_relu(a, 0.1), w), x0)
    fd_check(lambda a: ad.wsum(ad.scale(a, -2.5), w), x0)
    fd_check(lambda a: ad.wsum(ad.add_const(a, 3.0), w), x0)


def test_slice_concat_reshape_transpose():
    x0 = rng.normal(size=(6, 3))
    w = rng.normal(size=(2, 3))
    fd_check(lambda a: ad.wsum(ad.slice_rows(a, 1, 3), w), x0)
    w2 = rng.normal(size=(6, 6))
    fd_check(lambda a: ad.wsum(ad.concat_cols([a, a]), w2), x0)
    fd_check(lambda a: ad.wsum(ad.reshape(a, (3, 6)), w2[:3]), x0)
    fd_check(lambda a: ad.wsum(ad.transpose(a), w2[:3]), x0)


def test_take_rows_with_and_without_plan():
    idx = np.array([0, 2, 2, 4, 1, 0, 2])
    x0 = rng.normal(size=(5, 3))
    w = rng.normal(size=(7, 3))
    plan = ad.make_scatter_plan(idx, 5)
    g1 = fd_check(lambda a: ad.wsum(ad.take_rows(a, idx, plan), w), x0)
    g2 = fd_check(lambda a: ad.wsum(ad.take_rows(a, idx), w), x0)
    np.testing.assert_allclose(g1, g2)
    # row 3 never gathered: zero gradient
    assert np.all(g1[3] == 0)


def test_affine_and_add3():
    x0 = rng.normal(size=(5, 3))
    W = ad.tensor(rng.normal(size=(3, 4)))
    b = ad.tensor(rng.normal(size=(4,)))
    w = rng.normal(size=(5, 4))
    fd_check(lambda a: ad.wsum(ad.affine(a, W, b), w), x0)
    leafW = ad.tensor(rng.normal(size=(3, 4)), requires_grad=True)
    leafb = ad.tensor(rng.normal(size=(4,)), requires_grad=True)
    out = ad.wsum(ad.affine(ad.tensor(x0), leafW, leafb), w)
    ad.backward(out)
    np.testing.assert_allclose(leafW.grad, x0.T @ w)
    np.testing.assert_allclose(leafb.grad, w.sum(axis=0))
    w3 = rng.normal(size=(5, 3))
    other = ad.tensor(rng.normal(size=(5, 3)))
    bias = ad.tensor(rng.normal(size=(3,)))
    fd_check(lambda a: ad.wsum(ad.add3(a, other, bias), w3), x0)


def test_segment_ops():
    counts = np.array([3, 2, 4])
    pad_idx, valid = ad.build_segments(counts)
    assert pad_idx.shape == (3, 4)
    # every row appears in exactly one valid slot
    np.testing.assert_array_equal(np.sort(pad_idx[valid]), np.arange(9))
    x0 = rng.normal(size=(9, 2))
    w = rng.normal(size=(3, 2))
    seg_ids = np.repeat(np.arange(3), counts)
    fd_check(lambda a: ad.wsum(ad.segment_max(a, pad_idx, seg_ids), w), x0)
    w1 = rng.normal(size=(1, 2))
    fd_check(lambda a: ad.wsum(ad.max_rows(a), w1), x0)
    fd_check(lambda a: ad.wsum(ad.mean_rows(a), w1), x0)


def test_softmax():
    x0 = rng.normal(size=(2, 5))
    w = rng.normal(size=(2, 5))
    fd_check(lambda a: ad.wsum(ad.softmax_rows(a), w), x0)


def test_backward_seed_scales_gradients():
    x0 = rng.normal(size=(4, 4))
    w = rng.normal(size=(4, 4))

    def run(seed):
        leaf = ad.tensor(x0, requires_grad=True)
        ad.backward(ad.wsum(ad.leaky_relu(leaf, 0.1), w), seed=seed)
        return leaf.grad

    np.testing.assert_allclose(run(3.0), 3.0 * run(1.0))


def test_shared_subexpression_accumulates():
    # y = sum(x) + sum(x) must give gradient 2 everywhere
    leaf = ad.tensor(rng.normal(size=(3, 3)), requires_grad=True)
    s = ad.wsum(leaf, np.ones((3, 3)))
    out = ad.add(s, s)
    ad.backward(out)
    np.testing.assert_allclose(leaf.grad, 2.0)


def test_two_layer_mlp_composite():
    W1 = rng.normal(size=(3, 8))
    W2 = rng.normal(size=(8, 2))
    x = rng.normal(size=(10, 3))
    w = rng.normal(size=(10, 2))

    def net(w1_leaf):
        h = ad.leaky_relu(ad.matmul(ad.tensor(x), w1_leaf), 0.1)
        return ad.wsum(ad.matmul(h, ad.tensor(W2)), w)

    fd_check(net, W1)
