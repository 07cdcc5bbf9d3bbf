import numpy as np
import numpy.testing as npt
import pytest

from helpers import finite_difference, max_rel_error, naive_conv2d, naive_maxpool

from synaptogen.numerics import (
    NotPositiveDefiniteError,
    cholesky,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    derive_seed,
    fnv1a64,
    make_rng,
    maxpool_backward,
    maxpool_forward,
    relu,
    relu_backward,
    softmax_cross_entropy,
    softmax_cross_entropy_batch,
)

FD_STEP = 1e-5


# ---------------------------------------------------------------- rng / seeds

def test_rng_determinism():
    a = make_rng(1234).standard_normal(10)
    b = make_rng(1234).standard_normal(10)
    npt.assert_array_equal(a, b)
    assert not np.array_equal(a, make_rng(1235).standard_normal(10))


def test_rng_rejects_negative_seed():
    with pytest.raises(ValueError):
        make_rng(-1)


def test_fnv1a64_known_vectors():
    # Published FNV-1a 64-bit reference values.
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_derive_seed_stable_and_sensitive():
    s = derive_seed(7, "mnist", "normal", 0)
    assert s == derive_seed(7, "mnist", "normal", 0)
    assert s != derive_seed(7, "mnist", "normal", 1)
    assert s != derive_seed(7, "mnist", "lognormal", 0)
    assert 0 <= s < 2**64


# ---------------------------------------------------------------- convolution

def test_conv_all_ones_center():
    x = np.ones((1, 5, 5))
    k = np.ones((1, 1, 5, 5))
    out = conv2d_forward(x, k, np.zeros(1), pad=2)
    assert out.shape == (1, 5, 5)
    assert out[0, 2, 2] == 25.0
    npt.assert_allclose(out, naive_conv2d(x, k, np.zeros(1), 2), atol=1e-12)


def test_conv_zero_input():
    rng = make_rng(0)
    k = rng.standard_normal((3, 2, 5, 5))
    out = conv2d_forward(np.zeros((2, 7, 7)), k, np.zeros(3), pad=2)
    npt.assert_array_equal(out, np.zeros((3, 7, 7)))


def test_conv_matches_naive_reference():
    rng = make_rng(42)
    x = rng.standard_normal((1, 8, 8))
    k = rng.standard_normal((2, 1, 5, 5))
    b = rng.standard_normal(2)
    got = conv2d_forward(x, k, b, pad=2)
    want = naive_conv2d(x, k, b, 2)
    npt.assert_allclose(got, want, atol=1e-12, rtol=0)


def test_conv_matches_naive_randomized():
    rng = make_rng(7)
    for _ in range(10):
        c = int(rng.integers(1, 4))
        h = int(rng.integers(5, 17))
        w = int(rng.integers(5, 17))
        k = int(rng.integers(1, 9))
        x = rng.standard_normal((c, h, w))
        kern = rng.standard_normal((k, c, 5, 5))
        b = rng.standard_normal(k)
        npt.assert_allclose(
            conv2d_forward(x, kern, b, pad=2),
            naive_conv2d(x, kern, b, 2),
            atol=1e-12,
            rtol=0,
        )


def test_conv_batched_matches_per_image():
    rng = make_rng(3)
    x = rng.standard_normal((4, 2, 6, 6))
    k = rng.standard_normal((3, 2, 5, 5))
    b = rng.standard_normal(3)
    batched = conv2d_forward(x, k, b, pad=2)
    for i in range(4):
        npt.assert_allclose(batched[i], conv2d_forward(x[i], k, b, pad=2), atol=1e-12)


def test_conv_shape_mismatch_names_both_shapes():
    x = np.zeros((2, 6, 6))
    k = np.zeros((3, 1, 5, 5))
    with pytest.raises(ValueError) as exc:
        conv2d_forward(x, k, np.zeros(3))
    assert "(2, 6, 6)" in str(exc.value) and "(3, 1, 5, 5)" in str(exc.value)
    with pytest.raises(ValueError):
        conv2d_forward(x, np.zeros((3, 2, 5, 5)), np.zeros(4))


def test_conv_backward_zero_grad():
    rng = make_rng(5)
    x = rng.standard_normal((1, 6, 6))
    k = rng.standard_normal((2, 1, 5, 5))
    gw, gb, gx = conv2d_backward(x, k, np.zeros((2, 6, 6)))
    assert not gw.any() and not gb.any() and not gx.any()


def test_conv_backward_single_pixel_recovers_patch():
    # With one kernel and grad 1.0 at a single interior output pixel, the
    # kernel gradient is exactly the input patch centered under that pixel.
    rng = make_rng(11)
    x = rng.standard_normal((1, 8, 8))
    k = np.zeros((1, 1, 5, 5))
    g = np.zeros((1, 8, 8))
    g[0, 4, 3] = 1.0
    gw, _, _ = conv2d_backward(x, k, g)
    npt.assert_allclose(gw[0, 0], x[0, 2:7, 1:6], atol=1e-15)


def test_conv_backward_matches_finite_differences():
    rng = make_rng(13)
    x = rng.standard_normal((2, 6, 6))
    k = rng.standard_normal((3, 2, 5, 5))
    b = rng.standard_normal(3)
    proj = rng.standard_normal((3, 6, 6))  # random linear functional of the output

    def loss_wrt(part):
        if part == "x":
            return lambda v: float((conv2d_forward(v, k, b) * proj).sum())
        if part == "k":
            return lambda v: float((conv2d_forward(x, v, b) * proj).sum())
        return lambda v: float((conv2d_forward(x, k, v) * proj).sum())

    gw, gb, gx = conv2d_backward(x, k, proj)
    assert max_rel_error(gx, finite_difference(loss_wrt("x"), x, FD_STEP)) <= 1e-6
    assert max_rel_error(gw, finite_difference(loss_wrt("k"), k, FD_STEP)) <= 1e-6
    assert max_rel_error(gb, finite_difference(loss_wrt("b"), b, FD_STEP)) <= 1e-6


def test_conv_backward_shape_mismatch():
    with pytest.raises(ValueError):
        conv2d_backward(np.zeros((1, 6, 6)), np.zeros((2, 1, 5, 5)), np.zeros((2, 5, 5)))


# -------------------------------------------------------------------- pooling

def test_maxpool_2x2():
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    out, arg = maxpool_forward(x, 2, 2)
    npt.assert_array_equal(out, [[[4.0]]])
    assert arg[0, 0, 0] == 3  # flat index of value 4 in the 2x2 plane


def test_maxpool_constant_ties_first_index():
    x = np.ones((1, 4, 4)) * 2.5
    out, arg = maxpool_forward(x, 2, 2)
    npt.assert_array_equal(out, np.full((1, 2, 2), 2.5))
    # first index of each window in row-major scan order
    npt.assert_array_equal(arg[0], [[0, 2], [8, 10]])


def test_maxpool_matches_brute_force():
    rng = make_rng(21)
    for _ in range(10):
        x = rng.standard_normal((2, 4, 4))
        out, arg = maxpool_forward(x, 2, 2)
        want_out, want_arg = naive_maxpool(x, 2, 2)
        npt.assert_array_equal(out, want_out)
        npt.assert_array_equal(arg, want_arg)
    x = rng.standard_normal((3, 16, 16))
    out, arg = maxpool_forward(x, 4, 4)
    want_out, want_arg = naive_maxpool(x, 4, 4)
    npt.assert_array_equal(out, want_out)
    npt.assert_array_equal(arg, want_arg)


def test_maxpool_rejects_non_divisible():
    with pytest.raises(ValueError):
        maxpool_forward(np.zeros((1, 5, 4)), 2, 2)
    with pytest.raises(ValueError):
        maxpool_forward(np.zeros((1, 4, 6)), 4, 4)


def test_maxpool_backward_trivial():
    grad_in = maxpool_backward(np.zeros((1, 2, 2), dtype=np.int64), np.zeros((1, 2, 2)), (4, 4))
    assert not grad_in.any()
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    _, arg = maxpool_forward(x, 2, 2)
    grad_in = maxpool_backward(arg, np.array([[[1.0]]]), (2, 2))
    npt.assert_array_equal(grad_in, [[[0.0, 0.0], [0.0, 1.0]]])


def test_maxpool_backward_matches_finite_differences():
    rng = make_rng(23)
    # integer-spaced values keep every window tie-free under the fd step
    x = rng.permutation(32).astype(np.float64).reshape(2, 4, 4)
    proj = rng.standard_normal((2, 2, 2))
    _, arg = maxpool_forward(x, 2, 2)
    got = maxpool_backward(arg, proj, (4, 4))

    def f(v):
        out, _ = maxpool_forward(v, 2, 2)
        return float((out * proj).sum())

    assert max_rel_error(got, finite_difference(f, x, FD_STEP)) <= 1e-6


def test_maxpool_backward_rejects_corrupt_indices():
    arg = np.array([[[0, 1], [2, 99]]], dtype=np.int64)
    with pytest.raises(ValueError):
        maxpool_backward(arg, np.ones((1, 2, 2)), (4, 4))


# ----------------------------------------------------------------------- relu

def test_relu_values():
    npt.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])


def test_relu_backward_values():
    got = relu_backward(np.array([-1.0, 2.0]), np.array([5.0, 5.0]))
    npt.assert_array_equal(got, [0.0, 5.0])


def test_relu_backward_matches_finite_differences():
    rng = make_rng(29)
    x = rng.standard_normal((3, 7))
    x[np.abs(x) < 1e-3] = 0.5  # stay away from the kink
    proj = rng.standard_normal((3, 7))
    got = relu_backward(x, proj)
    want = finite_difference(lambda v: float((relu(v) * proj).sum()), x, FD_STEP)
    assert max_rel_error(got, want) <= 1e-6


# ---------------------------------------------------------------------- dense

def test_dense_identity_and_bias():
    x = np.array([1.0, -2.0, 3.0])
    npt.assert_array_equal(dense_forward(x, np.eye(3), np.zeros(3)), x)
    b = np.array([0.5, -0.5])
    npt.assert_array_equal(dense_forward(np.zeros(3), np.zeros((2, 3)), b), b)


def test_dense_backward_matches_finite_differences():
    rng = make_rng(31)
    x = rng.standard_normal(4)
    w = rng.standard_normal((3, 4))
    b = rng.standard_normal(3)
    proj = rng.standard_normal(3)
    gw, gb, gx = dense_backward(x, w, proj)
    assert max_rel_error(
        gx, finite_difference(lambda v: float(dense_forward(v, w, b) @ proj), x, FD_STEP)
    ) <= 1e-6
    assert max_rel_error(
        gw, finite_difference(lambda v: float(dense_forward(x, v, b) @ proj), w, FD_STEP)
    ) <= 1e-6
    assert max_rel_error(
        gb, finite_difference(lambda v: float(dense_forward(x, w, v) @ proj), b, FD_STEP)
    ) <= 1e-6


def test_dense_shape_mismatch():
    with pytest.raises(ValueError):
        dense_forward(np.zeros(4), np.zeros((3, 5)), np.zeros(3))
    with pytest.raises(ValueError):
        dense_forward(np.zeros(5), np.zeros((3, 5)), np.zeros(4))


# -------------------------------------------------------------------- softmax

def test_softmax_uniform_logits():
    loss, grad = softmax_cross_entropy(np.zeros(10), 4)
    npt.assert_allclose(loss, np.log(10.0), rtol=1e-12)
    npt.assert_allclose(grad, np.full(10, 0.1) - np.eye(10)[4], atol=1e-12)


def test_softmax_saturated_true_class():
    logits = np.zeros(10)
    logits[7] = 1000.0
    loss, grad = softmax_cross_entropy(logits, 7)
    assert loss <= 1e-12
    assert np.abs(grad).max() <= 1e-12


def test_softmax_label_out_of_range():
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros(10), 10)
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros(10), -1)


def test_softmax_grad_matches_finite_differences():
    rng = make_rng(37)
    logits = rng.standard_normal(10)
    _, grad = softmax_cross_entropy(logits, 2)
    want = finite_difference(
        lambda v: softmax_cross_entropy(v, 2)[0], logits, FD_STEP
    )
    assert max_rel_error(grad, want) <= 1e-6


def test_softmax_batch_agrees_with_single():
    rng = make_rng(41)
    logits = rng.standard_normal((6, 10))
    labels = rng.integers(0, 10, size=6)
    losses, grads = softmax_cross_entropy_batch(logits, labels)
    for i in range(6):
        loss_i, grad_i = softmax_cross_entropy(logits[i], int(labels[i]))
        npt.assert_allclose(losses[i], loss_i, rtol=1e-12)
        npt.assert_allclose(grads[i], grad_i, atol=1e-12)
    with pytest.raises(ValueError):
        softmax_cross_entropy_batch(logits, np.array([0, 1, 2, 3, 4, 10]))


# ------------------------------------------------------------------- cholesky

def test_cholesky_identity():
    npt.assert_array_equal(cholesky(np.eye(4)), np.eye(4))


def test_cholesky_known_2x2():
    got = cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
    npt.assert_allclose(got, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], rtol=1e-15)
    npt.assert_allclose(got @ got.T, [[4.0, 2.0], [2.0, 3.0]], rtol=1e-15)


def test_cholesky_matches_numpy_on_random_spd():
    rng = make_rng(43)
    for n in (3, 8, 25):
        a = rng.standard_normal((n, n))
        spd = a @ a.T + n * np.eye(n)
        got = cholesky(spd)
        npt.assert_allclose(got, np.linalg.cholesky(spd), rtol=1e-10, atol=1e-12)
        rel = np.linalg.norm(got @ got.T - spd) / np.linalg.norm(spd)
        assert rel <= 1e-10
        assert np.all(np.triu(got, 1) == 0)
        assert np.all(np.diag(got) > 0)


def test_cholesky_reports_failing_pivot():
    bad = np.diag([1.0, 1.0, -0.5, 1.0])
    with pytest.raises(NotPositiveDefiniteError) as exc:
        cholesky(bad)
    assert exc.value.pivot == 2
    assert "pivot 2" in str(exc.value)


def test_cholesky_rejects_asymmetric():
    m = np.array([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(ValueError):
        cholesky(m)


# ------------------------------------------------------------------ contracts

def test_operations_do_not_mutate_inputs():
    rng = make_rng(47)
    x = rng.standard_normal((2, 8, 8))
    k = rng.standard_normal((3, 2, 5, 5))
    b = rng.standard_normal(3)
    g = rng.standard_normal((3, 8, 8))
    snap = (x.copy(), k.copy(), b.copy(), g.copy())
    conv2d_forward(x, k, b)
    conv2d_backward(x, k, g)
    out, arg = maxpool_forward(x, 2, 2)
    maxpool_backward(arg, np.ones_like(out), (8, 8))
    relu(x)
    relu_backward(x, g[:2, :, :] if g.shape[0] >= 2 else g)
    npt.assert_array_equal(x, snap[0])
    npt.assert_array_equal(k, snap[1])
    npt.assert_array_equal(b, snap[2])
    npt.assert_array_equal(g, snap[3])


def test_operations_finite_on_finite_inputs():
    rng = make_rng(53)
    x = rng.standard_normal((1, 8, 8)) * 1e3
    k = rng.standard_normal((4, 1, 5, 5)) * 1e3
    out = conv2d_forward(x, k, np.zeros(4))
    assert np.isfinite(out).all()
    loss, grad = softmax_cross_entropy(np.array([1e4, -1e4, 0.0]), 1)
    assert np.isfinite(loss) and np.isfinite(grad).all()
