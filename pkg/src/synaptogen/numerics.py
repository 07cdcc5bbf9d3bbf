"""Dense float64 tensor primitives for a small convolutional network.

Every operation is a pure function over numpy float64 arrays: inputs are
never mutated, and equal inputs produce equal outputs.  Spatial ops accept
either a single image ``[C, H, W]`` or a batch ``[N, C, H, W]`` and mirror
the input rank on output.  Gradients are exact (they match central finite
differences away from non-differentiable points; see the test suite).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "NotPositiveDefiniteError",
    "make_rng",
    "fnv1a64",
    "derive_seed",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool_forward",
    "maxpool_backward",
    "relu",
    "relu_backward",
    "dense_forward",
    "dense_backward",
    "softmax_cross_entropy",
    "softmax_cross_entropy_batch",
    "cholesky",
]

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class NotPositiveDefiniteError(ValueError):
    """Raised by :func:`cholesky` when a pivot is not strictly positive."""

    def __init__(self, pivot: int, value: float):
        self.pivot = pivot
        self.value = value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot} has value {value:.6e}"
        )


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator for the given 64-bit seed.

    Backed by numpy's PCG64; ``standard_normal`` draws use numpy's ziggurat
    transform of uniform draws.  The same seed always yields the same draw
    sequence within one build of this package (cross-build bit equality is
    not promised).
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(seed)


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def derive_seed(*parts) -> int:
    """Stable 64-bit seed derived from the given parts.

    Parts are stringified and joined with a separator before hashing with
    FNV-1a, so ``derive_seed(base, "mnist", "normal", 0)`` is reproducible
    across processes (unlike the salted builtin ``hash``).
    """
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return fnv1a64(blob)


def _as_batch(x: np.ndarray, rank: int, what: str):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == rank - 1:
        return x[None], True
    if x.ndim == rank:
        return x, False
    raise ValueError(
        f"{what} must have {rank - 1} or {rank} dimensions, got shape {x.shape}"
    )


def _shown(x: np.ndarray, single: bool) -> tuple:
    """Caller-visible shape for diagnostics (undo the batch promotion)."""
    return x.shape[1:] if single else x.shape


def conv2d_forward(x, kernels, biases, pad: int = 2) -> np.ndarray:
    """Cross-correlate ``x`` with a kernel bank under zero padding.

    ``x`` is ``[C, H, W]`` or ``[N, C, H, W]``; ``kernels`` is
    ``[K, C, kh, kw]``; ``biases`` is ``[K]``.  With ``pad = 2`` and 5x5
    kernels the output spatial size equals the input spatial size:

        out[k, y, x] = bias[k] + sum_{c,u,v} in[c, y+u-pad, x+v-pad] * W[k,c,u,v]
    """
    x, single = _as_batch(x, 4, "input")
    kernels = np.asarray(kernels, dtype=np.float64)
    biases = np.asarray(biases, dtype=np.float64)
    if kernels.ndim != 4:
        raise ValueError(f"kernels must be [K,C,kh,kw], got shape {kernels.shape}")
    n, c, h, w = x.shape
    k, ck, kh, kw = kernels.shape
    if ck != c:
        raise ValueError(
            f"input shape {_shown(x, single)} does not match kernel shape {kernels.shape}"
        )
    if biases.shape != (k,):
        raise ValueError(
            f"biases shape {biases.shape} does not match kernel count {kernels.shape}"
        )
    if pad < 0:
        raise ValueError(f"pad must be non-negative, got {pad}")
    if h + 2 * pad < kh or w + 2 * pad < kw:
        raise ValueError(
            f"padded input {x.shape} (pad={pad}) smaller than kernels {kernels.shape}"
        )
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    # [N, C, OH, OW, kh, kw] view; einsum lowers to a BLAS matmul.
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    out = np.einsum("ncyxuv,kcuv->nkyx", windows, kernels, optimize=True)
    out += biases[None, :, None, None]
    return out[0] if single else out


def conv2d_backward(x, kernels, grad_out, pad: int = 2):
    """Gradients of ``sum(grad_out * conv2d_forward(x, kernels, b, pad))``.

    Returns ``(grad_kernels, grad_biases, grad_input)`` with the shapes of
    ``kernels``, the bias vector, and ``x`` respectively.
    """
    x, single = _as_batch(x, 4, "input")
    grad_out, gsingle = _as_batch(grad_out, 4, "grad_out")
    kernels = np.asarray(kernels, dtype=np.float64)
    if single != gsingle:
        raise ValueError(
            f"input shape {x.shape} and grad_out shape {grad_out.shape} disagree on batching"
        )
    n, c, h, w = x.shape
    k, ck, kh, kw = kernels.shape
    oh = h + 2 * pad - kh + 1
    ow = w + 2 * pad - kw + 1
    if ck != c or grad_out.shape != (n, k, oh, ow):
        raise ValueError(
            f"inconsistent shapes: input {_shown(x, single)}, kernels {kernels.shape}, "
            f"grad_out {_shown(grad_out, gsingle)}"
        )
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    grad_kernels = np.einsum("ncyxuv,nkyx->kcuv", windows, grad_out, optimize=True)
    grad_biases = grad_out.sum(axis=(0, 2, 3))
    # grad_input is a correlation of grad_out with the spatially flipped
    # kernels, channels and kernel axes swapped, at the complementary pad.
    flipped = np.ascontiguousarray(kernels[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    grad_input = conv2d_forward(grad_out, flipped, np.zeros(c), pad=kh - 1 - pad)
    if single:
        grad_input = grad_input[0]
    return grad_kernels, grad_biases, grad_input


def maxpool_forward(x, size: int, stride: int):
    """Max pooling with square windows.

    Returns ``(out, argmax)`` where ``argmax`` holds, per output cell, the
    flat index ``y * W + x`` of the selected source pixel in its input
    plane.  Ties go to the first maximum in row-major window scan order.
    """
    x, single = _as_batch(x, 4, "input")
    n, c, h, w = x.shape
    if size < 1 or stride < 1:
        raise ValueError(f"size and stride must be >= 1, got {size}, {stride}")
    if h < size or w < size or h % stride != 0 or w % stride != 0 \
            or (h - size) % stride != 0 or (w - size) % stride != 0:
        raise ValueError(
            f"spatial dims {h}x{w} not divisible for pooling size={size} stride={stride}"
        )
    oh = (h - size) // stride + 1
    ow = (w - size) // stride + 1
    windows = sliding_window_view(x, (size, size), axis=(2, 3))[:, :, ::stride, ::stride]
    flat = windows.reshape(n, c, oh, ow, size * size)
    local = flat.argmax(axis=-1)  # first occurrence wins: row-major in window
    out = np.take_along_axis(flat, local[..., None], axis=-1)[..., 0]
    wy, wx = local // size, local % size
    iy = np.arange(oh)[:, None] * stride + wy
    ix = np.arange(ow)[None, :] * stride + wx
    argmax = iy * w + ix
    if single:
        return out[0], argmax[0]
    return out, argmax


def maxpool_backward(argmax, grad_out, input_hw) -> np.ndarray:
    """Scatter ``grad_out`` back to the argmax positions of a prior forward.

    ``input_hw`` is the ``(H, W)`` of the pooled input; positions that were
    not selected receive zero gradient.
    """
    grad_out, single = _as_batch(grad_out, 4, "grad_out")
    argmax = np.asarray(argmax)
    if argmax.ndim == 3:
        argmax = argmax[None]
    if argmax.shape != grad_out.shape:
        raise ValueError(
            f"argmax shape {argmax.shape} does not match grad_out shape {grad_out.shape}"
        )
    h, w = input_hw
    if argmax.size and (argmax.min() < 0 or argmax.max() >= h * w):
        raise ValueError(
            f"argmax indices out of range for input plane {h}x{w}: corrupted state"
        )
    n, c = grad_out.shape[:2]
    grad_in = np.zeros((n, c, h * w))
    np.add.at(
        grad_in,
        (
            np.arange(n)[:, None, None, None],
            np.arange(c)[None, :, None, None],
            argmax,
        ),
        grad_out,
    )
    grad_in = grad_in.reshape(n, c, h, w)
    return grad_in[0] if single else grad_in


def relu(x) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(x, grad_out) -> np.ndarray:
    """Pass gradient where x > 0; subgradient 0 at x == 0."""
    x = np.asarray(x, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if x.shape != grad_out.shape:
        raise ValueError(f"input shape {x.shape} != grad shape {grad_out.shape}")
    return np.where(x > 0.0, grad_out, 0.0)


def dense_forward(x, weights, bias) -> np.ndarray:
    """Affine layer ``y = W @ x + b`` for ``x`` of shape [n_in] or [N, n_in]."""
    x, single = _as_batch(x, 2, "input")
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    n_out, n_in = weights.shape
    if x.shape[1] != n_in or bias.shape != (n_out,):
        raise ValueError(
            f"shape mismatch: input {x.shape}, weights {weights.shape}, bias {bias.shape}"
        )
    y = x @ weights.T + bias
    return y[0] if single else y


def dense_backward(x, weights, grad_out):
    """Gradients of ``sum(grad_out * dense_forward(x, W, b))``.

    Returns ``(grad_weights, grad_bias, grad_x)``: the outer product
    ``grad_y (x) x`` (summed over the batch), the summed grad, and
    ``W^T @ grad_y``.
    """
    x, single = _as_batch(x, 2, "input")
    grad_out, gsingle = _as_batch(grad_out, 2, "grad_out")
    weights = np.asarray(weights, dtype=np.float64)
    n_out, n_in = weights.shape
    if single != gsingle or x.shape[1] != n_in or grad_out.shape[1] != n_out:
        raise ValueError(
            f"shape mismatch: input {x.shape}, weights {weights.shape}, "
            f"grad_out {grad_out.shape}"
        )
    grad_weights = grad_out.T @ x
    grad_bias = grad_out.sum(axis=0)
    grad_x = grad_out @ weights
    return grad_weights, grad_bias, grad_x[0] if single else grad_x


def softmax_cross_entropy(logits, label: int):
    """Cross-entropy of softmax(logits) against an integer class label.

    Uses max-subtraction for stability.  Returns ``(loss, grad_logits)``
    where ``grad_logits = softmax(logits) - onehot(label)``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ValueError(f"logits must be a vector, got shape {logits.shape}")
    n = logits.shape[0]
    if not 0 <= label < n:
        raise ValueError(f"label {label} out of range [0, {n})")
    shifted = logits - logits.max()
    log_z = np.log(np.exp(shifted).sum())
    loss = log_z - shifted[label]
    grad = np.exp(shifted - log_z)
    grad[label] -= 1.0
    return float(loss), grad


def softmax_cross_entropy_batch(logits, labels):
    """Batched cross-entropy: per-sample losses and gradient of their sum.

    ``logits`` is [N, n_classes], ``labels`` is [N] integer classes.
    Returns ``(losses, grad_logits)`` with ``losses`` of shape [N].
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ValueError(
            f"shape mismatch: logits {logits.shape}, labels {labels.shape}"
        )
    n, k = logits.shape
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels out of range [0, {k})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    losses = log_z - shifted[rows, labels]
    grad = np.exp(shifted - log_z[:, None])
    grad[rows, labels] -= 1.0
    return losses, grad


def cholesky(cov) -> np.ndarray:
    """Lower-triangular L with L @ L.T == cov (Cholesky-Banachiewicz).

    ``cov`` must be square and exactly symmetric; any diagonal jitter is the
    caller's responsibility.  A non-positive pivot raises
    :class:`NotPositiveDefiniteError` carrying the failing pivot index.
    """
    a = np.asarray(cov, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"covariance must be square, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise ValueError("covariance must be symmetric")
    n = a.shape[0]
    ell = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - ell[j, :j] @ ell[j, :j]
        if d <= 0.0:
            raise NotPositiveDefiniteError(j, float(d))
        ell[j, j] = np.sqrt(d)
        if j + 1 < n:
            ell[j + 1 :, j] = (a[j + 1 :, j] - ell[j + 1 :, :j] @ ell[j, :j]) / ell[j, j]
    return ell
