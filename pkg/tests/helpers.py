"""Shared independent oracles: naive loops and finite differences.

These deliberately avoid the vectorized code paths in the library so that
agreement between the two is evidence, not tautology.
"""

import numpy as np


def naive_conv2d(x, kernels, biases, pad):
    """Reference convolution: six nested Python loops, zero padding."""
    c_in, h, w = x.shape
    k, ck, kh, kw = kernels.shape
    assert ck == c_in
    oh = h + 2 * pad - kh + 1
    ow = w + 2 * pad - kw + 1
    out = np.zeros((k, oh, ow))
    for ki in range(k):
        for y in range(oh):
            for xx in range(ow):
                acc = biases[ki]
                for c in range(c_in):
                    for u in range(kh):
                        for v in range(kw):
                            iy = y + u - pad
                            ix = xx + v - pad
                            if 0 <= iy < h and 0 <= ix < w:
                                acc += x[c, iy, ix] * kernels[ki, c, u, v]
                out[ki, y, xx] = acc
    return out


def naive_maxpool(x, size, stride):
    """Reference pooling: brute-force window scan per output cell."""
    c, h, w = x.shape
    oh = (h - size) // stride + 1
    ow = (w - size) // stride + 1
    out = np.zeros((c, oh, ow))
    arg = np.zeros((c, oh, ow), dtype=np.int64)
    for ci in range(c):
        for oy in range(oh):
            for ox in range(ow):
                best = -np.inf
                best_idx = -1
                for wy in range(size):
                    for wx in range(size):
                        iy = oy * stride + wy
                        ix = ox * stride + wx
                        if x[ci, iy, ix] > best:
                            best = x[ci, iy, ix]
                            best_idx = iy * w + ix
                out[ci, oy, ox] = best
                arg[ci, oy, ox] = best_idx
    return out, arg


def finite_difference(f, x, step=1e-5):
    """Central finite differences of scalar-valued f at array x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + step
        hi = f(x)
        xf[i] = orig - step
        lo = f(x)
        xf[i] = orig
        flat[i] = (hi - lo) / (2.0 * step)
    return grad


def max_rel_error(got, want, floor=1e-8):
    """Max elementwise |got - want| / max(|got|, |want|, floor)."""
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(got), np.abs(want)), floor)
    return float(np.max(np.abs(got - want) / denom))


def write_idx_pair(images, labels, images_path, labels_path):
    """Write a uint8 [N,H,W] image array and labels as an IDX file pair."""
    import struct

    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, h, w = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, h, w))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, n))
        fh.write(labels.tobytes())


def write_cifar_bin(images, labels, path):
    """Write uint8 [N,3,32,32] images + labels as CIFAR-10 binary records."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        for img, lab in zip(images, labels):
            fh.write(bytes([int(lab)]))
            fh.write(img.tobytes())


def blob_images(labels, side=28, seed=0, noise=20.0):
    """Synthetic learnable images: one bright class-specific patch + noise.

    Class c gets a 7x7 patch of value ~220 at a class-specific grid
    position on a noisy dark background, so even a tiny head separates the
    classes quickly.
    """
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    n = labels.shape[0]
    imgs = np.clip(rng.normal(30.0, noise, size=(n, side, side)), 0, 255)
    for i, lab in enumerate(labels):
        gy, gx = divmod(int(lab), 4)
        y0, x0 = 2 + gy * 6, 2 + gx * 6
        imgs[i, y0 : y0 + 7, x0 : x0 + 7] = np.clip(
            rng.normal(220.0, 10.0, size=(7, 7)), 0, 255
        )
    return imgs.astype(np.uint8)


def parse_pgm(path):
    """Read a binary (P5) 8-bit PGM and return the pixel matrix."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    assert fields[0] == b"P5"
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    assert maxval == 255
    pos += 1  # single whitespace byte after maxval
    pixels = np.frombuffer(data[pos : pos + width * height], dtype=np.uint8)
    assert pixels.size == width * height
    return pixels.reshape(height, width)
