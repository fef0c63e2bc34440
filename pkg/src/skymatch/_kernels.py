"""Hot numeric kernels, each as a numba @njit loop with a pure-numpy twin.

The twins execute identical scalar operations in identical per-element order
(float32 accumulation over (ci, ky, kx) for the convolution, one fixed
expression tree for resampling), so outputs are bit-identical across
backends; tests assert this. Selection happens per call via accel.dispatch.
"""

from __future__ import annotations

import numpy as np

from . import accel

_F0 = np.float32(0.0)
_QUARTER = np.float32(0.25)


# ---------------------------------------------------------------------------
# 3x3 convolution (valid, on pre-padded input) followed by ReLU
# ---------------------------------------------------------------------------

def _conv3x3_relu_numpy(xp: np.ndarray, w: np.ndarray) -> np.ndarray:
    c_in = w.shape[1]
    h = xp.shape[1] - 2
    wd = xp.shape[2] - 2
    acc = np.zeros((w.shape[0], h, wd), dtype=np.float32)
    for ci in range(c_in):
        for ky in range(3):
            for kx in range(3):
                acc += w[:, ci, ky, kx, None, None] * xp[ci, ky:ky + h, kx:kx + wd]
    return np.maximum(acc, _F0)


def _conv3x3_relu_loops(xp, w):
    c_out = w.shape[0]
    c_in = w.shape[1]
    h = xp.shape[1] - 2
    wd = xp.shape[2] - 2
    out = np.empty((c_out, h, wd), dtype=np.float32)
    for co in range(c_out):
        for y in range(h):
            for x in range(wd):
                acc = np.float32(0.0)
                for ci in range(c_in):
                    for ky in range(3):
                        for kx in range(3):
                            acc += w[co, ci, ky, kx] * xp[ci, y + ky, x + kx]
                if acc < np.float32(0.0):
                    acc = np.float32(0.0)
                out[co, y, x] = acc
    return out


# ---------------------------------------------------------------------------
# 2x2 average pooling, stride 2 (odd trailing row/col dropped)
# ---------------------------------------------------------------------------

def _avgpool2x2_numpy(x: np.ndarray) -> np.ndarray:
    ho = x.shape[1] // 2
    wo = x.shape[2] // 2
    a = x[:, 0:2 * ho:2, 0:2 * wo:2]
    b = x[:, 0:2 * ho:2, 1:2 * wo:2]
    c = x[:, 1:2 * ho:2, 0:2 * wo:2]
    d = x[:, 1:2 * ho:2, 1:2 * wo:2]
    return (((a + b) + c) + d) * _QUARTER


def _avgpool2x2_loops(x):
    ho = x.shape[1] // 2
    wo = x.shape[2] // 2
    out = np.empty((x.shape[0], ho, wo), dtype=np.float32)
    for c in range(x.shape[0]):
        for y in range(ho):
            for xo in range(wo):
                acc = ((x[c, 2 * y, 2 * xo] + x[c, 2 * y, 2 * xo + 1])
                       + x[c, 2 * y + 1, 2 * xo]) + x[c, 2 * y + 1, 2 * xo + 1]
                out[c, y, xo] = acc * np.float32(0.25)
    return out


# ---------------------------------------------------------------------------
# Rotation resampling inside the inscribed circle
# ---------------------------------------------------------------------------
# Output pixel (x, y) samples the input at the point obtained by rotating
# (x, y) by -angle about the center ((n-1)/2, (n-1)/2); sample points at
# distance >= n/2 from the center (equivalently, output pixels outside the
# inscribed circle, since rotation about the center is an isometry) take the
# fill color. Bilinear weights use floor/frac; nearest uses floor(s + 0.5).

def _rotate_resample_numpy(src, cos_t, sin_t, bilinear, fill):
    n = src.shape[0]
    c = (n - 1) / 2.0
    r2max = (n / 2.0) * (n / 2.0)
    ax = np.arange(n, dtype=np.float64)
    dxg = (ax - c)[None, :]
    dyg = (ax - c)[:, None]
    inside = dxg * dxg + dyg * dyg < r2max
    sx = c + cos_t * dxg - sin_t * dyg
    sy = c + sin_t * dxg + cos_t * dyg
    sf = src.astype(np.float64)
    if bilinear:
        x0 = np.floor(sx)
        y0 = np.floor(sy)
        fx = (sx - x0)[..., None]
        fy = (sy - y0)[..., None]
        x0i = np.clip(x0.astype(np.int64), 0, n - 1)
        x1i = np.clip(x0i + 1, 0, n - 1)
        y0i = np.clip(y0.astype(np.int64), 0, n - 1)
        y1i = np.clip(y0i + 1, 0, n - 1)
        p00 = sf[y0i, x0i]
        p01 = sf[y0i, x1i]
        p10 = sf[y1i, x0i]
        p11 = sf[y1i, x1i]
        v = (p00 * (1.0 - fx) + p01 * fx) * (1.0 - fy) + (p10 * (1.0 - fx) + p11 * fx) * fy
        out = np.minimum(np.maximum(np.floor(v + 0.5), 0.0), 255.0).astype(np.uint8)
    else:
        xi = np.clip(np.floor(sx + 0.5).astype(np.int64), 0, n - 1)
        yi = np.clip(np.floor(sy + 0.5).astype(np.int64), 0, n - 1)
        out = src[yi, xi].copy()
    out[~inside] = fill
    return out


def _rotate_resample_loops(src, cos_t, sin_t, bilinear, fill):
    n = src.shape[0]
    c = (n - 1) / 2.0
    r2max = (n / 2.0) * (n / 2.0)
    out = np.empty_like(src)
    for y in range(n):
        for x in range(n):
            dx = x - c
            dy = y - c
            if dx * dx + dy * dy >= r2max:
                out[y, x, 0] = fill[0]
                out[y, x, 1] = fill[1]
                out[y, x, 2] = fill[2]
                continue
            sx = c + cos_t * dx - sin_t * dy
            sy = c + sin_t * dx + cos_t * dy
            if bilinear:
                x0 = np.floor(sx)
                y0 = np.floor(sy)
                fx = sx - x0
                fy = sy - y0
                x0i = min(max(int(x0), 0), n - 1)
                x1i = min(max(x0i + 1, 0), n - 1)
                y0i = min(max(int(y0), 0), n - 1)
                y1i = min(max(y0i + 1, 0), n - 1)
                for ch in range(3):
                    p00 = np.float64(src[y0i, x0i, ch])
                    p01 = np.float64(src[y0i, x1i, ch])
                    p10 = np.float64(src[y1i, x0i, ch])
                    p11 = np.float64(src[y1i, x1i, ch])
                    v = (p00 * (1.0 - fx) + p01 * fx) * (1.0 - fy) \
                        + (p10 * (1.0 - fx) + p11 * fx) * fy
                    q = min(max(np.floor(v + 0.5), 0.0), 255.0)
                    out[y, x, ch] = np.uint8(q)
            else:
                xi = min(max(int(np.floor(sx + 0.5)), 0), n - 1)
                yi = min(max(int(np.floor(sy + 0.5)), 0), n - 1)
                out[y, x, 0] = src[yi, xi, 0]
                out[y, x, 1] = src[yi, xi, 1]
                out[y, x, 2] = src[yi, xi, 2]
    return out


if accel.HAVE_NUMBA:
    from numba import njit

    _jit = njit(cache=True, nogil=True)
    _conv3x3_relu_numba = _jit(_conv3x3_relu_loops)
    _avgpool2x2_numba = _jit(_avgpool2x2_loops)
    _rotate_resample_numba = _jit(_rotate_resample_loops)
else:  # pragma: no cover
    _conv3x3_relu_numba = None
    _avgpool2x2_numba = None
    _rotate_resample_numba = None

conv3x3_relu = accel.dispatch(_conv3x3_relu_numpy, _conv3x3_relu_numba)
avgpool2x2 = accel.dispatch(_avgpool2x2_numpy, _avgpool2x2_numba)
rotate_resample = accel.dispatch(_rotate_resample_numpy, _rotate_resample_numba)


def warm_up() -> None:
    """Trigger JIT compilation of all kernels (no-op on the numpy backend)."""
    if accel.active() != "numba":
        return
    xp = np.zeros((1, 4, 4), dtype=np.float32)
    w = np.zeros((1, 1, 3, 3), dtype=np.float32)
    _conv3x3_relu_numba(xp, w)
    _avgpool2x2_numba(np.zeros((1, 2, 2), dtype=np.float32))
    img = np.zeros((4, 4, 3), dtype=np.uint8)
    fill = np.zeros(3, dtype=np.uint8)
    _rotate_resample_numba(img, 1.0, 0.0, True, fill)
    _rotate_resample_numba(img, 1.0, 0.0, False, fill)
