"""Shared test image constructors and masks."""

import numpy as np

from skymatch.core import ImageBuffer


def gray_image(value: int, side: int = 16) -> ImageBuffer:
    return ImageBuffer.from_array(np.full((side, side, 3), value, dtype=np.uint8))


def zero_bias_noise_image(base: int, side: int, rng: np.random.Generator,
                          amplitude: int = 20) -> ImageBuffer:
    """Noisy image whose channel means are exactly ``base``.

    Noise comes in +d/-d pixel pairs per channel, so channel sums (and hence
    means, luminance and biases) are exact by construction.
    """
    assert side % 2 == 0
    n = side * side
    arr = np.full((n, 3), base, dtype=np.int64)
    d = rng.integers(1, amplitude + 1, size=(n // 2, 3))
    arr[0::2] += d
    arr[1::2] -= d
    assert arr.min() >= 0 and arr.max() <= 255
    return ImageBuffer.from_array(arr.reshape(side, side, 3).astype(np.uint8))


def red_biased_image(red_bias: int, side: int, rng: np.random.Generator,
                     base: int = 128, amplitude: int = 20) -> ImageBuffer:
    """Image with channel means exactly (base+b, base-b/2, base-b/2).

    Mean luminance stays exactly ``base``; the red channel carries bias +b.
    ``red_bias`` must be even.
    """
    assert red_bias % 2 == 0 and red_bias > 0
    assert side % 2 == 0
    n = side * side
    arr = np.full((n, 3), base, dtype=np.int64)
    arr[:, 0] += red_bias
    arr[:, 1] -= red_bias // 2
    arr[:, 2] -= red_bias // 2
    d = rng.integers(1, amplitude + 1, size=(n // 2, 3))
    arr[0::2] += d
    arr[1::2] -= d
    assert arr.min() >= 0 and arr.max() <= 255
    return ImageBuffer.from_array(arr.reshape(side, side, 3).astype(np.uint8))


def gradient_image(side: int = 64) -> ImageBuffer:
    """Smooth linear gradients per channel (bilinear-friendly test content)."""
    ramp = np.linspace(0.0, 255.0, side)
    r = np.tile(ramp, (side, 1))
    g = r.T
    b = (r + g) / 2.0
    arr = np.stack([r, g, b], axis=-1)
    return ImageBuffer.from_array(np.rint(arr).astype(np.uint8))


def structured_image(side: int = 64, seed: int = 9) -> ImageBuffer:
    """Gradient plus an off-center bright square: rotationally asymmetric."""
    img = gradient_image(side).data.copy()
    rng = np.random.default_rng(seed)
    s = side // 6
    y0 = side // 4
    x0 = side // 2 + side // 8
    img[y0:y0 + s, x0:x0 + s] = rng.integers(180, 255, size=3, dtype=np.uint8)
    return ImageBuffer.from_array(img)


def inside_circle_mask(side: int, frac: float = 1.0) -> np.ndarray:
    """Boolean (side, side) mask of pixels strictly inside radius frac*(side/2)."""
    c = (side - 1) / 2.0
    ax = np.arange(side, dtype=np.float64) - c
    r2 = ax[None, :] ** 2 + ax[:, None] ** 2
    return r2 < (frac * side / 2.0) ** 2


def per_channel_mad(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    """Largest per-channel mean absolute difference inside the mask."""
    diff = np.abs(a.astype(np.float64) - b.astype(np.float64))[mask]
    return float(diff.mean(axis=0).max())
