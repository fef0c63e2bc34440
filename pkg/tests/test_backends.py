"""The numba kernels and their numpy twins must agree bit for bit."""

import numpy as np
import pytest

from helpers import gradient_image
from skymatch import accel
from skymatch.core import ImageBuffer
from skymatch.dataset import SceneParams, StyleJitter, generate_scene_set
from skymatch.features import ToyExtractorConfig, extract
from skymatch.pipeline import PipelineConfig, run_ablation
from skymatch.spatial import RotationPolicy, rotate

needs_numba = pytest.mark.skipif(not accel.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def forced_backend():
    """Restore env/auto resolution after each test."""
    yield accel.set_backend
    accel.set_backend(None)


def test_backend_resolution(forced_backend, monkeypatch):
    forced_backend("numpy")
    assert accel.active() == "numpy"
    forced_backend(None)
    monkeypatch.setenv(accel.ENV_VAR, "numpy")
    assert accel.active() == "numpy"
    monkeypatch.delenv(accel.ENV_VAR)
    assert accel.active() in ("numba", "numpy")


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        accel.set_backend("gpu")


@needs_numba
def test_extract_bit_identical_across_backends(forced_backend):
    rng = np.random.default_rng(41)
    img = ImageBuffer(rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8))
    cfg = ToyExtractorConfig(seed=13)
    forced_backend("numba")
    a = extract(img, cfg)
    forced_backend("numpy")
    b = extract(img, cfg)
    assert np.array_equal(a.data, b.data)


@needs_numba
@pytest.mark.parametrize("interp", ["nearest", "bilinear"])
@pytest.mark.parametrize("angle", [0.0, 33.3, 90.0, -120.5])
def test_rotate_bit_identical_across_backends(forced_backend, interp, angle):
    img = gradient_image(47)
    policy = RotationPolicy(interpolation=interp, fill=(3, 2, 1))
    forced_backend("numba")
    a = rotate(img, angle, policy)
    forced_backend("numpy")
    b = rotate(img, angle, policy)
    assert a.same_pixels(b)


@needs_numba
def test_ablation_table_identical_across_backends(forced_backend, tmp_path):
    params = SceneParams(
        seed=31, num_classes=3, views_per_class=2,
        style_jitter=StyleJitter(0.2, 0.2),
    )
    manifest = generate_scene_set(params, tmp_path / "data")
    cfg = PipelineConfig()
    forced_backend("numba")
    with_numba = run_ablation(manifest, cfg, jobs=1)
    forced_backend("numpy")
    with_numpy = run_ablation(manifest, cfg, jobs=1)
    assert with_numba.table == with_numpy.table
    assert with_numba.records == with_numpy.records
