import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skymatch.core import (
    FeatureMap,
    ImageBuffer,
    SplitMix64,
    clip_channel,
    derive_seed,
    ensure_vector,
    luminance,
    quantize_channels,
    uniform_draws,
)


class TestLuminance:
    def test_zero(self):
        assert luminance((0, 0, 0)) == 0.0

    def test_saturation(self):
        assert luminance((255, 255, 255)) == 255.0

    def test_mixed(self):
        # (200 + 100 + 60) / 3 = 120
        assert luminance((200, 100, 60)) == 120.0

    @given(st.permutations([17, 200, 99]))
    def test_permutation_invariant(self, channels):
        assert luminance(channels) == luminance((17, 200, 99))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            luminance((256, 0, 0))
        with pytest.raises(ValueError):
            luminance((-1, 0, 0))


class TestClipChannel:
    @pytest.mark.parametrize(
        "value, expected",
        [
            (300.2, 255),   # upper clamp
            (-5.0, 0),      # lower clamp
            (127.5, 128),   # half away from zero
            (0.5, 1),
            (-0.4, 0),
            (126.4999, 126),
            (255.0, 255),
            (0.0, 0),
        ],
    )
    def test_examples(self, value, expected):
        assert clip_channel(value) == expected

    def test_rejects_non_finite(self):
        for bad in (float("nan"), float("inf"), float("-inf")):
            with pytest.raises(ValueError):
                clip_channel(bad)

    @given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
    def test_idempotent(self, v):
        once = clip_channel(v)
        assert clip_channel(float(once)) == once

    @given(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
    )
    def test_monotone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert clip_channel(lo) <= clip_channel(hi)

    def test_quantize_matches_scalar(self):
        rng = np.random.default_rng(11)
        vals = rng.uniform(-50, 305, size=256)
        got = quantize_channels(vals)
        expected = np.array([clip_channel(float(v)) for v in vals], dtype=np.uint8)
        assert np.array_equal(got, expected)

    def test_quantize_rejects_nan(self):
        with pytest.raises(ValueError):
            quantize_channels(np.array([1.0, np.nan]))


class TestSplitMix64:
    def test_vectorized_matches_incremental(self):
        stream = SplitMix64(987654321)
        seq = [stream.next_uniform(-0.1, 0.1) for _ in range(64)]
        vec = uniform_draws(987654321, 64, -0.1, 0.1)
        assert np.array_equal(np.array(seq), vec)

    def test_next_float_range(self):
        stream = SplitMix64(3)
        for _ in range(100):
            f = stream.next_float()
            assert 0.0 <= f < 1.0

    def test_next_below(self):
        stream = SplitMix64(5)
        draws = {stream.next_below(8) for _ in range(200)}
        assert draws <= set(range(8))
        assert len(draws) > 1
        with pytest.raises(ValueError):
            stream.next_below(0)

    def test_reproducible(self):
        assert SplitMix64(42).next_u64() == SplitMix64(42).next_u64()
        assert SplitMix64(42).next_u64() != SplitMix64(43).next_u64()

    def test_derive_seed_distinct_and_stable(self):
        a = derive_seed(7, 1, 2)
        assert a == derive_seed(7, 1, 2)
        assert a != derive_seed(7, 2, 1)
        assert a != derive_seed(8, 1, 2)

    def test_uniform_draws_empty(self):
        assert uniform_draws(1, 0, 0.0, 1.0).size == 0


class TestImageBuffer:
    def test_valid(self):
        img = ImageBuffer.from_array(np.zeros((4, 6, 3), dtype=np.uint8))
        assert img.width == 6 and img.height == 4 and img.num_pixels == 24

    def test_rejects_wrong_dtype(self):
        with pytest.raises(ValueError):
            ImageBuffer(np.zeros((2, 2, 3), dtype=np.float32))

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            ImageBuffer(np.zeros((2, 2), dtype=np.uint8))
        with pytest.raises(ValueError):
            ImageBuffer(np.zeros((2, 2, 4), dtype=np.uint8))

    def test_immutable(self):
        img = ImageBuffer.from_array(np.zeros((2, 2, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1

    def test_same_pixels(self):
        a = ImageBuffer.from_array(np.full((2, 2, 3), 7, dtype=np.uint8))
        b = ImageBuffer.from_array(np.full((2, 2, 3), 7, dtype=np.uint8))
        c = ImageBuffer.from_array(np.full((2, 2, 3), 8, dtype=np.uint8))
        assert a.same_pixels(b) and not a.same_pixels(c)


class TestFeatureMap:
    def test_valid(self):
        fm = FeatureMap.from_array(np.ones((2, 3, 4), dtype=np.float32))
        assert (fm.channels, fm.height, fm.width) == (2, 3, 4)

    def test_rejects_nan(self):
        bad = np.ones((1, 2, 2), dtype=np.float32)
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            FeatureMap(bad)

    def test_rejects_wrong_dtype(self):
        with pytest.raises(ValueError):
            FeatureMap(np.ones((1, 2, 2), dtype=np.float64))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            FeatureMap(np.zeros((0, 2, 2), dtype=np.float32))

    def test_immutable(self):
        fm = FeatureMap.from_array(np.ones((1, 2, 2), dtype=np.float32))
        with pytest.raises(ValueError):
            fm.data[0, 0, 0] = 2.0


class TestEnsureVector:
    def test_dim_check(self):
        v = ensure_vector([1.0, 2.0], dim=2)
        assert v.dtype == np.float64
        with pytest.raises(ValueError):
            ensure_vector([1.0, 2.0], dim=3)

    def test_rejects_matrix_and_nan(self):
        with pytest.raises(ValueError):
            ensure_vector(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            ensure_vector([1.0, float("nan")])
