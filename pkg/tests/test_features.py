import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from helpers import gray_image
from skymatch.core import FeatureMap, ImageBuffer
from skymatch.features import (
    BadMagicError,
    FeatureMapFormatError,
    NonFinitePayloadError,
    ToyExtractorConfig,
    TruncatedFileError,
    UnsupportedVersionError,
    extract,
    read_feature_map,
    read_vector,
    stage_weights,
    write_feature_map,
    write_vector,
)


def reference_splitmix_uniform(seed: int, count: int, lo: float, hi: float) -> list[float]:
    """Independent SplitMix64 reference (the published constants, verbatim)."""
    mask = (1 << 64) - 1
    state = seed & mask
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & mask
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & mask
        z ^= z >> 31
        u = (z >> 11) * 2.0 ** -53
        out.append(lo + u * (hi - lo))
    return out


class TestConfig:
    def test_defaults(self):
        cfg = ToyExtractorConfig()
        assert cfg.stages == 3 and cfg.min_side == 8

    def test_validation(self):
        with pytest.raises(ValueError):
            ToyExtractorConfig(channel_plan=())
        with pytest.raises(ValueError):
            ToyExtractorConfig(channel_plan=(4, 0))


class TestWeights:
    def test_shapes_and_order(self):
        cfg = ToyExtractorConfig(seed=77, channel_plan=(4, 6))
        ws = stage_weights(cfg)
        assert [w.shape for w in ws] == [(4, 3, 3, 3), (6, 4, 3, 3)]
        # the full draw sequence is one stream, consumed stage by stage in
        # row-major order
        expected = reference_splitmix_uniform(77, 4 * 3 * 9 + 6 * 4 * 9, -0.1, 0.1)
        flat = np.concatenate([w.reshape(-1) for w in ws])
        assert np.array_equal(flat, np.array(expected, dtype=np.float32))

    def test_range(self):
        ws = stage_weights(ToyExtractorConfig(seed=3))
        for w in ws:
            assert w.min() >= -0.1 and w.max() < 0.1


class TestExtract:
    def test_shape_contract_default(self):
        fm = extract(gray_image(100, side=64))
        assert (fm.channels, fm.height, fm.width) == (32, 8, 8)

    def test_shape_contract_256_default(self):
        # 256 / 2**3 = 32 cells per side at the default three stages
        fm = extract(gray_image(50, side=256))
        assert (fm.channels, fm.height, fm.width) == (32, 32, 32)

    def test_shape_contract_large(self):
        fm = extract(gray_image(50, side=256), ToyExtractorConfig(channel_plan=(2, 2, 2)))
        assert (fm.channels, fm.height, fm.width) == (2, 32, 32)

    def test_shape_floor_on_odd_sides(self):
        # floor(70 / 2**2) = 17 with two stages
        fm = extract(gray_image(10, side=70), ToyExtractorConfig(channel_plan=(2, 3)))
        assert (fm.channels, fm.height, fm.width) == (3, 17, 17)

    def test_zero_input_gives_zero_output(self):
        fm = extract(gray_image(0, side=32))
        assert not fm.data.any()

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        img = ImageBuffer(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8))
        a = extract(img, ToyExtractorConfig(seed=9))
        b = extract(img, ToyExtractorConfig(seed=9))
        assert np.array_equal(a.data, b.data)
        c = extract(img, ToyExtractorConfig(seed=10))
        assert not np.array_equal(a.data, c.data)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            extract(gray_image(10, side=7))

    def test_non_square_rejected(self):
        img = ImageBuffer(np.zeros((16, 32, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            extract(img)


class TestFmapFormat:
    def test_header_layout_single_value(self, tmp_path):
        path = tmp_path / "one.fmap"
        write_feature_map(FeatureMap.from_array(np.zeros((1, 1, 1), np.float32)), path)
        raw = path.read_bytes()
        # magic(4) + version u16(2) + three u32 dims(12) + one float32(4)
        assert len(raw) == 22
        assert raw[:4] == b"FMAP"
        assert struct.unpack_from("<H", raw, 4)[0] == 1
        assert struct.unpack_from("<III", raw, 6) == (1, 1, 1)
        assert raw[-4:] == b"\x00\x00\x00\x00"

    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(4)
        fm = FeatureMap.from_array(rng.normal(size=(3, 5, 4)).astype(np.float32))
        path = tmp_path / "t.fmap"
        write_feature_map(fm, path)
        back = read_feature_map(path)
        assert np.array_equal(back.data, fm.data)

    @settings(max_examples=30, deadline=None)
    @given(
        arr=arrays(
            np.float32,
            st.tuples(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4)),
            elements=st.floats(-1e6, 1e6, width=32),
        )
    )
    def test_roundtrip_property(self, tmp_path_factory, arr):
        fm = FeatureMap.from_array(arr)
        path = tmp_path_factory.mktemp("fmap") / "p.fmap"
        write_feature_map(fm, path)
        assert np.array_equal(read_feature_map(path).data, fm.data)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.fmap"
        path.write_bytes(b"NOPE" + b"\x00" * 30)
        with pytest.raises(BadMagicError, match="not a feature map file"):
            read_feature_map(path)

    def test_truncated_variants(self, tmp_path):
        good = tmp_path / "good.fmap"
        write_feature_map(FeatureMap.from_array(np.ones((2, 2, 2), np.float32)), good)
        raw = good.read_bytes()
        for cut in (2, 5, 10, 17, len(raw) - 1):
            p = tmp_path / f"cut{cut}.fmap"
            p.write_bytes(raw[:cut])
            with pytest.raises(TruncatedFileError):
                read_feature_map(p)

    def test_unknown_version(self, tmp_path):
        good = tmp_path / "v.fmap"
        write_feature_map(FeatureMap.from_array(np.ones((1, 1, 1), np.float32)), good)
        raw = bytearray(good.read_bytes())
        raw[4:6] = struct.pack("<H", 9)
        bad = tmp_path / "v9.fmap"
        bad.write_bytes(bytes(raw))
        with pytest.raises(UnsupportedVersionError):
            read_feature_map(bad)

    def test_nan_payload(self, tmp_path):
        header = struct.pack("<4sHIII", b"FMAP", 1, 1, 1, 1)
        payload = struct.pack("<f", float("nan"))
        path = tmp_path / "nan.fmap"
        path.write_bytes(header + payload)
        with pytest.raises(NonFinitePayloadError):
            read_feature_map(path)

    def test_trailing_data(self, tmp_path):
        good = tmp_path / "t.fmap"
        write_feature_map(FeatureMap.from_array(np.ones((1, 1, 1), np.float32)), good)
        bad = tmp_path / "t2.fmap"
        bad.write_bytes(good.read_bytes() + b"\x00")
        with pytest.raises(FeatureMapFormatError):
            read_feature_map(bad)

    def test_zero_dimension(self, tmp_path):
        header = struct.pack("<4sHIII", b"FMAP", 1, 0, 1, 1)
        path = tmp_path / "z.fmap"
        path.write_bytes(header)
        with pytest.raises(FeatureMapFormatError):
            read_feature_map(path)


class TestVectorIO:
    def test_roundtrip(self, tmp_path):
        v = np.array([1.5, -2.25, 3.0])
        path = tmp_path / "v.fmap"
        write_vector(v, path)
        assert np.array_equal(read_vector(path), v)

    def test_shape_guard(self, tmp_path):
        path = tmp_path / "m.fmap"
        write_feature_map(FeatureMap.from_array(np.ones((2, 2, 1), np.float32)), path)
        with pytest.raises(FeatureMapFormatError):
            read_vector(path)
