import numpy as np
import pytest
from dataclasses import replace

from motioninv import embeddings as emb
from motioninv import tensor
from motioninv.errors import FormatError

TOY_MODULES = ((16, 4, 4), (32, 2, 2), (32, 2, 2), (16, 4, 4))


def random_set(config=None, n_frames=8, seed=0, modules=TOY_MODULES):
    config = config or emb.EmbeddingShapeConfig()
    m = emb.init_zero(modules, config, n_frames)
    rng = tensor.make_rng(seed)
    return replace(
        m,
        m_qk=tuple(tensor.as_real(rng.standard_normal(a.shape)) for a in m.m_qk),
        m_v=tuple(tensor.as_real(rng.standard_normal(a.shape)) for a in m.m_v),
    )


class TestInitZero:
    def test_default_config_shapes(self):
        m = emb.init_zero(TOY_MODULES, emb.EmbeddingShapeConfig(), 8)
        for shape, qk, v in zip(TOY_MODULES, m.m_qk, m.m_v):
            c, h, w = shape
            assert qk.shape == (1, 8, c)
            assert v.shape == (h * w, 8, c)
            assert not qk.any() and not v.any()

    def test_swapped_config_swaps_spatial_axis(self):
        m = emb.init_zero(
            TOY_MODULES, emb.EmbeddingShapeConfig(qk_spatial="two_d", v_spatial="one_d"), 8
        )
        for shape, qk, v in zip(TOY_MODULES, m.m_qk, m.m_v):
            c, h, w = shape
            assert qk.shape == (h * w, 8, c)
            assert v.shape == (1, 8, c)

    def test_parameter_count_against_counting_oracle(self):
        for cfg in (
            emb.EmbeddingShapeConfig(),
            emb.EmbeddingShapeConfig(qk_spatial="two_d", v_spatial="two_d"),
            emb.EmbeddingShapeConfig(qk_spatial="one_d", v_spatial="one_d"),
        ):
            m = emb.init_zero(TOY_MODULES, cfg, 8)
            expect = 0
            for c, h, w in TOY_MODULES:
                s_qk = 1 if cfg.qk_spatial == "one_d" else h * w
                s_v = 1 if cfg.v_spatial == "one_d" else h * w
                expect += (s_qk + s_v) * 8 * c
            assert m.parameter_count() == expect

    def test_bad_frame_count_rejected(self):
        with pytest.raises(ValueError, match="n_frames"):
            emb.init_zero(TOY_MODULES, emb.EmbeddingShapeConfig(), 0)

    def test_rejects_frames_inconsistent_with_spec(self):
        from motioninv.denoiser import DenoiserSpec

        spec = DenoiserSpec(base_channels=8, height=4, width=4, frames=4,
                            channel_mults=(1,), cond_vocab=2, time_dim=8)
        with pytest.raises(ValueError, match="inconsistent"):
            emb.init_zero(spec, emb.EmbeddingShapeConfig(), 6)
        m = emb.init_zero(spec, emb.EmbeddingShapeConfig(), 4)
        assert m.module_shapes == spec.temporal_modules()

    def test_bad_config_values_rejected(self):
        with pytest.raises(ValueError, match="qk_spatial"):
            emb.EmbeddingShapeConfig(qk_spatial="three_d")
        with pytest.raises(ValueError, match="inference_strategy"):
            emb.EmbeddingShapeConfig(inference_strategy="mangle")


class TestDebiasDifferential:
    def test_frame_constant_maps_to_first_frame_only(self):
        m = emb.init_zero(TOY_MODULES, emb.EmbeddingShapeConfig(), 8)
        const = 3.25
        m = replace(m, m_v=tuple(np.full_like(v, const) for v in m.m_v))
        out = emb.debias_differential(m)
        for v in out.m_v:
            assert np.array_equal(v[:, 0, :], np.full_like(v[:, 0, :], const))
            assert not v[:, 1:, :].any()

    def test_linear_ramp_maps_to_constant(self):
        m = emb.init_zero(TOY_MODULES, emb.EmbeddingShapeConfig(), 8)
        slope = 0.5
        ramp = tuple(
            slope * (np.arange(1, 9.0)[None, :, None] * np.ones_like(v))
            for v in m.m_v
        )
        out = emb.debias_differential(replace(m, m_v=ramp))
        for v in out.m_v:
            assert np.allclose(v, slope)

    def test_cumsum_inverts_differencing(self):
        m = random_set(seed=3)
        back = emb.cumulative_over_frames(emb.debias_differential(m))
        for a, b in zip(back.m_v, m.m_v):
            assert np.max(np.abs(a - b)) <= 1e-12

    def test_qk_untouched(self):
        m = random_set(seed=4)
        out = emb.debias_differential(m)
        for a, b in zip(out.m_qk, m.m_qk):
            assert np.array_equal(a, b)

    def test_not_idempotent(self):
        m = random_set(seed=5)
        once = emb.debias_differential(m)
        twice = emb.debias_differential(once)
        assert any(not np.array_equal(a, b) for a, b in zip(once.m_v, twice.m_v))


class TestDebiasNormalize:
    def test_frame_constant_maps_to_zero(self):
        m = emb.init_zero(TOY_MODULES, emb.EmbeddingShapeConfig(), 8)
        m = replace(m, m_v=tuple(np.full_like(v, 2.0) for v in m.m_v))
        out = emb.debias_normalize(m)
        for v in out.m_v:
            assert not v.any()

    def test_zero_mean_input_unchanged(self):
        m = random_set(seed=6)
        centered = replace(m, m_v=tuple(v - v.mean(axis=1, keepdims=True) for v in m.m_v))
        out = emb.debias_normalize(centered)
        for a, b in zip(out.m_v, centered.m_v):
            assert np.allclose(a, b, atol=1e-14)

    def test_output_frame_mean_is_zero(self):
        out = emb.debias_normalize(random_set(seed=7))
        for v in out.m_v:
            assert np.max(np.abs(v.mean(axis=1))) < 1e-12

    def test_idempotent(self):
        m = random_set(seed=8)
        once = emb.debias_normalize(m)
        twice = emb.debias_normalize(once)
        for a, b in zip(once.m_v, twice.m_v):
            assert np.allclose(a, b, atol=1e-14)


class TestStrategyDispatch:
    def test_dispatch_cases(self):
        m = random_set(seed=9)
        diff = emb.apply_inference_strategy(
            m, emb.EmbeddingShapeConfig(inference_strategy="differential")
        )
        norm = emb.apply_inference_strategy(
            m, emb.EmbeddingShapeConfig(inference_strategy="normalize")
        )
        vanilla = emb.apply_inference_strategy(
            m, emb.EmbeddingShapeConfig(inference_strategy="vanilla")
        )
        for got, want in zip(diff.m_v, emb.debias_differential(m).m_v):
            assert np.array_equal(got, want)
        for got, want in zip(norm.m_v, emb.debias_normalize(m).m_v):
            assert np.array_equal(got, want)
        assert vanilla is m

    def test_uses_own_config_by_default(self):
        m = random_set(config=emb.EmbeddingShapeConfig(inference_strategy="normalize"))
        out = emb.apply_inference_strategy(m)
        for v in out.m_v:
            assert np.max(np.abs(v.mean(axis=1))) < 1e-12


class TestSerialization:
    def test_round_trip_zero_set(self, tmp_path):
        m = emb.init_zero(TOY_MODULES, emb.EmbeddingShapeConfig(), 8)
        path = str(tmp_path / "zero.memb")
        emb.save(m, path)
        back = emb.load(path)
        assert back.config == m.config
        assert back.module_shapes == m.module_shapes
        for a, b in zip(back.m_qk + back.m_v, m.m_qk + m.m_v):
            assert a.tobytes() == b.tobytes()

    def test_round_trip_random_set(self, tmp_path):
        m = random_set(
            config=emb.EmbeddingShapeConfig(qk_spatial="two_d", v_spatial="one_d",
                                            inference_strategy="normalize"),
            seed=11,
        )
        path = str(tmp_path / "rand.memb")
        emb.save(m, path)
        back = emb.load(path)
        assert back.config == m.config
        assert back.n_frames == m.n_frames
        for a, b in zip(back.m_qk + back.m_v, m.m_qk + m.m_v):
            assert a.tobytes() == b.tobytes()

    def test_header_byte_corruption_is_diagnosed(self, tmp_path):
        m = random_set(seed=12)
        path = str(tmp_path / "m.memb")
        emb.save(m, path)
        raw = bytearray(open(path, "rb").read())
        rng = tensor.make_rng(13)
        header_len = 8 + 4 * 5 + 4 * 5 * len(TOY_MODULES)
        for _ in range(60):
            pos = int(rng.integers(0, header_len))
            corrupted = bytearray(raw)
            corrupted[pos] ^= 0xFF
            bad = str(tmp_path / "bad.memb")
            with open(bad, "wb") as fh:
                fh.write(corrupted)
            with pytest.raises(FormatError):
                emb.load(bad)

    def test_truncated_file_is_diagnosed(self, tmp_path):
        m = random_set(seed=14)
        path = str(tmp_path / "m.memb")
        emb.save(m, path)
        raw = open(path, "rb").read()
        bad = str(tmp_path / "trunc.memb")
        with open(bad, "wb") as fh:
            fh.write(raw[: len(raw) // 2])
        with pytest.raises(FormatError, match="truncated"):
            emb.load(bad)

    def test_wrong_magic_is_diagnosed(self, tmp_path):
        bad = str(tmp_path / "magic.memb")
        with open(bad, "wb") as fh:
            fh.write(b"NOPE0001" + b"\x00" * 64)
        with pytest.raises(FormatError, match="magic"):
            emb.load(bad)
