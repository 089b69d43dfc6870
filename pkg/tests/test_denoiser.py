import numpy as np
import pytest
from dataclasses import replace

from motioninv import EmbeddingShapeConfig, init_zero
from motioninv import denoiser as dn
from motioninv import tensor
from motioninv.errors import FormatError

from conftest import random_video, zero_set_for


class TestSpec:
    def test_module_descriptors_two_level(self, small_spec):
        mods = small_spec.temporal_modules()
        assert [tuple(m) for m in mods] == [(8, 8, 8), (16, 4, 4), (16, 4, 4), (8, 8, 8)]

    def test_module_count_scales_with_temporal_per_level(self):
        spec = dn.DenoiserSpec(base_channels=4, height=8, width=8, frames=2,
                               channel_mults=(1, 2), temporal_per_level=2,
                               cond_vocab=2, time_dim=4)
        assert len(spec.temporal_modules()) == 8

    def test_indivisible_canvas_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            dn.DenoiserSpec(height=10, width=16, channel_mults=(1, 2, 2))


class TestInitParams:
    def test_same_seed_bitwise_equal(self, tiny_spec):
        a = dn.init_params(tiny_spec, 3)
        b = dn.init_params(tiny_spec, 3)
        assert a.checksum() == b.checksum()

    def test_different_seeds_differ(self, tiny_spec):
        assert dn.init_params(tiny_spec, 3).checksum() != dn.init_params(tiny_spec, 4).checksum()

    def test_activation_scale_on_unit_normal_input(self, small_spec):
        # fan-in scaling keeps forward activations in a sane range
        params = dn.init_params(small_spec, 0)
        x = tensor.randn(
            (1, small_spec.img_channels, small_spec.frames, small_spec.height,
             small_spec.width), 5,
        )
        out = dn.forward(params, x, t=3, cond=0)
        assert 0.1 <= out.std() <= 10.0


class TestForward:
    def test_output_shape_matches_input(self):
        spec = dn.DenoiserSpec()  # the default toy: C_img=3, N=8, H=W=16
        params = dn.init_params(spec, 1)
        x = random_video(spec, 2)
        assert dn.forward(params, x, t=10, cond=0).shape == x.shape

    def test_zero_set_equals_absent_bitwise(self, small_spec, small_params):
        x = random_video(small_spec, 3)
        plain = dn.forward(small_params, x, t=2, cond=1)
        injected = dn.forward(small_params, x, t=2, cond=1, m=zero_set_for(small_spec))
        assert plain.tobytes() == injected.tobytes()

    def test_forward_deterministic(self, small_spec, small_params):
        x = random_video(small_spec, 4)
        a = dn.forward(small_params, x, t=5, cond=0)
        b = dn.forward(small_params, x, t=5, cond=0)
        assert a.tobytes() == b.tobytes()

    def test_embedding_spec_mismatch_rejected_before_compute(self, small_spec, small_params):
        other = dn.DenoiserSpec(base_channels=4, height=8, width=8, frames=4,
                                channel_mults=(1,), cond_vocab=4, time_dim=8)
        bad = init_zero(other, EmbeddingShapeConfig(), other.frames)
        x = random_video(small_spec, 5)
        with pytest.raises(ValueError, match="module shapes"):
            dn.forward(small_params, x, t=2, cond=0, m=bad)

    def test_bad_inputs_rejected(self, small_spec, small_params):
        x = random_video(small_spec, 6)
        with pytest.raises(ValueError, match="timestep"):
            dn.forward(small_params, x, t=0, cond=0)
        with pytest.raises(ValueError, match="vocabulary"):
            dn.forward(small_params, x, t=1, cond=small_spec.cond_vocab)
        with pytest.raises(ValueError, match="shape"):
            dn.forward(small_params, x[:, :, :2], t=1, cond=0)

    def test_module_mask_disables_injection(self, small_spec, small_params):
        x = random_video(small_spec, 7)
        m = zero_set_for(small_spec)
        rng = tensor.make_rng(8)
        m = replace(m, m_v=tuple(tensor.as_real(rng.standard_normal(v.shape)) for v in m.m_v))
        masked_off = dn.forward(small_params, x, t=2, cond=0, m=m,
                                module_mask=[False] * 4)
        plain = dn.forward(small_params, x, t=2, cond=0)
        assert masked_off.tobytes() == plain.tobytes()
        active = dn.forward(small_params, x, t=2, cond=0, m=m)
        assert active.tobytes() != plain.tobytes()

    def test_embedding_gradients_pass_finite_differences(self, tiny_spec, tiny_params):
        # mean-squared forward output vs every m_qk_i / m_v_i, all shape configs
        from motioninv import autodiff as ad
        from motioninv.attention import to_frame_major

        x = random_video(tiny_spec, 9)
        f = to_frame_major(tensor.as_real(x))
        for qk_s in ("one_d", "two_d"):
            for v_s in ("one_d", "two_d"):
                cfg = EmbeddingShapeConfig(qk_spatial=qk_s, v_spatial=v_s)
                m = init_zero(tiny_spec, cfg, tiny_spec.frames)
                rng = tensor.make_rng(10)
                arrays = [
                    tensor.as_real(rng.standard_normal(a.shape) * 0.2)
                    for pair in zip(m.m_qk, m.m_v) for a in pair
                ]

                def loss_value(arrs, want_leaves=False):
                    leaves = [ad.parameter(a) for a in arrs]
                    m_nodes = list(zip(leaves[0::2], leaves[1::2]))
                    out = dn.forward_graph(
                        dn.param_nodes(tiny_params), tiny_spec, ad.constant(f),
                        t=2, cond=1, m_nodes=m_nodes,
                    )
                    loss = ad.mean(ad.mul(out, out))
                    return (loss, leaves) if want_leaves else float(loss.value)

                loss, leaves = loss_value(arrays, want_leaves=True)
                grads = ad.grad(loss, leaves)
                h = 1e-5
                for i, arr in enumerate(arrays):
                    fd = np.zeros_like(arr)
                    it = np.nditer(arr, flags=["multi_index"])
                    for _ in it:
                        idx = it.multi_index
                        orig = arr[idx]
                        arr[idx] = orig + h
                        plus = loss_value(arrays)
                        arr[idx] = orig - h
                        minus = loss_value(arrays)
                        arr[idx] = orig
                        fd[idx] = (plus - minus) / (2 * h)
                    rel = np.max(np.abs(grads[i] - fd)) / max(np.max(np.abs(fd)), 1e-8)
                    assert rel < 1e-4, f"cfg=({qk_s},{v_s}) leaf {i}: rel {rel}"


class TestFreezeAndChecksum:
    def test_freeze_flag(self, tiny_spec):
        params = dn.init_params(tiny_spec, 11)
        assert not params.frozen
        frozen = params.freeze()
        assert frozen.frozen
        assert frozen.checksum() == params.checksum()

    def test_param_arrays_are_read_only(self, tiny_params):
        arr = next(iter(tiny_params.tensors.values()))
        with pytest.raises(ValueError):
            arr[0] = 0.0

    def test_forward_leaves_checksum_unchanged(self, small_spec, small_params):
        before = small_params.checksum()
        dn.forward(small_params, random_video(small_spec, 12), t=3, cond=0)
        assert small_params.checksum() == before


class TestParamsSerialization:
    def test_round_trip_bitwise(self, small_spec, tmp_path):
        params = dn.init_params(small_spec, 13).freeze()
        path = str(tmp_path / "p.mden")
        dn.save_params(params, path)
        back = dn.load_params(path)
        assert back.spec == params.spec
        assert back.frozen
        assert back.checksum() == params.checksum()
        for name in params.tensors:
            assert back.tensors[name].tobytes() == params.tensors[name].tobytes()

    def test_round_trip_unfrozen(self, tiny_spec, tmp_path):
        params = dn.init_params(tiny_spec, 14)
        path = str(tmp_path / "p.mden")
        dn.save_params(params, path)
        assert not dn.load_params(path).frozen

    def test_header_corruption_diagnosed(self, tiny_spec, tmp_path):
        params = dn.init_params(tiny_spec, 15)
        path = str(tmp_path / "p.mden")
        dn.save_params(params, path)
        raw = bytearray(open(path, "rb").read())
        rng = tensor.make_rng(16)
        for _ in range(40):
            pos = int(rng.integers(0, 64))
            bad = bytearray(raw)
            bad[pos] ^= 0xFF
            bad_path = str(tmp_path / "bad.mden")
            with open(bad_path, "wb") as fh:
                fh.write(bad)
            with pytest.raises(FormatError):
                dn.load_params(bad_path)

    def test_truncation_diagnosed(self, tiny_spec, tmp_path):
        params = dn.init_params(tiny_spec, 17)
        path = str(tmp_path / "p.mden")
        dn.save_params(params, path)
        raw = open(path, "rb").read()
        bad_path = str(tmp_path / "t.mden")
        with open(bad_path, "wb") as fh:
            fh.write(raw[:-9])
        with pytest.raises(FormatError, match="truncated"):
            dn.load_params(bad_path)
