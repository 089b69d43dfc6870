import numpy as np
import pytest

from motioninv import autodiff as ad
from motioninv import tensor
from motioninv.attention import (
    AttentionWeights,
    attention_nodes,
    from_frame_major,
    init_weights,
    temporal_attention,
    temporal_attention_injected,
    to_frame_major,
)


def random_weights(c, seed):
    return init_weights(c, tensor.make_rng(seed))


class TestFrameMajorLayout:
    def test_shape_arithmetic(self):
        x = tensor.randn((1, 2, 3, 2, 2), 0)
        assert to_frame_major(x).shape == (4, 3, 2)

    def test_round_trip_identity(self):
        x = tensor.randn((1, 3, 4, 5, 6), 1)
        f = to_frame_major(x)
        assert np.array_equal(from_frame_major(f, 5, 6), x)

    def test_index_mapping_against_loop_oracle(self):
        x = tensor.randn((1, 3, 2, 4, 5), 2)
        f = to_frame_major(x)
        _, c, n, h, w = x.shape
        for ci in range(c):
            for ni in range(n):
                for hi in range(h):
                    for wi in range(w):
                        assert f[hi * w + wi, ni, ci] == x[0, ci, ni, hi, wi]

    def test_wrong_rank_rejected(self):
        with pytest.raises(ValueError, match="1,C,N,H,W"):
            to_frame_major(np.zeros((2, 3, 4, 5)))
        with pytest.raises(ValueError, match="1,C,N,H,W"):
            to_frame_major(np.zeros((2, 3, 4, 5, 6)))


class TestTemporalAttention:
    def test_single_frame_is_value_projection(self):
        w = random_weights(6, 3)
        f = tensor.randn((5, 1, 6), 4)
        out = temporal_attention(f, w)
        assert np.allclose(out, f @ w.w_v.T, atol=1e-14)

    def test_zero_query_gives_frame_mean_of_values(self):
        c = 4
        w = AttentionWeights(
            w_q=np.zeros((c, c)),
            w_k=tensor.randn((c, c), 5),
            w_v=tensor.randn((c, c), 6),
        )
        f = tensor.randn((3, 5, c), 7)
        out = temporal_attention(f, w)
        v = f @ w.w_v.T
        expect = np.repeat(v.mean(axis=1, keepdims=True), 5, axis=1)
        assert np.allclose(out, expect, atol=1e-12)

    def test_against_per_row_loop_oracle(self):
        hw, n, c = 4, 3, 8
        w = random_weights(c, 8)
        f = tensor.randn((hw, n, c), 9)
        out = temporal_attention(f, w)
        for row in range(hw):
            q = f[row] @ w.w_q.T
            k = f[row] @ w.w_k.T
            v = f[row] @ w.w_v.T
            scores = q @ k.T / np.sqrt(c)
            e = np.exp(scores - scores.max(axis=1, keepdims=True))
            a = e / e.sum(axis=1, keepdims=True)
            assert np.max(np.abs(out[row] - a @ v)) < 1e-10

    def test_attention_rows_sum_to_one(self):
        # recompute the attention map directly and check normalization
        c = 5
        w = random_weights(c, 10)
        f = tensor.randn((6, 4, c), 11) * 20
        q = f @ w.w_q.T
        k = f @ w.w_k.T
        a = tensor.softmax(np.matmul(q, k.transpose(0, 2, 1)) / np.sqrt(c), axis=-1)
        assert np.max(np.abs(a.sum(axis=-1) - 1.0)) < 1e-10

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError, match="channels"):
            temporal_attention(tensor.randn((2, 3, 4), 0), random_weights(5, 1))

    def test_weights_must_be_square(self):
        with pytest.raises(ValueError, match="square"):
            AttentionWeights(w_q=np.zeros((3, 4)), w_k=np.zeros((3, 3)), w_v=np.zeros((3, 3)))


class TestInjectedAttention:
    def test_zero_embeddings_bitwise_equivalent(self):
        for qk_rows, v_rows in ((1, 1), (1, 6), (6, 1), (6, 6)):
            w = random_weights(4, 12)
            f = tensor.randn((6, 3, 4), 13)
            plain = temporal_attention(f, w)
            injected = temporal_attention_injected(
                f, w, np.zeros((qk_rows, 3, 4)), np.zeros((v_rows, 3, 4))
            )
            assert plain.tobytes() == injected.tobytes()

    def test_uniform_attention_algebra(self):
        # W_q = W_k = 0 -> uniform weights; output is the frame mean of W_v (F + m_v)
        c = 4
        w = AttentionWeights(
            w_q=np.zeros((c, c)), w_k=np.zeros((c, c)), w_v=tensor.randn((c, c), 14)
        )
        f = tensor.randn((3, 5, c), 15)
        m_v = tensor.randn((3, 5, c), 16)
        out = temporal_attention_injected(f, w, np.zeros((1, 5, c)), m_v)
        v = (f + m_v) @ w.w_v.T
        expect = np.repeat(v.mean(axis=1, keepdims=True), 5, axis=1)
        assert np.allclose(out, expect, atol=1e-12)
        # adding a frame-constant to m_v shifts all outputs by the projected constant
        const = tensor.randn((3, 1, c), 17)
        shifted = temporal_attention_injected(f, w, np.zeros((1, 5, c)), m_v + const)
        assert np.allclose(shifted - out, const @ w.w_v.T, atol=1e-12)

    def test_broadcast_matches_explicit_materialization(self):
        hw, n, c = 6, 3, 5
        w = random_weights(c, 18)
        f = tensor.randn((hw, n, c), 19)
        m_qk = tensor.randn((1, n, c), 20)  # spatial-1D
        m_v = tensor.randn((hw, n, c), 21)  # spatial-2D
        out = temporal_attention_injected(f, w, m_qk, m_v)
        oracle = temporal_attention_injected(
            f, w, np.broadcast_to(m_qk, (hw, n, c)).copy(), m_v
        )
        assert np.array_equal(out, oracle)

    def test_frame_count_mismatch_rejected(self):
        w = random_weights(4, 22)
        f = tensor.randn((2, 3, 4), 23)
        with pytest.raises(ValueError, match="frame count"):
            temporal_attention_injected(
                f, w, np.zeros((1, 5, 4)), np.zeros((2, 3, 4))
            )

    def test_spatial_row_permutation_equivariance(self):
        hw, n, c = 7, 4, 3
        w = random_weights(c, 24)
        f = tensor.randn((hw, n, c), 25)
        m_v = tensor.randn((hw, n, c), 26)
        m_qk = tensor.randn((1, n, c), 27)
        perm = tensor.make_rng(28).permutation(hw)
        out = temporal_attention_injected(f, w, m_qk, m_v)
        out_perm = temporal_attention_injected(f[perm], w, m_qk, m_v[perm])
        assert np.array_equal(out[perm], out_perm)

    def test_gradients_pass_finite_differences(self):
        hw, n, c = 2, 3, 3
        w = random_weights(c, 29)
        rng = tensor.make_rng(30)
        f = rng.standard_normal((hw, n, c))
        m_qk0 = rng.standard_normal((1, n, c)) * 0.1
        m_v0 = rng.standard_normal((hw, n, c)) * 0.1
        proj = rng.standard_normal((hw, n, c))

        def loss_of(m_qk_arr, m_v_arr, want_nodes=False):
            m_qk = ad.parameter(m_qk_arr)
            m_v = ad.parameter(m_v_arr)
            out = attention_nodes(
                ad.constant(f), ad.constant(w.w_q), ad.constant(w.w_k),
                ad.constant(w.w_v), c, m_qk=m_qk, m_v=m_v,
            )
            loss = ad.mean(ad.mul(out, ad.constant(proj)))
            return (loss, m_qk, m_v) if want_nodes else loss

        loss, m_qk, m_v = loss_of(m_qk0, m_v0, want_nodes=True)
        g_qk, g_v = ad.grad(loss, [m_qk, m_v])
        h = 1e-5
        for arr, grad in ((m_qk0, g_qk), (m_v0, g_v)):
            fd = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                plus = float(loss_of(m_qk0, m_v0).value)
                arr[idx] = orig - h
                minus = float(loss_of(m_qk0, m_v0).value)
                arr[idx] = orig
                fd[idx] = (plus - minus) / (2 * h)
            rel = np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), 1e-8)
            assert rel < 1e-4
