import math

import numpy as np
import pytest

from seqpose.attention_fusion import (
    AttentionReport,
    ConvLSTMParams,
    ConvLSTMState,
    content_augment,
    convlstm_step,
    fuse_pair,
    run_vo_sequence,
    seeded_head,
    seeded_projection,
    spatial_attention,
    temporal_attention,
)
from seqpose.exceptions import DimMismatchError, EmptySequenceError
from seqpose.pose_algebra import PoseSE3


# --- independent oracles ---------------------------------------------------

def softmax_oracle(scores):
    e = [math.exp(s) for s in scores]
    total = sum(e)
    return [v / total for v in e]


def cosine_oracle(a, b):
    num = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return num / (na * nb)


def augment_bruteforce(x, hs):
    """Naive triple-nested-loop evaluation of the attention fusion."""
    h_dim, w_dim, c_dim = x.shape
    n = len(hs)
    t_scores = []
    for i in range(n):
        t_scores.append(cosine_oracle(list(x.ravel()), list(hs[i].ravel())))
    t_weights = softmax_oracle(t_scores)
    s_weights = []
    for i in range(n):
        scores = []
        for j in range(c_dim):
            scores.append(cosine_oracle(list(x[:, :, j].ravel()),
                                        list(hs[i][:, :, j].ravel())))
        s_weights.append(softmax_oracle(scores))
    out = np.zeros_like(x)
    for i in range(n):
        for j in range(c_dim):
            for yy in range(h_dim):
                for xx in range(w_dim):
                    out[yy, xx, j] += t_weights[i] * s_weights[i][j] * hs[i][yy, xx, j]
    return np.array(t_weights), np.array(s_weights), out


def scalar_lstm_oracle(xs, wx, wh, bias):
    """Hand-rolled scalar LSTM: wx, wh, bias are 4-tuples in
    (input, forget, output, candidate) order."""

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    h = c = 0.0
    hs = []
    for x in xs:
        zi = wx[0] * x + wh[0] * h + bias[0]
        zf = wx[1] * x + wh[1] * h + bias[1]
        zo = wx[2] * x + wh[2] * h + bias[2]
        zg = wx[3] * x + wh[3] * h + bias[3]
        c = sig(zf) * c + sig(zi) * math.tanh(zg)
        h = sig(zo) * math.tanh(c)
        hs.append(h)
    return hs


def random_feature(rng, h=3, w=3, c=4):
    return rng.standard_normal((h, w, c))


class TestConvLSTM:
    def test_zero_everything_fixed_point(self):
        p = ConvLSTMParams(3, 2, 2, np.zeros((4, 3, 3, 2, 2)),
                           np.zeros((4, 3, 3, 2, 2)), np.zeros((4, 2)))
        state, out = convlstm_step(np.zeros((4, 4, 2)), ConvLSTMState.zeros(4, 4, 2), p)
        assert np.array_equal(out, np.zeros((4, 4, 2)))
        assert np.array_equal(state.cell, np.zeros((4, 4, 2)))

    def test_output_strictly_bounded(self):
        rng = np.random.default_rng(0)
        p = ConvLSTMParams.seeded(3, in_channels=4, hidden_channels=4)
        state = ConvLSTMState.zeros(3, 3, 4)
        for _ in range(100):
            state, out = convlstm_step(10.0 * random_feature(rng, c=4), state, p)
            assert np.all(np.abs(out) < 1.0)
            assert np.all(np.isfinite(out))

    def test_scalar_case_matches_oracle(self):
        rng = np.random.default_rng(1)
        wx = rng.standard_normal(4)
        wh = rng.standard_normal(4)
        bias = rng.standard_normal(4)
        # 3x3 kernels on a 1x1 map: only the center tap touches data
        w_x = np.zeros((4, 3, 3, 1, 1))
        w_h = np.zeros((4, 3, 3, 1, 1))
        w_x[:, 1, 1, 0, 0] = wx
        w_h[:, 1, 1, 0, 0] = wh
        p = ConvLSTMParams(3, 1, 1, w_x, w_h, bias.reshape(4, 1))
        xs = list(rng.standard_normal(12))
        state = ConvLSTMState.zeros(1, 1, 1)
        got = []
        for x in xs:
            state, out = convlstm_step(np.array([[[x]]]), state, p)
            got.append(float(out[0, 0, 0]))
        expected = scalar_lstm_oracle(xs, wx, wh, bias)
        assert np.max(np.abs(np.array(got) - np.array(expected))) < 1e-12

    def test_dim_mismatch(self):
        p = ConvLSTMParams.seeded(0, in_channels=2, hidden_channels=3)
        with pytest.raises(DimMismatchError):
            convlstm_step(np.zeros((2, 2, 5)), ConvLSTMState.zeros(2, 2, 3), p)
        with pytest.raises(DimMismatchError):
            convlstm_step(np.zeros((2, 2, 2)), ConvLSTMState.zeros(2, 3, 3), p)

    def test_seeded_params_reproducible(self):
        a = ConvLSTMParams.seeded(42, 3, 5)
        b = ConvLSTMParams.seeded(42, 3, 5)
        assert np.array_equal(a.w_x, b.w_x)
        assert np.array_equal(a.w_h, b.w_h)


class TestSpatialAttention:
    def test_identical_channels_uniform(self):
        rng = np.random.default_rng(2)
        x = random_feature(rng, c=3)
        weights = spatial_attention(x, x.copy())
        assert np.allclose(weights, 1.0 / 3.0, atol=1e-14)

    def test_orthogonal_channel_softmax(self):
        x = np.zeros((1, 2, 2))
        x[0, 0, 0] = 1.0   # channel 0: (1, 0)
        x[0, 0, 1] = 1.0   # channel 1: (1, 0)
        h = np.zeros((1, 2, 2))
        h[0, 0, 0] = 1.0   # channel 0 identical
        h[0, 1, 1] = 1.0   # channel 1 orthogonal: (0, 1)
        weights = spatial_attention(x, h)
        expected = softmax_oracle([1.0, 0.0])
        assert np.allclose(weights, expected, atol=1e-14)
        assert abs(weights[0] - 0.7311) < 1e-4 and abs(weights[1] - 0.2689) < 1e-4

    def test_positive_scaling_invariance(self):
        rng = np.random.default_rng(3)
        x = random_feature(rng, c=4)
        h = random_feature(rng, c=4)
        h_scaled = h.copy()
        h_scaled[:, :, 2] *= 17.5
        assert np.allclose(spatial_attention(x, h), spatial_attention(x, h_scaled),
                           atol=1e-13)

    def test_zero_channel_neutral(self):
        rng = np.random.default_rng(4)
        x = random_feature(rng, c=2)
        h = random_feature(rng, c=2)
        h[:, :, 1] = 0.0
        weights = spatial_attention(x, h, normalize="raw")
        assert weights[1] == 0.0
        assert np.all(np.isfinite(weights))

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            w = spatial_attention(random_feature(rng), random_feature(rng))
            assert np.all(w >= 0)
            assert abs(w.sum() - 1.0) < 1e-12


class TestTemporalAttention:
    def test_singleton(self):
        rng = np.random.default_rng(6)
        x = random_feature(rng)
        assert np.array_equal(temporal_attention(x, [random_feature(rng)]), [1.0])

    def test_opposite_pair_softmax(self):
        rng = np.random.default_rng(7)
        x = random_feature(rng)
        weights = temporal_attention(x, [x.copy(), -x])
        expected = softmax_oracle([1.0, -1.0])
        assert np.allclose(weights, expected, atol=1e-12)
        assert abs(weights[0] - 0.8808) < 1e-4 and abs(weights[1] - 0.1192) < 1e-4

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(8)
        x = random_feature(rng)
        hs = [random_feature(rng) for _ in range(5)]
        perm = [3, 0, 4, 1, 2]
        w = temporal_attention(x, hs)
        w_perm = temporal_attention(x, [hs[i] for i in perm])
        assert np.allclose(w_perm, w[perm], atol=1e-15)

    def test_empty_raises(self):
        rng = np.random.default_rng(9)
        with pytest.raises(EmptySequenceError):
            temporal_attention(random_feature(rng), [])


class TestContentAugment:
    def test_degenerate_single_state_single_channel(self):
        rng = np.random.default_rng(10)
        x = random_feature(rng, c=1)
        h = random_feature(rng, c=1)
        report = content_augment(x, [h])
        assert np.allclose(report.augmented, h, atol=1e-15)
        assert report.temporal_weights[0] == 1.0
        assert report.spatial_weights[0, 0] == 1.0

    def test_equal_states_independent_of_count(self):
        rng = np.random.default_rng(11)
        x = random_feature(rng)
        h = random_feature(rng)
        outs = [content_augment(x, [h] * n).augmented for n in (1, 3, 5)]
        assert np.allclose(outs[0], outs[1], atol=1e-13)
        assert np.allclose(outs[1], outs[2], atol=1e-13)

    def test_matches_bruteforce_small_grid(self):
        rng = np.random.default_rng(12)
        for h_dim in range(1, 5):
            for w_dim in range(1, 5):
                for c_dim in range(1, 5):
                    for n in range(1, 6):
                        x = rng.standard_normal((h_dim, w_dim, c_dim))
                        hs = [rng.standard_normal((h_dim, w_dim, c_dim))
                              for _ in range(n)]
                        report = content_augment(x, hs)
                        tw, sw, out = augment_bruteforce(x, hs)
                        assert np.max(np.abs(report.augmented - out)) < 1e-12
                        assert np.max(np.abs(report.temporal_weights - tw)) < 1e-12
                        assert np.max(np.abs(report.spatial_weights - sw)) < 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(13)
        x = random_feature(rng)
        hs = [random_feature(rng) for _ in range(4)]
        a = content_augment(x, hs).augmented
        b = content_augment(x, [hs[2], hs[0], hs[3], hs[1]]).augmented
        assert np.max(np.abs(a - b)) < 1e-12

    def test_weight_distributions(self):
        rng = np.random.default_rng(14)
        x = random_feature(rng)
        report = content_augment(x, [random_feature(rng) for _ in range(6)])
        assert abs(report.temporal_weights.sum() - 1.0) < 1e-12
        assert np.all(report.temporal_weights >= 0)
        for row in report.spatial_weights:
            assert abs(row.sum() - 1.0) < 1e-12
            assert np.all(row >= 0)

    def test_convex_hull_bound(self):
        rng = np.random.default_rng(15)
        x = random_feature(rng)
        hs = [random_feature(rng) for _ in range(4)]
        report = content_augment(x, hs)
        bounds = [np.max(np.abs(report.spatial_weights[i][None, None, :] * hs[i]))
                  for i in range(4)]
        assert np.max(np.abs(report.augmented)) <= max(bounds) + 1e-12

    def test_report_type(self):
        rng = np.random.default_rng(16)
        assert isinstance(content_augment(random_feature(rng),
                                          [random_feature(rng)]), AttentionReport)


class TestFusePair:
    def test_selector_projection(self):
        rng = np.random.default_rng(17)
        a, b = random_feature(rng, c=3), random_feature(rng, c=3)
        proj = np.vstack([np.eye(3), np.zeros((3, 3))])
        assert np.allclose(fuse_pair(a, b, proj), a, atol=1e-15)

    def test_mean_projection(self):
        rng = np.random.default_rng(18)
        a, b = random_feature(rng, c=2), random_feature(rng, c=2)
        proj = np.vstack([0.5 * np.eye(2), 0.5 * np.eye(2)])
        assert np.allclose(fuse_pair(a, b, proj), 0.5 * (a + b), atol=1e-15)

    def test_matches_per_pixel_oracle(self):
        rng = np.random.default_rng(19)
        a, b = random_feature(rng, c=3), random_feature(rng, c=3)
        proj = seeded_projection(5, 3)
        out = fuse_pair(a, b, proj)
        for yy in range(a.shape[0]):
            for xx in range(a.shape[1]):
                vec = np.concatenate([a[yy, xx], b[yy, xx]])
                assert np.allclose(out[yy, xx], vec @ proj, atol=1e-13)

    def test_shape_mismatch(self):
        rng = np.random.default_rng(20)
        with pytest.raises(DimMismatchError):
            fuse_pair(random_feature(rng, c=3), random_feature(rng, c=2),
                      np.zeros((6, 3)))


class TestRunVoSequence:
    def test_zero_head_gives_identities(self):
        rng = np.random.default_rng(21)
        p = ConvLSTMParams.seeded(1, 4, 4)
        feats = [random_feature(rng, c=4) for _ in range(5)]
        _, poses = run_vo_sequence(feats, p, np.zeros((6, 4)))
        for pose in poses:
            assert np.array_equal(pose.t, np.zeros(3))
            assert np.array_equal(pose.q, [1.0, 0, 0, 0])

    def test_shape_contract(self):
        rng = np.random.default_rng(22)
        p = ConvLSTMParams.seeded(2, 3, 3)
        feats = [random_feature(rng, c=3) for _ in range(7)]
        states, poses = run_vo_sequence(feats, p, seeded_head(2, 3))
        assert len(states) == 7 and len(poses) == 7
        assert all(isinstance(pose, PoseSE3) for pose in poses)

    def test_scalar_end_to_end(self):
        rng = np.random.default_rng(23)
        wx = rng.standard_normal(4)
        wh = rng.standard_normal(4)
        bias = rng.standard_normal(4)
        w_x = np.zeros((4, 3, 3, 1, 1))
        w_h = np.zeros((4, 3, 3, 1, 1))
        w_x[:, 1, 1, 0, 0] = wx
        w_h[:, 1, 1, 0, 0] = wh
        p = ConvLSTMParams(3, 1, 1, w_x, w_h, bias.reshape(4, 1))
        head = rng.standard_normal((6, 1))
        xs = list(rng.standard_normal(6))
        feats = [np.array([[[v]]]) for v in xs]
        states, poses = run_vo_sequence(feats, p, head)
        expected_h = scalar_lstm_oracle(xs, wx, wh, bias)
        for state, he in zip(states, expected_h):
            assert abs(float(state[0, 0, 0]) - he) < 1e-12
        # readout: head @ pooled hidden (pool of a scalar is itself)
        from seqpose.pose_algebra import quat_exp
        for pose, he in zip(poses, expected_h):
            vec = head @ np.array([he])
            assert np.allclose(pose.t, vec[:3], atol=1e-12)
            assert np.allclose(pose.q, quat_exp(vec[3:]), atol=1e-12)

    def test_empty_raises(self):
        p = ConvLSTMParams.seeded(3, 2, 2)
        with pytest.raises(EmptySequenceError):
            run_vo_sequence([], p, np.zeros((6, 2)))
