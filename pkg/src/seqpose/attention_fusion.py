"""Recurrent feature fusion and spatio-temporal co-visibility attention.

Feature maps are float arrays of shape (h, w, c), values finite. A ConvLSTM
cell consumes a sequence of fused feature maps and its hidden states serve as
local maps; each view's raw feature is then augmented by re-weighting those
hidden states with a soft attention in two domains:

- temporal: cosine similarity between the fully vectorized guidance feature
  and each hidden state, normalized over states;
- spatial: per-channel cosine similarity between guidance and hidden state,
  normalized over channels within each state.

The augmented map keeps the input layout: output channel j is the sum over
hidden states i of temporal_weight[i] * spatial_weight[i, j] * H_i[:, :, j].

Normalization is softmax by default so the weights in each domain form a
probability distribution; ``normalize="raw"`` keeps the raw cosine scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DimMismatchError, EmptySequenceError
from .pose_algebra import PoseSE3, quat_exp
from .rng import Rng


def _check_feature(x, name="feature") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or min(x.shape) < 1:
        raise DimMismatchError(f"{name} must have shape (h, w, c), got {x.shape}")
    return x


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class ConvLSTMParams:
    """Gate convolution kernels, stacked in (input, forget, output, candidate)
    order along the leading axis.

    w_x: (4, k, k, in_channels, hidden_channels)
    w_h: (4, k, k, hidden_channels, hidden_channels)
    b:   (4, hidden_channels)
    """

    kernel: int
    in_channels: int
    hidden_channels: int
    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        k, ci, ch = self.kernel, self.in_channels, self.hidden_channels
        if k < 1 or k % 2 == 0:
            raise DimMismatchError(f"kernel must be odd and positive, got {k}")
        if self.w_x.shape != (4, k, k, ci, ch):
            raise DimMismatchError(f"w_x shape {self.w_x.shape}")
        if self.w_h.shape != (4, k, k, ch, ch):
            raise DimMismatchError(f"w_h shape {self.w_h.shape}")
        if self.b.shape != (4, ch):
            raise DimMismatchError(f"b shape {self.b.shape}")

    @staticmethod
    def seeded(seed: int, in_channels: int, hidden_channels: int,
               kernel: int = 3, scale: float = 0.1) -> "ConvLSTMParams":
        """Deterministic random initialization, reproducible bit-exactly."""
        rng = Rng(seed, stream=11)
        k, ci, ch = kernel, in_channels, hidden_channels
        w_x = np.array(rng.normals(4 * k * k * ci * ch)).reshape(4, k, k, ci, ch) * scale
        w_h = np.array(rng.normals(4 * k * k * ch * ch)).reshape(4, k, k, ch, ch) * scale
        b = np.zeros((4, ch))
        return ConvLSTMParams(k, ci, ch, w_x, w_h, b)


@dataclass(frozen=True)
class ConvLSTMState:
    hidden: np.ndarray
    cell: np.ndarray

    @staticmethod
    def zeros(h: int, w: int, hidden_channels: int) -> "ConvLSTMState":
        return ConvLSTMState(np.zeros((h, w, hidden_channels)),
                             np.zeros((h, w, hidden_channels)))


def _conv_same(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Same-padded 2-D convolution of all four gates at once.

    x: (h, w, cin); w: (4, k, k, cin, cout) -> (4, h, w, cout)
    """
    k = w.shape[1]
    pad = k // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    patches = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(0, 1))
    # patches: (h, w, cin, k, k)
    return np.einsum("xycuv,guvcd->gxyd", patches, w, optimize=True)


def convlstm_step(x, prev: ConvLSTMState, p: ConvLSTMParams):
    """One recurrence step; returns (new state, output map).

    Gates: sigmoid input/forget/output, tanh candidate; the output map equals
    the new hidden state, whose values are strictly inside (-1, 1).
    """
    x = _check_feature(x, "input")
    h, w, c = x.shape
    if c != p.in_channels:
        raise DimMismatchError(f"input has {c} channels, cell expects {p.in_channels}")
    if prev.hidden.shape != (h, w, p.hidden_channels):
        raise DimMismatchError(
            f"state shape {prev.hidden.shape} vs expected {(h, w, p.hidden_channels)}")
    z = _conv_same(x, p.w_x) + _conv_same(prev.hidden, p.w_h) + p.b[:, None, None, :]
    gate_i = _sigmoid(z[0])
    gate_f = _sigmoid(z[1])
    gate_o = _sigmoid(z[2])
    cand = np.tanh(z[3])
    cell = gate_f * prev.cell + gate_i * cand
    hidden = gate_o * np.tanh(cell)
    state = ConvLSTMState(hidden, cell)
    return state, hidden


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        return 0.0  # zero-norm side scores neutral rather than NaN
    return float(a @ b) / (na * nb)


def _normalize_scores(scores: np.ndarray, normalize: str) -> np.ndarray:
    if normalize == "softmax":
        e = np.exp(scores - np.max(scores))
        return e / e.sum()
    if normalize == "raw":
        return scores
    raise ValueError(f"unknown normalization {normalize!r}")


def spatial_attention(x, h, normalize: str = "softmax") -> np.ndarray:
    """Per-channel correlation weights between a guidance map and one hidden
    state, as a length-c vector."""
    x = _check_feature(x, "guidance")
    h = _check_feature(h, "hidden")
    if x.shape != h.shape:
        raise DimMismatchError(f"shape mismatch {x.shape} vs {h.shape}")
    c = x.shape[2]
    scores = np.array([_cosine(x[:, :, j].ravel(), h[:, :, j].ravel())
                       for j in range(c)])
    return _normalize_scores(scores, normalize)


def temporal_attention(x, hs, normalize: str = "softmax") -> np.ndarray:
    """Whole-map correlation weights between a guidance map and each hidden
    state, as a length-N vector."""
    x = _check_feature(x, "guidance")
    hs = [_check_feature(h, "hidden") for h in hs]
    if not hs:
        raise EmptySequenceError("need at least one hidden state")
    for h in hs:
        if h.shape != x.shape:
            raise DimMismatchError(f"shape mismatch {x.shape} vs {h.shape}")
    scores = np.array([_cosine(x.ravel(), h.ravel()) for h in hs])
    return _normalize_scores(scores, normalize)


@dataclass(frozen=True)
class AttentionReport:
    temporal_weights: np.ndarray   # (N,)
    spatial_weights: np.ndarray    # (N, c)
    augmented: np.ndarray          # (h, w, c)


def content_augment(x, hs, normalize: str = "softmax") -> AttentionReport:
    """Fuse hidden states into one view's feature map (see module docstring)."""
    x = _check_feature(x, "guidance")
    if not list(hs):
        raise EmptySequenceError("need at least one hidden state")
    temporal = temporal_attention(x, hs, normalize)
    spatial = np.stack([spatial_attention(x, h, normalize) for h in hs])
    augmented = np.zeros_like(x)
    for i, h in enumerate(hs):
        augmented += temporal[i] * (spatial[i][None, None, :] * np.asarray(h, dtype=float))
    return AttentionReport(temporal, spatial, augmented)


def fuse_pair(x_prev, x_curr, proj: np.ndarray) -> np.ndarray:
    """Channel-concatenate two consecutive feature maps and project back to c
    channels with a fixed (2c, c) matrix, per pixel."""
    x_prev = _check_feature(x_prev, "previous")
    x_curr = _check_feature(x_curr, "current")
    if x_prev.shape != x_curr.shape:
        raise DimMismatchError(f"shape mismatch {x_prev.shape} vs {x_curr.shape}")
    c = x_prev.shape[2]
    proj = np.asarray(proj, dtype=float)
    if proj.shape != (2 * c, c):
        raise DimMismatchError(f"projection shape {proj.shape}, expected {(2 * c, c)}")
    stacked = np.concatenate([x_prev, x_curr], axis=2)
    return np.einsum("xyk,kc->xyc", stacked, proj)


def seeded_projection(seed: int, channels: int, scale: float = 0.3) -> np.ndarray:
    rng = Rng(seed, stream=12)
    return np.array(rng.normals(2 * channels * channels)).reshape(
        2 * channels, channels) * scale


def seeded_head(seed: int, hidden_channels: int, scale: float = 0.1) -> np.ndarray:
    rng = Rng(seed, stream=13)
    return np.array(rng.normals(6 * hidden_channels)).reshape(6, hidden_channels) * scale


def run_vo_sequence(features, p: ConvLSTMParams, head: np.ndarray):
    """Thread a feature sequence through the recurrence and read out one
    relative pose per step.

    Readout: global average pool over (h, w), then the fixed (6, hidden)
    linear map to a translation / log-rotation 6-vector.
    Returns (hidden_states, relative_poses), one of each per input feature.
    """
    features = [_check_feature(f) for f in features]
    if not features:
        raise EmptySequenceError("feature sequence is empty")
    head = np.asarray(head, dtype=float)
    if head.shape != (6, p.hidden_channels):
        raise DimMismatchError(f"head shape {head.shape}, expected (6, {p.hidden_channels})")
    h, w, _ = features[0].shape
    state = ConvLSTMState.zeros(h, w, p.hidden_channels)
    hidden_states = []
    poses = []
    for x in features:
        state, out = convlstm_step(x, state, p)
        hidden_states.append(state.hidden)
        pooled = out.mean(axis=(0, 1))
        vec = head @ pooled
        poses.append(PoseSE3(vec[:3], quat_exp(vec[3:])))
    return hidden_states, poses
