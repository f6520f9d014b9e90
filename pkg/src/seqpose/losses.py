"""Sequence losses over global and relative pose predictions.

Three terms, each a sum of weighted L1 pose distances with its own learnable
(beta, gamma) pair:

- global loss: predictions vs ground-truth global poses, one term per frame;
- relative loss: predicted vs ground-truth step poses, one term per edge;
- joint consistency loss: each predicted global pose chained through the
  predicted step pose vs the next predicted global pose (no ground truth).

``loss_grad`` differentiates the total w.r.t. every predicted pose parameter
(translation directly, rotation via its log-quaternion coordinates, i.e. the
same 6-vector a pose regressor would output) and all six balance scalars.
Ground-truth poses are constants and carry no gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import LengthMismatchError
from .pose_algebra import (
    LossWeights,
    PoseSE3,
    pose_compose,
    pose_distance,
    quat_exp_jacobian,
    quat_log,
    quat_log_jacobian,
    quat_mul,
    quat_mul_left_matrix,
    quat_mul_right_matrix,
    quat_rotate,
    quat_rotate_jacobian,
    quat_to_matrix,
    _smooth_abs,
    _smooth_sign,
)


@dataclass(frozen=True)
class SequenceSample:
    """Predicted and ground-truth poses for one N-frame sequence.

    Step pose k connects frame k to frame k+1, so the relative lists hold
    N-1 entries.
    """

    global_pred: tuple
    vo_pred: tuple
    global_gt: tuple
    vo_gt: tuple

    def __post_init__(self):
        object.__setattr__(self, "global_pred", tuple(self.global_pred))
        object.__setattr__(self, "vo_pred", tuple(self.vo_pred))
        object.__setattr__(self, "global_gt", tuple(self.global_gt))
        object.__setattr__(self, "vo_gt", tuple(self.vo_gt))
        n = len(self.global_pred)
        if n < 2:
            raise LengthMismatchError(f"need at least 2 frames, got {n}")
        if len(self.global_gt) != n:
            raise LengthMismatchError(
                f"global_gt has {len(self.global_gt)} poses, expected {n}")
        for name in ("vo_pred", "vo_gt"):
            if len(getattr(self, name)) != n - 1:
                raise LengthMismatchError(
                    f"{name} has {len(getattr(self, name))} poses, expected {n - 1}")

    @property
    def n_frames(self) -> int:
        return len(self.global_pred)


@dataclass(frozen=True)
class LossBundle:
    """Independent balance scalars for the three loss terms."""

    weights_g: LossWeights = LossWeights()
    weights_vo: LossWeights = LossWeights()
    weights_joint: LossWeights = LossWeights()

    @staticmethod
    def shared(weights: LossWeights) -> "LossBundle":
        """One (beta, gamma) pair used by all three terms."""
        return LossBundle(weights, weights, weights)


def loss_global(s: SequenceSample, w: LossWeights, smooth_eps: float = 0.0) -> float:
    return sum(pose_distance(gt, p, w, smooth_eps)
               for gt, p in zip(s.global_gt, s.global_pred))


def loss_vo(s: SequenceSample, w: LossWeights, smooth_eps: float = 0.0) -> float:
    return sum(pose_distance(gt, p, w, smooth_eps)
               for gt, p in zip(s.vo_gt, s.vo_pred))


def loss_joint(s: SequenceSample, w: LossWeights, smooth_eps: float = 0.0) -> float:
    total = 0.0
    for k in range(s.n_frames - 1):
        chained = pose_compose(s.vo_pred[k], s.global_pred[k])
        total += pose_distance(s.global_pred[k + 1], chained, w, smooth_eps)
    return total


def loss_total(s: SequenceSample, b: LossBundle, smooth_eps: float = 0.0) -> float:
    return (loss_global(s, b.weights_g, smooth_eps)
            + loss_vo(s, b.weights_vo, smooth_eps)
            + loss_joint(s, b.weights_joint, smooth_eps))


@dataclass(frozen=True)
class LossGrad:
    """Gradients of the total loss; rows index frames / edges."""

    global_t: np.ndarray      # (N, 3)
    global_rot: np.ndarray    # (N, 3) log-quaternion coordinates
    vo_t: np.ndarray          # (N-1, 3)
    vo_rot: np.ndarray        # (N-1, 3)
    beta_g: float
    gamma_g: float
    beta_vo: float
    gamma_vo: float
    beta_joint: float
    gamma_joint: float


def loss_grad(s: SequenceSample, b: LossBundle, smooth_eps: float = 0.0) -> LossGrad:
    n = s.n_frames
    g_t = np.zeros((n, 3))
    g_rot = np.zeros((n, 3))
    gv_t = np.zeros((n - 1, 3))
    gv_rot = np.zeros((n - 1, 3))

    p_t = [np.asarray(p.t) for p in s.global_pred]
    p_w = [quat_log(p.q) for p in s.global_pred]
    v_t = [np.asarray(p.t) for p in s.vo_pred]
    v_w = [quat_log(p.q) for p in s.vo_pred]

    # global term: d = gt - pred, dD/dpred = -sign(d) * weight
    wg = b.weights_g
    eb, eg = math.exp(-wg.beta), math.exp(-wg.gamma)
    beta_g = gamma_g = 0.0
    for i in range(n):
        dt = np.asarray(s.global_gt[i].t) - p_t[i]
        dw = quat_log(s.global_gt[i].q) - p_w[i]
        g_t[i] -= eb * _smooth_sign(dt, smooth_eps)
        g_rot[i] -= eg * _smooth_sign(dw, smooth_eps)
        beta_g += 1.0 - float(_smooth_abs(dt, smooth_eps).sum()) * eb
        gamma_g += 1.0 - float(_smooth_abs(dw, smooth_eps).sum()) * eg

    # relative term, same structure over edges
    wv = b.weights_vo
    eb, eg = math.exp(-wv.beta), math.exp(-wv.gamma)
    beta_vo = gamma_vo = 0.0
    for k in range(n - 1):
        dt = np.asarray(s.vo_gt[k].t) - v_t[k]
        dw = quat_log(s.vo_gt[k].q) - v_w[k]
        gv_t[k] -= eb * _smooth_sign(dt, smooth_eps)
        gv_rot[k] -= eg * _smooth_sign(dw, smooth_eps)
        beta_vo += 1.0 - float(_smooth_abs(dt, smooth_eps).sum()) * eb
        gamma_vo += 1.0 - float(_smooth_abs(dw, smooth_eps).sum()) * eg

    # joint term: distance(pred[k+1], step[k] after pred[k]); the chained
    # pose needs jacobians through composition and the log map
    wj = b.weights_joint
    eb, eg = math.exp(-wj.beta), math.exp(-wj.gamma)
    beta_joint = gamma_joint = 0.0
    for k in range(n - 1):
        q_vo, q_b = s.vo_pred[k].q, s.global_pred[k].q
        qc_raw = quat_mul(q_vo, q_b)
        sigma = 1.0
        if qc_raw[0] < 0.0:
            sigma = -1.0
        qc = sigma * qc_raw
        wc = quat_log(qc)
        tc = v_t[k] + quat_rotate(q_vo, p_t[k])

        dt = p_t[k + 1] - tc
        dw = p_w[k + 1] - wc
        beta_joint += 1.0 - float(_smooth_abs(dt, smooth_eps).sum()) * eb
        gamma_joint += 1.0 - float(_smooth_abs(dw, smooth_eps).sum()) * eg

        st = _smooth_sign(dt, smooth_eps)
        sw = _smooth_sign(dw, smooth_eps)
        g_t[k + 1] += eb * st
        g_rot[k + 1] += eg * sw

        rho_t = -eb * st          # dD/d(tc)
        rho_w = -eg * sw          # dD/d(wc)
        jlog = quat_log_jacobian(qc)
        jexp_b = quat_exp_jacobian(p_w[k])
        jexp_vo = quat_exp_jacobian(v_w[k])

        g_t[k] += quat_to_matrix(q_vo).T @ rho_t
        g_rot[k] += (jlog @ (sigma * quat_mul_left_matrix(q_vo)) @ jexp_b).T @ rho_w

        gv_t[k] += rho_t
        gv_rot[k] += (quat_rotate_jacobian(q_vo, p_t[k]) @ jexp_vo).T @ rho_t
        gv_rot[k] += (jlog @ (sigma * quat_mul_right_matrix(q_b)) @ jexp_vo).T @ rho_w

    return LossGrad(g_t, g_rot, gv_t, gv_rot,
                    beta_g, gamma_g, beta_vo, gamma_vo, beta_joint, gamma_joint)
