"""Deterministic synthetic trajectories with relocalization-like and
VO-like measurement corruption.

The ground truth is a smooth planar random walk. Two measurement channels
mimic the asymmetry the toolkit exists to exploit:

- global measurements: each frame's pose perturbed independently (noisy but
  drift-free), with occasional large translation outliers;
- step measurements: each frame-to-frame relative pose perturbed by small
  noise, so chaining them drifts without bound.

Per-frame co-visible feature tensors share a per-seed landmark pattern mixed
with per-frame noise.

Every operation derives its own generator substream from (config.seed), so
outputs are pure functions of the config regardless of call order:
stream 0 trajectory, 1 global noise, 2 step noise, 3 features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pose_algebra import PoseSE3, quat_exp, quat_mul, relative_between
from .rng import Rng

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class SimConfig:
    n_frames: int = 7
    seed: int = 0
    step_mean: float = 0.2        # meters per step
    turn_sigma: float = 3.0       # degrees per step
    global_t_sigma: float = 0.25  # meters
    global_r_sigma: float = 5.0   # degrees
    outlier_rate: float = 0.1
    outlier_t: float = 3.0        # meters
    vo_t_sigma: float = 0.01      # meters per step
    vo_r_sigma: float = 0.1       # degrees per step
    feat_dims: tuple = (4, 4, 8)
    covis_overlap: float = 0.7

    def __post_init__(self):
        if self.n_frames < 2:
            raise ValueError(f"need at least 2 frames, got {self.n_frames}")
        for name in ("step_mean", "turn_sigma", "global_t_sigma", "global_r_sigma",
                     "outlier_t", "vo_t_sigma", "vo_r_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not (0.0 <= self.outlier_rate < 1.0):
            raise ValueError("outlier_rate must lie in [0, 1)")
        if not (0.0 <= self.covis_overlap <= 1.0):
            raise ValueError("covis_overlap must lie in [0, 1]")
        h, w, c = self.feat_dims
        if min(h, w, c) < 1:
            raise ValueError("feature dims must be positive")


@dataclass(frozen=True)
class SimOutput:
    gt: list
    global_meas: list
    vo_meas: list
    outlier_mask: list
    features: list


def _yaw_quat(angle: float) -> np.ndarray:
    return np.array([math.cos(angle / 2.0), 0.0, 0.0, math.sin(angle / 2.0)])


def _noise_quat(rng: Rng, sigma_deg: float) -> np.ndarray:
    # axis uniform on the sphere, angle normal; draws consumed even when
    # sigma is zero so streams stay aligned across configs
    axis = np.array(rng.unit_vector3())
    angle = rng.normal(0.0, 1.0) * sigma_deg * _DEG
    return quat_exp(axis * (angle / 2.0))


def simulate_trajectory(cfg: SimConfig) -> list[PoseSE3]:
    """Planar random walk: heading jitters, forward steps carry 10% length
    jitter around step_mean."""
    rng = Rng(cfg.seed, stream=0)
    heading = 0.0
    pos = np.zeros(3)
    poses = [PoseSE3(pos, _yaw_quat(heading))]
    for _ in range(cfg.n_frames - 1):
        heading += rng.normal(0.0, 1.0) * cfg.turn_sigma * _DEG
        step = cfg.step_mean * (1.0 + 0.1 * rng.normal(0.0, 1.0))
        pos = pos + step * np.array([math.cos(heading), math.sin(heading), 0.0])
        poses.append(PoseSE3(pos, _yaw_quat(heading)))
    return poses


def corrupt_global(gt, cfg: SimConfig):
    """Independent per-frame perturbation, plus occasional translation jumps.
    Returns (measurements, outlier mask)."""
    rng = Rng(cfg.seed, stream=1)
    meas = []
    mask = []
    for p in gt:
        dt = np.array(rng.normals(3)) * cfg.global_t_sigma
        dq = _noise_quat(rng, cfg.global_r_sigma)
        t = np.asarray(p.t) + dt
        is_outlier = rng.uniform() < cfg.outlier_rate
        if is_outlier:
            t = t + np.array(rng.unit_vector3()) * cfg.outlier_t
        meas.append(PoseSE3(t, quat_mul(dq, p.q)))
        mask.append(is_outlier)
    return meas, mask


def corrupt_vo(gt, cfg: SimConfig) -> list[PoseSE3]:
    """Small noise on each true step pose; chaining the results drifts."""
    rng = Rng(cfg.seed, stream=2)
    out = []
    for k in range(len(gt) - 1):
        true_rel = relative_between(gt[k], gt[k + 1])
        dt = np.array(rng.normals(3)) * cfg.vo_t_sigma
        dq = _noise_quat(rng, cfg.vo_r_sigma)
        out.append(PoseSE3(np.asarray(true_rel.t) + dt, quat_mul(dq, true_rel.q)))
    return out


def synth_features(gt, cfg: SimConfig) -> list[np.ndarray]:
    """Per-frame tensors sharing a per-seed landmark pattern: overlap * L +
    (1 - overlap) * noise, each channel normalized to unit RMS."""
    rng = Rng(cfg.seed, stream=3)
    h, w, c = cfg.feat_dims
    landmark = np.array(rng.normals(h * w * c)).reshape(h, w, c)
    feats = []
    for _ in gt:
        noise = np.array(rng.normals(h * w * c)).reshape(h, w, c)
        feat = cfg.covis_overlap * landmark + (1.0 - cfg.covis_overlap) * noise
        rms = np.sqrt((feat * feat).mean(axis=(0, 1)))
        feat = feat / np.where(rms < 1e-15, 1.0, rms)[None, None, :]
        feats.append(feat)
    return feats


def simulate(cfg: SimConfig) -> SimOutput:
    """All channels for one config."""
    gt = simulate_trajectory(cfg)
    global_meas, mask = corrupt_global(gt, cfg)
    vo_meas = corrupt_vo(gt, cfg)
    features = synth_features(gt, cfg)
    return SimOutput(gt, global_meas, vo_meas, mask, features)
