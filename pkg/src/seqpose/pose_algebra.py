"""Rigid-body poses, log-quaternion rotations, and the weighted L1 pose distance.

Conventions used throughout the package:

- Quaternions are length-4 float arrays ``[w, x, y, z]`` (scalar first),
  canonicalized to the ``w >= 0`` hemisphere; ties at ``w == 0`` are broken by
  making the first nonzero vector component positive.
- ``quat_log`` returns the half-angle axis vector ``u * theta/2`` for a
  rotation of angle theta about unit axis u, so its norm is at most pi/2 on
  canonical quaternions.
- Poses are world-from-camera transforms; ``pose_compose(a, b)`` applies ``b``
  first, then ``a``, i.e. chaining a relative pose onto a global pose by left
  composition yields the next global pose.
- The distance between poses is

      D(a, b) = |t_a - t_b|_1 * exp(-beta) + beta
              + |w_a - w_b|_1 * exp(-gamma) + gamma

  with w = quat_log of the canonicalized rotation and learnable balance
  scalars beta, gamma. A smoothed variant replaces |x| by sqrt(x^2 + eps^2)
  so optimizers avoid the kink; pass ``smooth_eps=0`` for the exact value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ZeroQuaternionError

_SERIES_EPS = 1e-8      # below this vector norm, log/exp use series expansions
_UNIT_TOL = 1e-12       # squared-norm slack treated as already unit
_KINK_TOL = 1e-9        # exact-L1 gradient flags components this close to zero


def _as_vec(x, n: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"expected shape ({n},), got {a.shape}")
    return a


def quat_canonicalize(q: np.ndarray) -> np.ndarray:
    """Flip sign so w >= 0; ties broken by first nonzero vector component."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        return -q
    if q[0] == 0.0:
        for v in q[1:]:
            if v != 0.0:
                return -q if v < 0.0 else q
    return q


def quat_normalize(q) -> np.ndarray:
    """Scale a raw 4-vector to unit norm and canonicalize its hemisphere."""
    q = _as_vec(q, 4)
    n = math.sqrt(float(q @ q))
    if n <= 1e-12:
        raise ZeroQuaternionError(f"quaternion norm {n:g} too small")
    return quat_canonicalize(q / n)


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by + ay * bw + az * bx - ax * bz,
        aw * bz + az * bw + ax * by - ay * bx,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion."""
    u = q[1:]
    s = q[0]
    uv = np.cross(u, v)
    return v + 2.0 * s * uv + 2.0 * np.cross(u, uv)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def quat_log(q: np.ndarray) -> np.ndarray:
    """Half-angle log map: unit quaternion -> u * theta/2 (canonicalizes first)."""
    q = quat_canonicalize(np.asarray(q, dtype=float))
    s = q[0]
    v = q[1:]
    r = math.sqrt(float(v @ v))
    if r < _SERIES_EPS:
        # arcsin(r)/r series on the unit sphere, 4th order
        r2 = r * r
        factor = 1.0 + r2 / 6.0 + 3.0 * r2 * r2 / 40.0
    else:
        factor = math.atan2(r, s) / r
    return v * factor


def quat_exp(v) -> np.ndarray:
    """Inverse of quat_log: u * theta/2 -> unit quaternion, canonical hemisphere."""
    v = _as_vec(v, 3)
    r = math.sqrt(float(v @ v))
    if r < _SERIES_EPS:
        r2 = r * r
        sinc = 1.0 - r2 / 6.0 + r2 * r2 / 120.0
    else:
        sinc = math.sin(r) / r
    return quat_canonicalize(np.concatenate(([math.cos(r)], v * sinc)))


@dataclass(frozen=True)
class PoseSE3:
    """6-DoF pose: translation in meters plus a canonical unit quaternion."""

    t: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        t = _as_vec(self.t, 3).copy()
        q = _as_vec(self.q, 4).copy()
        n2 = float(q @ q)
        if n2 <= 1e-24:
            raise ZeroQuaternionError("pose rotation has near-zero norm")
        # skip the division when already unit so serialization round-trips
        # bit-exactly; the unit invariant holds to _UNIT_TOL either way
        if abs(n2 - 1.0) > _UNIT_TOL:
            q = q / math.sqrt(n2)
        q = quat_canonicalize(q)
        t.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "q", q)

    @staticmethod
    def identity() -> "PoseSE3":
        return PoseSE3(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    def log_rotation(self) -> np.ndarray:
        return quat_log(self.q)


@dataclass(frozen=True)
class LossWeights:
    """Learnable balance scalars; exp(-beta) weights translation error,
    exp(-gamma) weights rotation error."""

    beta: float = -3.0
    gamma: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.beta) and math.isfinite(self.gamma)):
            raise ValueError("loss weights must be finite")


def pose_compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """Apply b first, then a: rotation q_a*q_b, translation t_a + R(q_a) t_b."""
    return PoseSE3(a.t + quat_rotate(a.q, b.t), quat_mul(a.q, b.q))


def pose_inverse(p: PoseSE3) -> PoseSE3:
    qi = quat_conj(p.q)
    return PoseSE3(-quat_rotate(qi, p.t), qi)


def relative_between(frm: PoseSE3, to: PoseSE3) -> PoseSE3:
    """Pose r with pose_compose(r, frm) == to."""
    return pose_compose(to, pose_inverse(frm))


def _smooth_abs(x: np.ndarray, eps: float) -> np.ndarray:
    if eps == 0.0:
        return np.abs(x)
    return np.sqrt(x * x + eps * eps)


def _smooth_sign(x: np.ndarray, eps: float) -> np.ndarray:
    if eps == 0.0:
        return np.sign(x)
    return x / np.sqrt(x * x + eps * eps)


def pose_distance(p_hat: PoseSE3, p: PoseSE3, w: LossWeights,
                  smooth_eps: float = 0.0) -> float:
    """Weighted L1 distance between two poses (see module docstring)."""
    dt = _smooth_abs(p_hat.t - p.t, smooth_eps)
    dw = _smooth_abs(quat_log(p_hat.q) - quat_log(p.q), smooth_eps)
    return (float(dt.sum()) * math.exp(-w.beta) + w.beta
            + float(dw.sum()) * math.exp(-w.gamma) + w.gamma)


@dataclass(frozen=True)
class DistanceGrad:
    """Gradient of pose_distance w.r.t. the second pose's parameters
    (translation and log-quaternion coordinates) and the balance scalars.
    ``non_smooth`` flags exact-mode evaluation at or near an L1 kink."""

    t: np.ndarray
    rot: np.ndarray
    beta: float
    gamma: float
    non_smooth: bool


def pose_distance_grad(p_hat: PoseSE3, p: PoseSE3, w: LossWeights,
                       smooth_eps: float = 0.0) -> DistanceGrad:
    dt = p_hat.t - p.t
    dw = quat_log(p_hat.q) - quat_log(p.q)
    eb = math.exp(-w.beta)
    eg = math.exp(-w.gamma)
    non_smooth = False
    if smooth_eps == 0.0:
        non_smooth = bool(np.any(np.abs(dt) < _KINK_TOL)
                          or np.any(np.abs(dw) < _KINK_TOL))
    g_t = -eb * _smooth_sign(dt, smooth_eps)
    g_rot = -eg * _smooth_sign(dw, smooth_eps)
    g_beta = 1.0 - float(_smooth_abs(dt, smooth_eps).sum()) * eb
    g_gamma = 1.0 - float(_smooth_abs(dw, smooth_eps).sum()) * eg
    return DistanceGrad(g_t, g_rot, g_beta, g_gamma, non_smooth)


# --- Jacobian helpers for chaining gradients through compositions ---------
#
# These are ambient-space Jacobians of smooth extensions of the maps; the
# chain rules in losses/pose_graph only ever apply them to directions tangent
# to the unit sphere, where they equal the intrinsic derivatives.

def quat_mul_left_matrix(a: np.ndarray) -> np.ndarray:
    """L(a) with L(a) @ b == quat_mul(a, b)."""
    w, x, y, z = a
    return np.array([
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ])


def quat_mul_right_matrix(b: np.ndarray) -> np.ndarray:
    """R(b) with R(b) @ a == quat_mul(a, b)."""
    w, x, y, z = b
    return np.array([
        [w, -x, -y, -z],
        [x, w, z, -y],
        [y, -z, w, x],
        [z, y, -x, w],
    ])


def quat_exp_jacobian(v: np.ndarray) -> np.ndarray:
    """4x3 Jacobian of quat_exp at v (before hemisphere canonicalization)."""
    v = np.asarray(v, dtype=float)
    r = math.sqrt(float(v @ v))
    # wide series window: (r cos r - sin r)/r^3 cancels catastrophically
    # for small r if evaluated directly
    if r < 1e-3:
        r2 = r * r
        sinc = 1.0 - r2 / 6.0 + r2 * r2 / 120.0
        c2 = -1.0 / 3.0 + r2 / 30.0 - r2 * r2 / 840.0
    else:
        sinc = math.sin(r) / r
        c2 = (r * math.cos(r) - math.sin(r)) / (r * r * r)
    jac = np.empty((4, 3))
    jac[0, :] = -sinc * v
    jac[1:, :] = sinc * np.eye(3) + c2 * np.outer(v, v)
    return jac


def quat_log_jacobian(q: np.ndarray) -> np.ndarray:
    """3x4 Jacobian of the half-angle log map at a unit quaternion q.

    Valid along directions tangent to the unit sphere. The caller is
    responsible for hemisphere handling (evaluate at the canonical q).
    """
    q = np.asarray(q, dtype=float)
    s = q[0]
    v = q[1:]
    r = math.sqrt(float(v @ v))
    # (s r - phi)/r^3 cancels catastrophically for small r; use the
    # unit-sphere series over a wide window
    if r < 1e-3:
        r2 = r * r
        g = 1.0 + r2 / 6.0 + 3.0 * r2 * r2 / 40.0     # arcsin(r)/r
        c = -2.0 / 3.0 - r2 / 5.0 - 3.0 * r2 * r2 / 28.0
    else:
        phi = math.atan2(r, s)
        g = phi / r
        c = (s * r - phi) / (r * r * r)
    jac = np.empty((3, 4))
    jac[:, 0] = -v
    jac[:, 1:] = g * np.eye(3) + c * np.outer(v, v)
    return jac


def quat_rotate_jacobian(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """3x4 Jacobian of quat_rotate(q, v) w.r.t. q (tangent directions)."""

    def skew(a):
        return np.array([[0.0, -a[2], a[1]],
                         [a[2], 0.0, -a[0]],
                         [-a[1], a[0], 0.0]])

    s = q[0]
    u = q[1:]
    uv = np.cross(u, v)
    jac = np.empty((3, 4))
    jac[:, 0] = 2.0 * uv
    jac[:, 1:] = -2.0 * s * skew(v) - 2.0 * skew(uv) - 2.0 * (skew(u) @ skew(v))
    return jac
