"""Test-time pose-graph refinement.

Nodes are the predicted global poses, edges the predicted step poses. The
objective keeps candidates close to the original predictions while enforcing
chain consistency along edges:

    F(P') = sum_i D(P_i, P'_i) + alpha * sum_k D(P'_{k+1}, E_k * P'_k)

with D the weighted L1 pose distance (beta, gamma frozen) and E_k the step
pose from node k to k+1. Minimization is plain gradient descent with a
backtracking line search on the eps-smoothed objective, initialized at the
predictions themselves. Rotations are optimized in local coordinates: each
step right-multiplies a small rotation onto the current quaternion, which is
then renormalized, so the unit constraint holds exactly.

The line search warm-starts from twice the previously accepted step and only
accepts strict sufficient decrease, so the objective is monotone
non-increasing. Besides the gradient tolerance and the iteration cap, the
solver stops when no step above 1e-18 decreases the objective (float
precision exhausted near a minimizer).
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
)

_ARMIJO_C1 = 1e-4
_STEP_FLOOR = 1e-18


@dataclass(frozen=True)
class PoseGraph:
    """Priors (predicted global poses), edges (step poses), and the balance
    scalars used inside the distance."""

    priors: tuple
    edges: tuple
    alpha: float = 1.0
    weights: LossWeights = LossWeights()

    def __post_init__(self):
        object.__setattr__(self, "priors", tuple(self.priors))
        object.__setattr__(self, "edges", tuple(self.edges))
        n = len(self.priors)
        if n < 2:
            raise LengthMismatchError(f"need at least 2 nodes, got {n}")
        if len(self.edges) != n - 1:
            raise LengthMismatchError(
                f"{len(self.edges)} edges for {n} nodes, expected {n - 1}")
        if not (self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def n_nodes(self) -> int:
        return len(self.priors)


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 500
    step_init: float = 1e-2
    grad_tol: float = 1e-8
    smoothing_eps: float = 1e-6
    line_search_shrink: float = 0.5

    def __post_init__(self):
        if self.max_iters < 1 or self.step_init <= 0 or self.grad_tol <= 0 \
                or self.smoothing_eps <= 0:
            raise ValueError("solver parameters must be positive")
        if not (0.0 < self.line_search_shrink < 1.0):
            raise ValueError("line_search_shrink must lie in (0, 1)")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    objective_initial: float
    objective_final: float
    grad_norm_final: float
    converged: bool


def chain_edges(start: PoseSE3, edges) -> list[PoseSE3]:
    """Dead-reckon a trajectory by left-composing each step pose in turn."""
    out = [start]
    for e in edges:
        out.append(pose_compose(e, out[-1]))
    return out


def pgo_objective(g: PoseGraph, candidate, smooth_eps: float = 0.0) -> float:
    """Objective value at a candidate node list (exact L1 by default)."""
    candidate = list(candidate)
    if len(candidate) != g.n_nodes:
        raise LengthMismatchError(
            f"candidate has {len(candidate)} poses, graph has {g.n_nodes} nodes")
    total = sum(pose_distance(p, c, g.weights, smooth_eps)
                for p, c in zip(g.priors, candidate))
    for k, e in enumerate(g.edges):
        chained = pose_compose(e, candidate[k])
        total += g.alpha * pose_distance(candidate[k + 1], chained,
                                         g.weights, smooth_eps)
    return total


# --- batched quaternion helpers (rows are [w, x, y, z]) --------------------

def _bq_canon(q: np.ndarray) -> np.ndarray:
    q = q.copy()
    flip = q[:, 0] < 0.0
    ties = q[:, 0] == 0.0
    if np.any(ties):
        for i in np.nonzero(ties)[0]:
            for v in q[i, 1:]:
                if v != 0.0:
                    flip[i] = v < 0.0
                    break
    q[flip] = -q[flip]
    return q


def _bq_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def _bq_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    bw, bx, by, bz = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by + ay * bw + az * bx - ax * bz,
        aw * bz + az * bw + ax * by - ay * bx,
    ], axis=1)


def _bq_conj(q: np.ndarray) -> np.ndarray:
    out = q.copy()
    out[:, 1:] = -out[:, 1:]
    return out


def _bq_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    s = q[:, :1]
    u = q[:, 1:]
    uv = np.cross(u, v)
    return v + 2.0 * s * uv + 2.0 * np.cross(u, uv)


def _bq_log(q: np.ndarray) -> np.ndarray:
    q = _bq_canon(q)
    s = q[:, 0]
    v = q[:, 1:]
    r = np.linalg.norm(v, axis=1)
    small = r < 1e-8
    r_safe = np.where(small, 1.0, r)
    r2 = r * r
    series = 1.0 + r2 / 6.0 + 3.0 * r2 * r2 / 40.0
    factor = np.where(small, series, np.arctan2(r, s) / r_safe)
    return v * factor[:, None]


def _bq_exp(v: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(v, axis=1)
    small = r < 1e-8
    r_safe = np.where(small, 1.0, r)
    r2 = r * r
    series = 1.0 - r2 / 6.0 + r2 * r2 / 120.0
    sinc = np.where(small, series, np.sin(r_safe) / r_safe)
    return _bq_canon(np.concatenate([np.cos(r)[:, None], v * sinc[:, None]], axis=1))


def _bq_log_jacobian(q: np.ndarray) -> np.ndarray:
    """(n, 3, 4) ambient Jacobian of the half-angle log at unit quaternions."""
    s = q[:, 0]
    v = q[:, 1:]
    r = np.linalg.norm(v, axis=1)
    small = r < 1e-3
    r_safe = np.where(small, 1.0, r)
    r2 = r * r
    phi = np.arctan2(r, s)
    g = np.where(small, 1.0 + r2 / 6.0 + 3.0 * r2 * r2 / 40.0, phi / r_safe)
    c = np.where(small, -2.0 / 3.0 - r2 / 5.0 - 3.0 * r2 * r2 / 28.0,
                 (s * r - phi) / (r_safe ** 3))
    n = q.shape[0]
    jac = np.empty((n, 3, 4))
    jac[:, :, 0] = -v
    jac[:, :, 1:] = g[:, None, None] * np.eye(3)[None] \
        + c[:, None, None] * v[:, :, None] * v[:, None, :]
    return jac


def _bq_left_cols(q: np.ndarray) -> np.ndarray:
    """(n, 4, 3): the vector-part columns of the left-multiplication matrix,
    i.e. d(q * exp(delta))/d(delta) at delta = 0."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    n = q.shape[0]
    cols = np.empty((n, 4, 3))
    cols[:, 0, 0], cols[:, 0, 1], cols[:, 0, 2] = -x, -y, -z
    cols[:, 1, 0], cols[:, 1, 1], cols[:, 1, 2] = w, -z, y
    cols[:, 2, 0], cols[:, 2, 1], cols[:, 2, 2] = z, w, -x
    cols[:, 3, 0], cols[:, 3, 1], cols[:, 3, 2] = -y, x, w
    return cols


def _local_rot_jacobian(q: np.ndarray) -> np.ndarray:
    """(n, 3, 3): d log(q * exp(delta))/d(delta) at delta = 0, canonical q."""
    return np.einsum("nij,njk->nik", _bq_log_jacobian(q), _bq_left_cols(q))


def _smooth_abs(x: np.ndarray, eps: float) -> np.ndarray:
    if eps == 0.0:
        return np.abs(x)
    return np.sqrt(x * x + eps * eps)


def _smooth_sign(x: np.ndarray, eps: float) -> np.ndarray:
    if eps == 0.0:
        return np.sign(x)
    return x / np.sqrt(x * x + eps * eps)


class _GraphArrays:
    """Priors and edges unpacked into arrays for the solver hot path."""

    def __init__(self, g: PoseGraph):
        self.alpha = g.alpha
        self.eb = math.exp(-g.weights.beta)
        self.eg = math.exp(-g.weights.gamma)
        self.beta = g.weights.beta
        self.gamma = g.weights.gamma
        self.n = g.n_nodes
        self.tp = np.stack([p.t for p in g.priors])
        qp = np.stack([p.q for p in g.priors])
        self.wp = _bq_log(qp)
        self.qe = np.stack([e.q for e in g.edges])
        self.te = np.stack([e.t for e in g.edges])
        self.qe_conj = _bq_conj(self.qe)


def _edge_residuals(ga: _GraphArrays, t: np.ndarray, q: np.ndarray, w: np.ndarray):
    qc = _bq_canon(_bq_mul(ga.qe, q[:-1]))
    wc = _bq_log(qc)
    tc = ga.te + _bq_rotate(ga.qe, t[:-1])
    return qc, t[1:] - tc, w[1:] - wc


def _objective_arrays(ga: _GraphArrays, t: np.ndarray, q: np.ndarray,
                      eps: float) -> float:
    w = _bq_log(q)
    dt = ga.tp - t
    dw = ga.wp - w
    total = (ga.eb * float(_smooth_abs(dt, eps).sum())
             + ga.eg * float(_smooth_abs(dw, eps).sum())
             + ga.n * (ga.beta + ga.gamma))
    _, dte, dwe = _edge_residuals(ga, t, q, w)
    total += ga.alpha * (ga.eb * float(_smooth_abs(dte, eps).sum())
                         + ga.eg * float(_smooth_abs(dwe, eps).sum())
                         + (ga.n - 1) * (ga.beta + ga.gamma))
    return total


def _grad_arrays(ga: _GraphArrays, t: np.ndarray, q: np.ndarray, eps: float):
    w = _bq_log(q)
    m_node = _local_rot_jacobian(q)
    g_t = -ga.eb * _smooth_sign(ga.tp - t, eps)
    g_r = -ga.eg * np.einsum("ni,nij->nj", _smooth_sign(ga.wp - w, eps), m_node)

    qc, dte, dwe = _edge_residuals(ga, t, q, w)
    st = _smooth_sign(dte, eps)
    sw = _smooth_sign(dwe, eps)
    a = ga.alpha
    g_t[1:] += a * ga.eb * st
    g_r[1:] += a * ga.eg * np.einsum("ni,nij->nj", sw, m_node[1:])
    g_t[:-1] += -a * ga.eb * _bq_rotate(ga.qe_conj, st)
    g_r[:-1] += -a * ga.eg * np.einsum("ni,nij->nj", sw, _local_rot_jacobian(qc))
    return g_t, g_r


def pgo_objective_grad(g: PoseGraph, candidate, smooth_eps: float = 1e-6):
    """Gradient of the smoothed objective w.r.t. candidate pose parameters.

    Returns (grad_t, grad_rot), each (N, 3): translation components directly,
    rotation components for right-multiplied log-quaternion perturbations.
    """
    candidate = list(candidate)
    if len(candidate) != g.n_nodes:
        raise LengthMismatchError(
            f"candidate has {len(candidate)} poses, graph has {g.n_nodes} nodes")
    ga = _GraphArrays(g)
    t = np.stack([p.t for p in candidate])
    q = _bq_canon(np.stack([p.q for p in candidate]))
    return _grad_arrays(ga, t, q, smooth_eps)


def pgo_optimize(g: PoseGraph, cfg: SolverConfig = SolverConfig()):
    """Refine the graph's nodes; returns (refined poses, solve report)."""
    ga = _GraphArrays(g)
    eps = cfg.smoothing_eps
    t = ga.tp.copy()
    q = _bq_canon(np.stack([p.q for p in g.priors]))

    f = _objective_arrays(ga, t, q, eps)
    f_initial = f
    alpha = cfg.step_init
    iterations = 0
    converged = False
    grad_norm = 0.0

    for it in range(1, cfg.max_iters + 1):
        g_t, g_r = _grad_arrays(ga, t, q, eps)
        grad_norm = math.sqrt(float((g_t * g_t).sum() + (g_r * g_r).sum()))
        if grad_norm <= cfg.grad_tol:
            converged = True
            break

        step = 2.0 * alpha
        accepted = False
        while step >= _STEP_FLOOR:
            t_new = t - step * g_t
            q_new = _bq_canon(_bq_normalize(_bq_mul(q, _bq_exp(-step * g_r))))
            f_new = _objective_arrays(ga, t_new, q_new, eps)
            if f_new <= f - _ARMIJO_C1 * step * grad_norm * grad_norm:
                accepted = True
                break
            step *= cfg.line_search_shrink
        if not accepted:
            # no float-representable decrease left
            break
        t, q, f = t_new, q_new, f_new
        alpha = step
        iterations = it

    g_t, g_r = _grad_arrays(ga, t, q, eps)
    grad_norm = math.sqrt(float((g_t * g_t).sum() + (g_r * g_r).sum()))
    if grad_norm <= cfg.grad_tol:
        converged = True

    refined = [PoseSE3(t[i], q[i]) for i in range(ga.n)]
    report = SolveReport(iterations, f_initial, f, grad_norm, converged)
    return refined, report
