"""Trajectory error metrics and summaries.

Per-frame errors: Euclidean translation distance in meters and geodesic
rotation angle 2*arccos(|<q_pred, q_gt>|) in degrees. Summaries follow the
two reporting conventions in common use: median (even counts take the lower
of the two central order statistics, not their midpoint) and arithmetic
mean. The rotation metric always uses the full geodesic angle, independent
of the half-angle scale used inside the training loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import EmptySeriesError, LengthMismatchError


@dataclass(frozen=True)
class ErrorSeries:
    trans_errors: np.ndarray   # meters
    rot_errors: np.ndarray     # degrees
    frame_ids: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.trans_errors, dtype=float)
        r = np.asarray(self.rot_errors, dtype=float)
        f = np.asarray(self.frame_ids, dtype=int)
        if not (len(t) == len(r) == len(f)):
            raise LengthMismatchError("error series fields differ in length")
        if len(t) and (np.min(t) < 0 or np.min(r) < 0):
            raise ValueError("errors must be nonnegative")
        if len(t) and not (np.all(np.isfinite(t)) and np.all(np.isfinite(r))):
            raise ValueError("errors must be finite")
        object.__setattr__(self, "trans_errors", t)
        object.__setattr__(self, "rot_errors", r)
        object.__setattr__(self, "frame_ids", f)

    def __len__(self) -> int:
        return len(self.trans_errors)


@dataclass(frozen=True)
class CdfCurve:
    thresholds: np.ndarray
    fractions: np.ndarray


def frame_errors(pred, gt, frame_ids=None) -> ErrorSeries:
    pred, gt = list(pred), list(gt)
    if len(pred) != len(gt):
        raise LengthMismatchError(f"{len(pred)} predictions vs {len(gt)} references")
    if len(pred) == 0:
        raise LengthMismatchError("need at least one pose pair")
    if frame_ids is None:
        frame_ids = range(len(pred))
    trans = []
    rot = []
    for p, g in zip(pred, gt):
        trans.append(float(np.linalg.norm(np.asarray(p.t) - np.asarray(g.t))))
        dot = abs(float(np.dot(p.q, g.q)))
        rot.append(2.0 * math.acos(min(1.0, dot)) / math.pi * 180.0)
    return ErrorSeries(np.array(trans), np.array(rot), np.array(list(frame_ids)))


def _lower_median(values: np.ndarray) -> float:
    ordered = np.sort(values)
    return float(ordered[(len(ordered) - 1) // 2])


def summarize(e: ErrorSeries, mode: str = "median") -> tuple[float, float]:
    """(translation, rotation) summary under the given convention."""
    if len(e) == 0:
        raise EmptySeriesError("cannot summarize an empty series")
    if mode == "median":
        return _lower_median(e.trans_errors), _lower_median(e.rot_errors)
    if mode == "mean":
        return float(e.trans_errors.mean()), float(e.rot_errors.mean())
    raise ValueError(f"unknown mode {mode!r}")


def cdf(e: ErrorSeries, component: str = "trans", n_points: int = 100) -> CdfCurve:
    """Empirical CDF sampled at evenly spaced thresholds from 0 to the max."""
    if len(e) == 0:
        raise EmptySeriesError("cannot build a CDF from an empty series")
    if n_points < 2:
        raise ValueError("need at least 2 points")
    if component == "trans":
        errors = e.trans_errors
    elif component == "rot":
        errors = e.rot_errors
    else:
        raise ValueError(f"unknown component {component!r}")
    thresholds = np.linspace(0.0, float(errors.max()), n_points)
    fractions = np.array([(errors <= thr).sum() / len(errors) for thr in thresholds])
    return CdfCurve(thresholds, fractions)
