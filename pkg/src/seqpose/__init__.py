"""Sequence-enhanced camera relocalization toolkit.

Refines noisy drift-free global pose estimates with accurate-but-drifting
relative poses: a weighted L1 pose distance with learnable balance scalars,
sequence losses, spatio-temporal co-visibility attention over recurrent
hidden states, and test-time pose-graph optimization, validated end to end
on a deterministic synthetic trajectory simulator.
"""

__version__ = "0.1.0"

from .pose_algebra import (  # noqa: F401
    LossWeights,
    PoseSE3,
    pose_compose,
    pose_distance,
    pose_distance_grad,
    pose_inverse,
    quat_exp,
    quat_log,
    quat_normalize,
    relative_between,
)
