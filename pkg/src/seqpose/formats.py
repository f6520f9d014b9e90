"""Shared on-disk formats: trajectory text, tensor binary, key=value config.

Trajectory text: one pose per line, ``frame_id tx ty tz qw qx qy qz``,
whitespace separated, ``#`` starts a comment, translations in meters,
quaternions canonical. Floats are written with 17 significant digits so a
read/write cycle is bit-exact.

Tensor binary ("SEQT"): magic bytes ``SEQT``, little-endian u16 format
version (=1), u32 h, u32 w, u32 c, u32 n, then n*h*w*c float64 values,
little-endian, row-major per tensor (h outer, then w, then c).

Config / manifest: ``key=value`` lines, ``#`` comments, one key per line.
Manifests written next to command outputs are valid config files, so a run
can be replayed with ``--config <manifest>``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .exceptions import TensorFormatError
from .pose_algebra import PoseSE3

SEQT_MAGIC = b"SEQT"
SEQT_VERSION = 1


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trajectory(path, poses, frame_ids=None, comment: str = "") -> None:
    poses = list(poses)
    if frame_ids is None:
        frame_ids = range(len(poses))
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("# frame_id tx ty tz qw qx qy qz")
    for fid, p in zip(frame_ids, poses):
        vals = [_fmt(v) for v in (*p.t, *p.q)]
        lines.append(f"{int(fid)} " + " ".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path) -> tuple[list[int], list[PoseSE3]]:
    frame_ids: list[int] = []
    poses: list[PoseSE3] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ValueError(f"bad trajectory line (need 8 fields): {raw!r}")
        fid = int(parts[0])
        vals = [float(v) for v in parts[1:]]
        frame_ids.append(fid)
        poses.append(PoseSE3(np.array(vals[:3]), np.array(vals[3:])))
    return frame_ids, poses


def write_tensors(path, tensors) -> None:
    tensors = [np.asarray(t, dtype=float) for t in tensors]
    if not tensors:
        raise ValueError("tensor list is empty")
    h, w, c = tensors[0].shape
    for t in tensors:
        if t.shape != (h, w, c):
            raise ValueError(f"inconsistent tensor shape {t.shape} vs {(h, w, c)}")
        if not np.all(np.isfinite(t)):
            raise ValueError("tensor contains non-finite values")
    header = struct.pack("<4sHIIII", SEQT_MAGIC, SEQT_VERSION, h, w, c, len(tensors))
    body = b"".join(t.astype("<f8").tobytes(order="C") for t in tensors)
    Path(path).write_bytes(header + body)


def read_tensors(path) -> list[np.ndarray]:
    data = Path(path).read_bytes()
    head_size = struct.calcsize("<4sHIIII")
    if len(data) < head_size:
        raise TensorFormatError("file too short for SEQT header")
    magic, version, h, w, c, n = struct.unpack_from("<4sHIIII", data)
    if magic != SEQT_MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}")
    if version != SEQT_VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    count = n * h * w * c
    expected = head_size + 8 * count
    if len(data) != expected:
        raise TensorFormatError(f"size mismatch: {len(data)} bytes, expected {expected}")
    flat = np.frombuffer(data, dtype="<f8", offset=head_size, count=count)
    return [flat[i * h * w * c:(i + 1) * h * w * c].reshape(h, w, c).copy()
            for i in range(n)]


def write_config(path, items: dict, header_comments=()) -> None:
    lines = [f"# {c}" for c in header_comments]
    for key, value in items.items():
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_config(path) -> dict[str, str]:
    items: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (need key=value): {raw!r}")
        key, value = line.split("=", 1)
        items[key.strip()] = value.strip()
    return items


def write_report(path, items: dict) -> None:
    # diff-friendly key: value report
    lines = [f"{k}: {v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def write_mask(path, mask) -> None:
    lines = ["# frame_id outlier"]
    lines += [f"{i} {int(bool(m))}" for i, m in enumerate(mask)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mask(path) -> list[bool]:
    mask = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        _, flag = line.split()
        mask.append(bool(int(flag)))
    return mask
