"""Homogeneous 3-D point transforms and the error statistics used to
compare calibration methods.

Conventions: points are length-3 array-likes in meters, transforms are
4x4 row-major matrices acting on column vectors (x, y, z, 1). Everything
here is a pure function of its inputs; values are immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateProjectionError,
    DegenerateStatisticsError,
    InputError,
)

RIGID = "rigid"
GENERAL = "general"

_W_EPS = 1e-12  # fourth homogeneous component below this is degenerate


@dataclass(frozen=True)
class HomogeneousTransform:
    """A 4x4 homogeneous matrix with a tag telling how strict its shape is.

    ``rigid`` transforms promise an exact [0, 0, 0, 1] bottom row (their
    rotation block may still be a least-squares estimate rather than
    orthonormal). ``general`` transforms carry no row constraint and may
    act projectively.
    """

    m: np.ndarray
    kind: str = RIGID

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (4, 4):
            raise InputError(f"transform matrix must be 4x4, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InputError("transform matrix has non-finite entries")
        if self.kind not in (RIGID, GENERAL):
            raise InputError(f"unknown transform kind {self.kind!r}")
        if self.kind == RIGID and not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise InputError("rigid transform must have bottom row [0,0,0,1]")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)


def identity() -> HomogeneousTransform:
    return HomogeneousTransform(np.eye(4), RIGID)


def translation(tx: float, ty: float, tz: float) -> HomogeneousTransform:
    m = np.eye(4)
    m[:3, 3] = (tx, ty, tz)
    return HomogeneousTransform(m, RIGID)


def rotation_xyz(theta_x: float, theta_y: float, theta_z: float) -> np.ndarray:
    """Combined rotation Rz(theta_z) @ Ry(theta_y) @ Rx(theta_x) as 3x3."""
    cx, sx = math.cos(theta_x), math.sin(theta_x)
    cy, sy = math.cos(theta_y), math.sin(theta_y)
    cz, sz = math.cos(theta_z), math.sin(theta_z)
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    return rz @ ry @ rx


def rigid_from_rt(rotation: np.ndarray, offset) -> HomogeneousTransform:
    """Assemble a rigid transform from a 3x3 rotation block and a translation."""
    m = np.eye(4)
    m[:3, :3] = np.asarray(rotation, dtype=float)
    m[:3, 3] = np.asarray(offset, dtype=float)
    return HomogeneousTransform(m, RIGID)


def compose(a: HomogeneousTransform, b: HomogeneousTransform) -> HomogeneousTransform:
    """Matrix product a @ b: apply b first, then a."""
    kind = RIGID if a.kind == RIGID and b.kind == RIGID else GENERAL
    return HomogeneousTransform(a.m @ b.m, kind)


def apply_transform(t: HomogeneousTransform, point) -> np.ndarray:
    """Map one 3-D point through ``t`` with perspective division.

    Rigid transforms keep the fourth component exactly 1, so the division
    is a no-op for them. A general transform may send a point to a
    numerically zero fourth component, which raises.
    """
    p = np.asarray(point, dtype=float)
    if p.shape != (3,):
        raise InputError(f"expected a 3-D point, got shape {p.shape}")
    h = t.m @ np.append(p, 1.0)
    w = h[3]
    if abs(w) < _W_EPS:
        raise DegenerateProjectionError(
            f"point {tuple(p)} projects to w={w:.3e}"
        )
    return h[:3] / w


def apply_transform_many(t: HomogeneousTransform, points) -> np.ndarray:
    """Vectorized :func:`apply_transform` for an (n, 3) array of points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InputError(f"expected an (n, 3) point array, got shape {pts.shape}")
    h = np.hstack([pts, np.ones((len(pts), 1))]) @ t.m.T
    w = h[:, 3]
    if np.any(np.abs(w) < _W_EPS):
        bad = int(np.argmin(np.abs(w)))
        raise DegenerateProjectionError(
            f"point index {bad} projects to w={w[bad]:.3e}"
        )
    return h[:, :3] / w[:, None]


@dataclass(frozen=True)
class AxisStats:
    """Absolute-error statistics along one axis, in meters / meters^2."""

    mean_abs: float
    std: float
    variance: float
    mse: float


@dataclass(frozen=True)
class AxisErrorStats:
    """Per-axis error statistics between actual and predicted point sets."""

    x: AxisStats
    y: AxisStats
    z: AxisStats

    def mean_mse(self) -> float:
        """Mean of the three per-axis mean squared errors."""
        return (self.x.mse + self.y.mse + self.z.mse) / 3.0

    def to_dict(self) -> dict:
        return {
            axis: {
                "mean_abs": s.mean_abs,
                "std": s.std,
                "variance": s.variance,
                "mse": s.mse,
            }
            for axis, s in (("x", self.x), ("y", self.y), ("z", self.z))
        }


def axis_error_stats(actual, predicted) -> AxisErrorStats:
    """Per-axis mean absolute error, its spread, and the mean squared error.

    The absolute error e_i = |actual_i - predicted_i| feeds the mean, the
    (population) standard deviation and the variance; the MSE averages the
    signed squared differences. Sample order does not matter.
    """
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3 or a.shape != p.shape:
        raise InputError(
            f"need matching (n, 3) point arrays, got {a.shape} and {p.shape}"
        )
    if len(a) == 0:
        raise InputError("empty point lists")
    diff = a - p
    abs_err = np.abs(diff)
    per_axis = []
    for axis in range(3):
        e = abs_err[:, axis]
        var = float(np.var(e))
        per_axis.append(
            AxisStats(
                mean_abs=float(np.mean(e)),
                std=float(np.sqrt(var)),
                variance=var,
                mse=float(np.mean(diff[:, axis] ** 2)),
            )
        )
    return AxisErrorStats(*per_axis)


def pearson_r(x, y) -> float:
    """Pearson correlation coefficient between two equal-length samples.

    Raises for samples shorter than 2 or with zero variance, where the
    coefficient is undefined.
    """
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.ndim != 1 or yv.ndim != 1 or xv.shape != yv.shape:
        raise InputError("pearson_r needs two equal-length 1-D samples")
    if len(xv) < 2:
        raise InputError("pearson_r needs at least 2 samples")
    xc = xv - xv.mean()
    yc = yv - yv.mean()
    sx = float(np.sqrt(np.sum(xc * xc)))
    sy = float(np.sqrt(np.sum(yc * yc)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateStatisticsError("zero variance sample in pearson_r")
    return float(np.sum(xc * yc) / (sx * sy))
