"""Raster-or-points to joint-trajectory pipeline.

Edge pixels come from a plain 3x3 central-difference gradient threshold
(boundary points are all the drawing needs), strokes from greedy
nearest-neighbour chaining, and each stroke is pushed through the
image-to-board map, the board-to-arm calibrator, and a per-via-point IK
solve where every solution seeds the next one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import BoardRegion, ImageBounds, as_point_mapper, image_to_board
from .errors import (
    InputError,
    LimitViolationError,
    NonConvergenceError,
    SingularAzimuthError,
    SketchArmError,
    UnreachableTargetError,
)
from .kinematics import (
    IkConfig,
    KinematicChain,
    _fk_matrix,
    solve_ik_closed_chain,
    solve_ik_iterative,
)

PEN_DOWN = "down"
PEN_UP = "up"


@dataclass(frozen=True)
class GrayRaster:
    """Row-major grayscale grid with 8- or 16-bit intensities."""

    width: int
    height: int
    pixels: np.ndarray
    maxval: int = 255

    def __post_init__(self):
        if self.maxval not in (255, 65535):
            raise InputError(f"maxval must be 255 or 65535, got {self.maxval}")
        px = np.asarray(self.pixels)
        if px.shape != (self.height, self.width):
            raise InputError(
                f"pixel grid shape {px.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if px.size and (px.min() < 0 or px.max() > self.maxval):
            raise InputError("pixel values outside 0..maxval")
        px = px.astype(np.int64, copy=True)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def full_bounds(self) -> ImageBounds:
        return ImageBounds(0, self.width - 1, 0, self.height - 1)


def extract_edge_points(img: GrayRaster, threshold: float) -> list[tuple[int, int]]:
    """Pixels whose central-difference gradient magnitude exceeds the
    threshold, in row-major scan order. Border pixels are excluded."""
    if threshold <= 0:
        raise InputError("threshold must be positive")
    if img.width < 3 or img.height < 3:
        raise InputError("raster must be at least 3x3 for gradient extraction")
    px = img.pixels.astype(float)
    gx = (px[1:-1, 2:] - px[1:-1, :-2]) / 2.0
    gy = (px[2:, 1:-1] - px[:-2, 1:-1]) / 2.0
    mag = np.hypot(gx, gy)
    vs, us = np.nonzero(mag > threshold)
    return [(int(u) + 1, int(v) + 1) for v, u in zip(vs, us)]


@dataclass(frozen=True)
class SketchPlan:
    """Ordered strokes of pixel points plus the bounds they came from.

    ``bounds`` is None when the source points are degenerate (zero span
    along an axis); such a plan orders fine but cannot be mapped onto a
    board region. Raster and CSV flows carry integer pixels; synthetic
    plans may use fractional coordinates.
    """

    strokes: tuple[tuple[tuple[float, float], ...], ...]
    bounds: ImageBounds | None

    @property
    def point_count(self) -> int:
        return sum(len(s) for s in self.strokes)


def _bounds_of(points: np.ndarray) -> ImageBounds | None:
    u_min, v_min = points.min(axis=0)
    u_max, v_max = points.max(axis=0)
    if u_min == u_max or v_min == v_max:
        return None
    return ImageBounds(float(u_min), float(u_max), float(v_min), float(v_max))


def order_strokes(points, gap: float, bounds: ImageBounds | None = None) -> SketchPlan:
    """Chain points into strokes by greedy nearest-neighbour walking.

    Each stroke starts at the lexicographically smallest unvisited point
    and grows by repeatedly appending the nearest unvisited point while
    it lies within ``gap`` pixels (ties broken lexicographically). Every
    input point lands in exactly one stroke.
    """
    if gap <= 0:
        raise InputError("gap must be positive")
    pts = np.asarray(list(points), dtype=float)
    if len(pts) == 0:
        return SketchPlan((), bounds)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError(f"expected (n, 2) pixel points, got shape {pts.shape}")

    order = np.lexsort((pts[:, 1], pts[:, 0]))  # sort by u, then v
    pts = pts[order]
    n = len(pts)
    unvisited = np.ones(n, dtype=bool)
    gap2 = gap * gap
    strokes: list[tuple[tuple[int, int], ...]] = []
    visited_count = 0
    while visited_count < n:
        # after the lexsort, the first unvisited index is the smallest point
        current = int(np.argmax(unvisited))
        unvisited[current] = False
        visited_count += 1
        stroke = [current]
        while True:
            remaining = np.nonzero(unvisited)[0]
            if len(remaining) == 0:
                break
            d2 = np.sum((pts[remaining] - pts[current]) ** 2, axis=1)
            best = float(d2.min())
            if best > gap2:
                break
            # ties resolve to the lexicographically smallest point, which
            # is the first match thanks to the initial sort
            current = int(remaining[np.argmax(d2 == best)])
            unvisited[current] = False
            visited_count += 1
            stroke.append(current)
        strokes.append(tuple((_as_index(pts[i, 0]), _as_index(pts[i, 1])) for i in stroke))
    return SketchPlan(tuple(strokes), bounds if bounds is not None else _bounds_of(pts))


def _as_index(v: float):
    """Pixel coordinates stay ints when they are ints (CSV/raster flows)."""
    return int(v) if float(v).is_integer() else float(v)


@dataclass(frozen=True)
class TrajectoryPoint:
    joints: np.ndarray
    pen: str
    residual: float


@dataclass(frozen=True)
class JointTrajectory:
    """Per-stroke joint vectors with pen state and achieved residual."""

    chain_name: str
    strokes: tuple[tuple[TrajectoryPoint, ...], ...]

    def flat_points(self) -> list[TrajectoryPoint]:
        return [p for stroke in self.strokes for p in stroke]

    @property
    def point_count(self) -> int:
        return sum(len(s) for s in self.strokes)


def _tagged(exc: SketchArmError, stroke: int, index: int) -> SketchArmError:
    msg = f"stroke {stroke}, via point {index}: {exc}"
    if isinstance(exc, NonConvergenceError):
        return NonConvergenceError(
            msg, joints=exc.joints, residual=exc.residual, trace=exc.trace
        )
    return type(exc)(msg)


def plan_trajectory(
    plan: SketchPlan,
    board: BoardRegion,
    calibrator,
    chain: KinematicChain,
    cfg: IkConfig = IkConfig(),
    method: str = "iterative",
) -> JointTrajectory:
    """Solve IK for every via point of every stroke.

    Image points go through the plan bounds onto the board region, then
    through the calibrator into the arm frame. Within a stroke each
    iterative solve is seeded by the previous solution; stroke starts are
    seeded by the closed-form solution on reduced chains (zeros
    otherwise). The first point of each stroke is a pen-up travel move.
    Any unreachable or non-converging via point fails the whole plan with
    the stroke and point index in the error.
    """
    if method not in ("iterative", "closed"):
        raise InputError(f"method must be 'iterative' or 'closed', got {method!r}")
    if not plan.strokes:
        return JointTrajectory(chain.name, ())
    if plan.bounds is None:
        raise InputError("plan has degenerate bounds and cannot be mapped")
    if method == "closed" and chain.dof != 3:
        raise InputError("closed-form planning requires the reduced 3-DOF chain")

    mapper = as_point_mapper(calibrator)
    out_strokes = []
    for si, stroke in enumerate(plan.strokes):
        board_pts = image_to_board(stroke, plan.bounds, board)
        arm_pts = np.asarray(mapper(board_pts), dtype=float)
        points: list[TrajectoryPoint] = []
        seed = None
        for pi, target in enumerate(arm_pts):
            pen = PEN_UP if pi == 0 else PEN_DOWN
            try:
                if method == "closed":
                    joints = solve_ik_closed_chain(chain, target)
                    if not chain.within_limits(joints):
                        raise UnreachableTargetError(
                            "closed-form solution violates joint limits"
                        )
                    residual = float(
                        np.linalg.norm(_fk_matrix(chain, joints)[:3, 3] - target)
                    )
                else:
                    if seed is None:
                        seed = _stroke_seed(chain, target)
                    result = solve_ik_iterative(chain, target, seed, cfg)
                    joints, residual = result.joints, result.residual
            except (
                UnreachableTargetError,
                SingularAzimuthError,
                NonConvergenceError,
                LimitViolationError,
            ) as exc:
                raise _tagged(exc, si, pi) from exc
            seed = joints
            points.append(TrajectoryPoint(joints, pen, residual))
        out_strokes.append(tuple(points))
        # the next stroke re-seeds from scratch rather than from this one
    return JointTrajectory(chain.name, tuple(out_strokes))


def _stroke_seed(chain: KinematicChain, target) -> np.ndarray:
    if chain.dof == 3:
        try:
            return solve_ik_closed_chain(chain, target)
        except SketchArmError:
            pass
    return np.zeros(chain.dof)


def evaluate_drawing(commanded, traj: JointTrajectory, chain: KinematicChain) -> float:
    """Mean squared Euclidean distance between commanded arm points and
    the positions the trajectory's joints actually reach."""
    pts = np.asarray(commanded, dtype=float)
    flat = traj.flat_points()
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InputError(f"expected (n, 3) commanded points, got shape {pts.shape}")
    if len(pts) != len(flat):
        raise InputError(
            f"commanded point count {len(pts)} != trajectory point count {len(flat)}"
        )
    if len(pts) == 0:
        raise InputError("nothing to evaluate: empty trajectory")
    achieved = np.array([_fk_matrix(chain, p.joints)[:3, 3] for p in flat])
    return float(np.mean(np.sum((pts - achieved) ** 2, axis=1)))
