"""Shared synthetic-data builders for the test suite."""

from __future__ import annotations

import numpy as np

from sketcharm.calibration import CorrespondenceSet
from sketcharm.geometry import HomogeneousTransform, rigid_from_rt, rotation_xyz
from sketcharm.kinematics import KinematicChain

DEFAULT_ANGLES = (0.3, -0.2, 0.5)
DEFAULT_OFFSET = (0.12, -0.07, 0.31)


def sample_rigid_transform(
    angles=DEFAULT_ANGLES, offset=DEFAULT_OFFSET
) -> HomogeneousTransform:
    return rigid_from_rt(rotation_xyz(*angles), offset)


def rigid_pairs(
    n: int,
    seed: int,
    transform: HomogeneousTransform | None = None,
    noise: float = 0.0,
    planar_z: float | None = None,
    z_jitter: float = 0.0,
) -> CorrespondenceSet:
    """Board cloud plus its image under a rigid map, optionally noisy.

    ``planar_z`` pins the board points near one plane (with ``z_jitter``
    of flatness variation), which is the shape real board data has.
    """
    rng = np.random.default_rng(seed)
    t = transform or sample_rigid_transform()
    if planar_z is None:
        boards = rng.uniform(-0.2, 0.2, (n, 3))
    else:
        boards = np.column_stack(
            [
                rng.uniform(0.1, 0.4, n),
                rng.uniform(0.0, 0.3, n),
                np.full(n, planar_z) + rng.uniform(-z_jitter, z_jitter, n),
            ]
        )
    arms = boards @ t.m[:3, :3].T + t.m[:3, 3]
    if noise > 0:
        arms = arms + rng.normal(0.0, noise, arms.shape)
    return CorrespondenceSet(boards, arms)


def affine_pairs(n: int, seed: int, noise: float = 0.0) -> CorrespondenceSet:
    """Board cloud mapped through a random well-conditioned affine map."""
    rng = np.random.default_rng(seed)
    linear = rng.uniform(-0.8, 0.8, (3, 3)) + np.eye(3)
    offset = rng.uniform(-0.3, 0.3, 3)
    boards = rng.uniform(-0.2, 0.2, (n, 3))
    arms = boards @ linear.T + offset
    if noise > 0:
        arms = arms + rng.normal(0.0, noise, arms.shape)
    return CorrespondenceSet(boards, arms)


def random_in_limit_joints(chain: KinematicChain, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo = chain.lower_limits()
    hi = chain.upper_limits()
    return rng.uniform(lo, hi, (n, chain.dof))
