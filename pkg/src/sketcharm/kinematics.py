"""Serial-arm kinematics for the drawing arm.

Covers Denavit-Hartenberg link transforms, forward kinematics for the
5-DOF right arm and its reduced 3-DOF drawing variant, a finite-difference
positional Jacobian, the iterative pseudoinverse IK solver, and the
closed-form 3-DOF IK.

Angles are radians, lengths meters. The DH convention used here builds a
link transform as Rx(alpha) * Tx(a) * Tz(d) * Rz(theta), i.e. twist and
common normal are indexed to the previous link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InputError,
    LimitViolationError,
    NonConvergenceError,
    SingularAzimuthError,
    UnreachableTargetError,
)
from .geometry import RIGID, HomogeneousTransform, identity


@dataclass(frozen=True)
class DhRow:
    """One DH table row. ``fixed`` set means the row has no joint variable;
    otherwise the joint angle is (variable + ``offset``)."""

    alpha: float
    a: float
    d: float
    fixed: float | None = None
    offset: float = 0.0

    @property
    def is_variable(self) -> bool:
        return self.fixed is None


@dataclass(frozen=True)
class KinematicChain:
    """Ordered DH rows plus per-joint limits and an optional base offset."""

    name: str
    rows: tuple[DhRow, ...]
    joint_limits: tuple[tuple[float, float], ...]
    base_offset: HomogeneousTransform = field(default_factory=identity)

    def __post_init__(self):
        n_var = sum(1 for r in self.rows if r.is_variable)
        if len(self.joint_limits) != n_var:
            raise InputError(
                f"chain {self.name!r}: {n_var} joint variables but "
                f"{len(self.joint_limits)} limit pairs"
            )
        for lo, hi in self.joint_limits:
            if not lo < hi:
                raise InputError(f"chain {self.name!r}: joint limit {lo} >= {hi}")

    @property
    def dof(self) -> int:
        return len(self.joint_limits)

    def lower_limits(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.joint_limits])

    def upper_limits(self) -> np.ndarray:
        return np.array([hi for _, hi in self.joint_limits])

    def clamp(self, q) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float), self.lower_limits(), self.upper_limits())

    def within_limits(self, q, tol: float = 0.0) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(
            np.all(q >= self.lower_limits() - tol)
            and np.all(q <= self.upper_limits() + tol)
        )


def _dh_matrix(alpha: float, a: float, d: float, theta: float) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    ct, st = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [ct, -st, 0.0, a],
            [st * ca, ct * ca, -sa, -d * sa],
            [st * sa, ct * sa, ca, d * ca],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def link_transform(row: DhRow, theta_value: float = 0.0) -> HomogeneousTransform:
    """Rigid transform for one DH row at the given joint value.

    ``theta_value`` is ignored for fixed rows; for variable rows the
    row's constant offset is added to it.
    """
    theta = row.fixed if row.fixed is not None else theta_value + row.offset
    return HomogeneousTransform(_dh_matrix(row.alpha, row.a, row.d, theta), RIGID)


def _fk_matrix(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """End-effector 4x4 matrix without dataclass wrapping (hot path)."""
    t = chain.base_offset.m
    j = 0
    for row in chain.rows:
        if row.is_variable:
            theta = q[j] + row.offset
            j += 1
        else:
            theta = row.fixed
        t = t @ _dh_matrix(row.alpha, row.a, row.d, theta)
    return t


def forward_kinematics(
    chain: KinematicChain, q, check_limits: bool = False
) -> tuple[np.ndarray, HomogeneousTransform]:
    """End-effector position and full transform for joint vector ``q``.

    With ``check_limits`` the call rejects out-of-range joints instead of
    silently evaluating them.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise InputError(f"chain {chain.name!r} expects {chain.dof} joints, got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InputError("joint vector has non-finite entries")
    if check_limits and not chain.within_limits(q):
        raise LimitViolationError(
            f"joints {np.round(q, 4).tolist()} outside limits of chain {chain.name!r}"
        )
    t = _fk_matrix(chain, q)
    return t[:3, 3].copy(), HomogeneousTransform(t, RIGID)


def numerical_jacobian(chain: KinematicChain, q, h: float = 1e-6) -> np.ndarray:
    """Central-difference positional Jacobian, shape (3, dof)."""
    if h <= 0:
        raise InputError("step h must be positive")
    q = np.asarray(q, dtype=float)
    jac = np.zeros((3, chain.dof))
    for j in range(chain.dof):
        dq = np.zeros(chain.dof)
        dq[j] = h
        plus = _fk_matrix(chain, q + dq)[:3, 3]
        minus = _fk_matrix(chain, q - dq)[:3, 3]
        jac[:, j] = (plus - minus) / (2.0 * h)
    return jac


@dataclass(frozen=True)
class IkConfig:
    """Knobs for the iterative solver.

    ``max_step`` caps the joint-space norm of one update; pseudoinverse
    steps near a singular pose can otherwise leave the region where the
    linearization holds.
    """

    tol: float = 1e-6
    max_iter: int = 1000
    step_scale: float = 1.0
    damping: float = 0.0
    clamp: bool = True
    max_step: float = 0.5

    def __post_init__(self):
        if self.tol <= 0:
            raise InputError("tol must be positive")
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")
        if not 0.0 < self.step_scale <= 1.0:
            raise InputError("step_scale must be in (0, 1]")
        if self.damping < 0:
            raise InputError("damping must be >= 0")
        if self.max_step <= 0:
            raise InputError("max_step must be positive")


@dataclass(frozen=True)
class IkResult:
    joints: np.ndarray
    residual: float
    iterations: int
    errors: tuple[float, ...]  # positional error before each update


def _damped_pinv(jac: np.ndarray, damping: float) -> np.ndarray:
    """Pseudoinverse via SVD with relative truncation and optional damping."""
    u, s, vt = np.linalg.svd(jac, full_matrices=False)
    keep = s > 1e-9 * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    inv = np.zeros_like(s)
    if damping > 0:
        inv[keep] = s[keep] / (s[keep] ** 2 + damping**2)
    else:
        inv[keep] = 1.0 / s[keep]
    return vt.T @ np.diag(inv) @ u.T


def _constrained_step(
    chain: KinematicChain, q: np.ndarray, residual: np.ndarray,
    jac: np.ndarray, cfg: "IkConfig",
) -> np.ndarray:
    """One pseudoinverse step, projected onto the feasible joint box.

    Joints sitting at a limit whose raw step points further outward are
    frozen and removed from the pseudoinverse; otherwise the clamped
    update can stall on a limit face even though an interior solution
    exists. With no limit active this is the plain damped pseudoinverse
    step.
    """
    step = _damped_pinv(jac, cfg.damping) @ residual
    if not cfg.clamp:
        return step
    lo = chain.lower_limits()
    hi = chain.upper_limits()
    frozen = np.zeros(chain.dof, dtype=bool)
    for _ in range(chain.dof):
        pinned = (((q <= lo) & (step < 0)) | ((q >= hi) & (step > 0))) & ~frozen
        if not pinned.any():
            break
        frozen |= pinned
        reduced = jac.copy()
        reduced[:, frozen] = 0.0
        step = _damped_pinv(reduced, cfg.damping) @ residual
        step[frozen] = 0.0
    return step


def _capped(step: np.ndarray, max_step: float) -> np.ndarray:
    norm = float(np.linalg.norm(step))
    if norm > max_step:
        return step * (max_step / norm)
    return step


def solve_ik_iterative(
    chain: KinematicChain, target, seed, cfg: IkConfig = IkConfig()
) -> IkResult:
    """Iterate joint updates q += step * pinv(J) (target - fk(q)) to the target.

    Convergence is positional only; joints are clipped to their limits
    after every update when ``cfg.clamp`` is set. Raises
    :class:`NonConvergenceError` (carrying the best joints and residual)
    when the iteration budget runs out.
    """
    target = np.asarray(target, dtype=float)
    if target.shape != (3,):
        raise InputError(f"target must be a 3-D point, got shape {target.shape}")
    q = np.asarray(seed, dtype=float).copy()
    if q.shape != (chain.dof,):
        raise InputError(f"seed must have {chain.dof} joints, got shape {q.shape}")

    errors: list[float] = []
    best_q = q.copy()
    best_err = math.inf
    for it in range(cfg.max_iter + 1):
        residual = target - _fk_matrix(chain, q)[:3, 3]
        err = float(np.linalg.norm(residual))
        errors.append(err)
        if err < best_err:
            best_err = err
            best_q = q.copy()
        if err < cfg.tol:
            return IkResult(q, err, it, tuple(errors))
        if it == cfg.max_iter:
            break
        jac = numerical_jacobian(chain, q)
        step = _capped(_constrained_step(chain, q, residual, jac, cfg), cfg.max_step)
        q = q + cfg.step_scale * step
        if cfg.clamp:
            q = chain.clamp(q)
    raise NonConvergenceError(
        f"no convergence to tol={cfg.tol} within {cfg.max_iter} iterations "
        f"(best residual {best_err:.3e} m)",
        joints=best_q,
        residual=best_err,
        trace=tuple(errors),
    )


def solve_ik_closed_3dof(l1: float, l2: float, target) -> np.ndarray:
    """Closed-form joints for the reduced two-link drawing arm.

    Azimuth from atan2 on the target's x/y, elbow angle from the law of
    cosines (positive-sine branch only, which is the branch the elbow
    joint's range admits), shoulder angle from the projected reach. The
    returned joints satisfy fk(q) == target to floating-point accuracy.
    """
    if l1 <= 0 or l2 <= 0:
        raise InputError("link lengths must be positive")
    p = np.asarray(target, dtype=float)
    if p.shape != (3,):
        raise InputError(f"target must be a 3-D point, got shape {p.shape}")
    px, py, pz = p
    r2 = float(px * px + py * py + pz * pz)
    c3 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if abs(c3) > 1.0 + 1e-12:
        reach = math.sqrt(r2)
        raise UnreachableTargetError(
            f"target at distance {reach:.4f} m outside reachable band "
            f"[{abs(l1 - l2):.4f}, {l1 + l2:.4f}] m"
        )
    if px == 0.0 and py == 0.0:
        raise SingularAzimuthError("target on the base axis; azimuth undefined")
    c3 = min(1.0, max(-1.0, c3))
    s3 = math.sqrt(1.0 - c3 * c3)
    theta3 = math.atan2(s3, c3)
    theta1 = math.atan2(py, px)
    k1 = l1 + l2 * c3
    k2 = l2 * s3
    alpha = math.atan2(k2, k1)
    # sin(theta2 + alpha) = -pz / r with k1^2 + k2^2 = r^2; the cosine
    # branch is fixed positive, consistent with the atan2 azimuth above.
    theta2 = math.atan2(-pz, math.sqrt(max(r2 - pz * pz, 0.0))) - alpha
    return np.array([theta1, theta2, theta3])


# NAO right-arm geometry. Link lengths in meters; joint ranges in radians.
UPPER_ARM_M = 0.1050
FOREARM_COMBINED_M = 0.1137
ELBOW_OFFSET_M = 0.05595
HAND_OFFSET_M = 0.05775

SHOULDER_PITCH_RANGE = (-2.0857, 2.0857)
SHOULDER_ROLL_RANGE = (-1.3265, 0.3142)
ELBOW_ROLL_RANGE = (0.0349, 1.5446)
# The two yaw joints barely move while drawing and their ranges are not
# part of the published arm tables; give them the widest range used above.
ELBOW_YAW_RANGE = (-2.0857, 2.0857)
WRIST_YAW_RANGE = (-2.0857, 2.0857)

_HALF_PI = math.pi / 2.0


def nao_right_5dof() -> KinematicChain:
    """Full 5-joint right-arm chain (shoulder pitch/roll, elbow yaw/roll,
    wrist yaw) with a fixed tool row for the hand."""
    rows = (
        DhRow(alpha=0.0, a=0.0, d=0.0),
        DhRow(alpha=-_HALF_PI, a=0.0, d=0.0, offset=-_HALF_PI),
        DhRow(alpha=-_HALF_PI, a=0.0, d=UPPER_ARM_M),
        DhRow(alpha=_HALF_PI, a=0.0, d=0.0),
        DhRow(alpha=-_HALF_PI, a=0.0, d=ELBOW_OFFSET_M),
        DhRow(alpha=_HALF_PI, a=0.0, d=HAND_OFFSET_M, fixed=0.0),
    )
    limits = (
        SHOULDER_PITCH_RANGE,
        SHOULDER_ROLL_RANGE,
        ELBOW_YAW_RANGE,
        ELBOW_ROLL_RANGE,
        WRIST_YAW_RANGE,
    )
    return KinematicChain("nao-right-5dof", rows, limits)


def nao_right_5dof_drawing(
    elbow_yaw: float = 0.0, wrist_yaw: float = 0.0
) -> KinematicChain:
    """5-DOF chain with the two yaw joints frozen at configurable values,
    leaving the three joints that actually draw."""
    rows = (
        DhRow(alpha=0.0, a=0.0, d=0.0),
        DhRow(alpha=-_HALF_PI, a=0.0, d=0.0, offset=-_HALF_PI),
        DhRow(alpha=-_HALF_PI, a=0.0, d=UPPER_ARM_M, fixed=elbow_yaw),
        DhRow(alpha=_HALF_PI, a=0.0, d=0.0),
        DhRow(alpha=-_HALF_PI, a=0.0, d=ELBOW_OFFSET_M, fixed=wrist_yaw),
        DhRow(alpha=_HALF_PI, a=0.0, d=HAND_OFFSET_M, fixed=0.0),
    )
    limits = (SHOULDER_PITCH_RANGE, SHOULDER_ROLL_RANGE, ELBOW_ROLL_RANGE)
    return KinematicChain("nao-right-5dof-drawing", rows, limits)


def nao_right_3dof(base_offset: HomogeneousTransform | None = None) -> KinematicChain:
    """Reduced 3-joint chain: the distal links are merged into one and the
    last row is a fixed -90 degree tool rotation."""
    rows = (
        DhRow(alpha=0.0, a=0.0, d=0.0),
        DhRow(alpha=-_HALF_PI, a=0.0, d=0.0),
        DhRow(alpha=0.0, a=UPPER_ARM_M, d=0.0),
        DhRow(alpha=0.0, a=FOREARM_COMBINED_M, d=0.0, fixed=-_HALF_PI),
    )
    limits = (SHOULDER_PITCH_RANGE, SHOULDER_ROLL_RANGE, ELBOW_ROLL_RANGE)
    return KinematicChain(
        "nao-right-3dof", rows, limits, base_offset or identity()
    )


_BUILTIN_CHAINS = {
    "nao-right-5dof": nao_right_5dof,
    "nao-right-5dof-drawing": nao_right_5dof_drawing,
    "nao-right-3dof": nao_right_3dof,
}


def builtin_chain_names() -> tuple[str, ...]:
    return tuple(sorted(_BUILTIN_CHAINS))


def get_chain(name: str) -> KinematicChain:
    try:
        factory = _BUILTIN_CHAINS[name]
    except KeyError:
        raise InputError(
            f"unknown chain {name!r}; built-ins: {', '.join(builtin_chain_names())}"
        ) from None
    return factory()


def reduced_link_lengths(chain: KinematicChain) -> tuple[float, float]:
    """The (l1, l2) pair of a reduced 3-DOF drawing chain.

    The closed-form solver only applies to chains with the reduced-arm
    layout: three revolute joints followed by a fixed tool row, the two
    links carried on the common normals of rows 3 and 4.
    """
    if chain.dof != 3 or len(chain.rows) != 4 or chain.rows[3].is_variable:
        raise InputError(
            f"chain {chain.name!r} does not have the reduced 3-DOF layout"
        )
    l1, l2 = chain.rows[2].a, chain.rows[3].a
    if l1 <= 0 or l2 <= 0:
        raise InputError(f"chain {chain.name!r} has non-positive link lengths")
    return l1, l2


def solve_ik_closed_chain(chain: KinematicChain, target) -> np.ndarray:
    """Closed-form IK against a reduced 3-DOF chain, honouring its base offset."""
    l1, l2 = reduced_link_lengths(chain)
    p = np.asarray(target, dtype=float)
    base = chain.base_offset.m
    local = np.linalg.inv(base) @ np.append(p, 1.0)
    return solve_ik_closed_3dof(l1, l2, local[:3])
