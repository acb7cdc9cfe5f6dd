"""Board calibration: estimate the image-to-board map and the
board-to-arm transform three different ways, and compare the methods.

The three board-to-arm estimators are

* a least-squares affine fit from as few as four correspondences
  ("four-point"),
* a normalized homogeneous 4x4 point-map fit solved as an SVD null
  vector after Hartley-style cloud normalization ("matrix"), and
* a small sigmoid-hidden-layer regressor trained with
  Levenberg-Marquardt ("mlp").

All estimators are pure functions of (data, config, seed); repeated runs
are bit-identical.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CalibrationMethodError,
    DegenerateConfigurationError,
    DegenerateStatisticsError,
    InputError,
    InsufficientDataError,
    TrainingFailureError,
)
from .geometry import (
    GENERAL,
    RIGID,
    AxisErrorStats,
    HomogeneousTransform,
    apply_transform_many,
    axis_error_stats,
    pearson_r,
)


@dataclass(frozen=True)
class BoardRegion:
    """Reachable drawing rectangle on the board plane, in meters."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_plane: float = 0.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InputError("board region must have positive x and y spans")


@dataclass(frozen=True)
class ImageBounds:
    """Pixel rectangle the mapped image points live in."""

    u_min: float
    u_max: float
    v_min: float
    v_max: float

    def __post_init__(self):
        if not (self.u_min < self.u_max and self.v_min < self.v_max):
            raise InputError("image bounds must have positive u and v spans")

    def contains(self, u: float, v: float) -> bool:
        return self.u_min <= u <= self.u_max and self.v_min <= v <= self.v_max


@dataclass(frozen=True)
class CorrespondenceSet:
    """Paired board-frame / arm-frame points used to fit calibrations."""

    boards: np.ndarray
    arms: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boards, dtype=float)
        a = np.asarray(self.arms, dtype=float)
        if b.ndim != 2 or b.shape[1] != 3 or b.shape != a.shape:
            raise InputError(
                f"need matching (n, 3) arrays, got {b.shape} and {a.shape}"
            )
        if len(b) == 0:
            raise InputError("correspondence set is empty")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(a))):
            raise InputError("correspondence set has non-finite points")
        b.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "boards", b)
        object.__setattr__(self, "arms", a)

    @classmethod
    def from_pairs(cls, pairs) -> "CorrespondenceSet":
        boards = [p[0] for p in pairs]
        arms = [p[1] for p in pairs]
        return cls(np.asarray(boards, dtype=float), np.asarray(arms, dtype=float))

    @property
    def n(self) -> int:
        return len(self.boards)


def image_to_board(points, bounds: ImageBounds, region: BoardRegion) -> np.ndarray:
    """Affine per-axis interpolation of pixel points onto the board plane.

    The bounds corners map onto the region corners; z is the fixed plane
    constant. Returns an (n, 3) array of board points.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        return np.zeros((0, 3))
    if pts.shape[1] != 2:
        raise InputError(f"expected (n, 2) pixel points, got shape {pts.shape}")
    for u, v in pts:
        if not bounds.contains(u, v):
            raise InputError(f"pixel point ({u}, {v}) outside image bounds")
    du = bounds.u_max - bounds.u_min
    dv = bounds.v_max - bounds.v_min
    bx = region.x_min + (pts[:, 0] - bounds.u_min) / du * (region.x_max - region.x_min)
    by = region.y_min + (pts[:, 1] - bounds.v_min) / dv * (region.y_max - region.y_min)
    bz = np.full(len(pts), region.z_plane)
    return np.column_stack([bx, by, bz])


_CONST_Z_RTOL = 1e-9  # relative spread below which the z column is constant


def _z_column_constant(z: np.ndarray) -> bool:
    spread = float(z.max() - z.min())
    return spread <= _CONST_Z_RTOL * max(float(np.abs(z).max()), 1.0)


def estimate_four_point(
    cs: CorrespondenceSet, reduce_constant_z: bool = True
) -> HomogeneousTransform:
    """Affine board-to-arm fit: one linear solve per output axis.

    With exactly four well-placed pairs the solve is exact; more pairs
    give the least-squares solution. Board data on a constant-z plane
    makes the z column proportional to the constant column; with
    ``reduce_constant_z`` the solve drops the z column and folds its
    contribution into the offset, otherwise the rank check rejects the
    configuration.
    """
    if cs.n < 4:
        raise InsufficientDataError(f"four-point fit needs >= 4 pairs, got {cs.n}")
    z = cs.boards[:, 2]
    reduced = reduce_constant_z and _z_column_constant(z)
    if reduced:
        design = np.column_stack([cs.boards[:, 0], cs.boards[:, 1], np.ones(cs.n)])
        required_rank = 3
    else:
        design = np.hstack([cs.boards, np.ones((cs.n, 1))])
        required_rank = 4
    sol, _, rank, _ = np.linalg.lstsq(design, cs.arms, rcond=None)
    if rank < required_rank:
        raise DegenerateConfigurationError(
            f"coefficient matrix rank {rank} < {required_rank}; "
            "point configuration is degenerate"
        )
    m = np.eye(4)
    if reduced:
        m[:3, 0] = sol[0]
        m[:3, 1] = sol[1]
        m[:3, 2] = 0.0  # z coefficient folded into the offset column
        m[:3, 3] = sol[2]
    else:
        m[:3, :] = sol.T
    return HomogeneousTransform(m, RIGID)


def _normalization_transform(points: np.ndarray) -> np.ndarray:
    """Scale-translation matrix centering a cloud and fixing its mean
    magnitude to sqrt(3)."""
    mu = points.mean(axis=0)
    mean_mag = float(np.linalg.norm(points - mu, axis=1).mean())
    if mean_mag < 1e-12:
        raise DegenerateConfigurationError(
            "all points coincide; normalization scale undefined"
        )
    s = math.sqrt(3.0) / mean_mag
    t = np.eye(4)
    t[0, 0] = t[1, 1] = t[2, 2] = s
    t[:3, 3] = -s * mu
    return t


def estimate_normalized_matrix(cs: CorrespondenceSet) -> HomogeneousTransform:
    """General 4x4 point-map fit with cloud normalization.

    Both clouds are centered and scaled, every pair contributes the three
    homogeneous proportionality constraints between the mapped board
    point and the arm point, and the 16 matrix entries come out of the
    right-singular vector of the smallest singular value. The result is
    denormalized back to the original frames and rescaled so its
    bottom-right entry is 1 (falling back to unit Frobenius norm when
    that entry vanishes).

    The returned transform is ``general``: it has no fixed bottom row and
    is applied with perspective division.
    """
    if cs.n < 16:
        raise InsufficientDataError(
            f"matrix fit estimates 16 unknowns and needs >= 16 pairs, got {cs.n}"
        )
    t_board = _normalization_transform(cs.boards)
    t_arm = _normalization_transform(cs.arms)
    bh = np.hstack([cs.boards, np.ones((cs.n, 1))]) @ t_board.T
    ah = np.hstack([cs.arms, np.ones((cs.n, 1))]) @ t_arm.T

    system = np.zeros((3 * cs.n, 16))
    for i in range(cs.n):
        b = bh[i]
        for k in range(3):
            row = system[3 * i + k]
            row[4 * k : 4 * k + 4] = b
            row[12:16] = -ah[i, k] * b
    _, _, vt = np.linalg.svd(system, full_matrices=False)
    f_norm = vt[-1].reshape(4, 4)

    f = np.linalg.inv(t_arm) @ f_norm @ t_board
    if abs(f[3, 3]) > 1e-9:
        f = f / f[3, 3]
    else:
        f = f / np.linalg.norm(f)
    return HomogeneousTransform(f, GENERAL)


# --- sigmoid-hidden-layer regressor trained with Levenberg-Marquardt ----

HIDDEN_UNITS = 10
_IN = 4  # homogeneous board point
_OUT = 4  # homogeneous arm point
N_PARAMS = HIDDEN_UNITS * _IN + HIDDEN_UNITS + _OUT * HIDDEN_UNITS + _OUT


@dataclass(frozen=True)
class MlpCalibrator:
    """4-10-4 regressor: sigmoid hidden layer, linear output layer."""

    w1: np.ndarray  # (10, 4)
    b1: np.ndarray  # (10,)
    w2: np.ndarray  # (4, 10)
    b2: np.ndarray  # (4,)
    seed: int = 0

    def __post_init__(self):
        shapes = {
            "w1": (HIDDEN_UNITS, _IN),
            "b1": (HIDDEN_UNITS,),
            "w2": (_OUT, HIDDEN_UNITS),
            "b2": (_OUT,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise InputError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise InputError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class TrainingConfig:
    """Levenberg-Marquardt training knobs.

    ``split`` fractions must be positive and sum to 1. The damping
    ``mu_init`` is multiplied by ``mu_factor`` whenever a step would
    increase the training error and divided by it on every accepted step.
    """

    mu_init: float = 1e-3
    mu_factor: float = 10.0
    stop_mse: float = 1e-5
    max_epochs: int = 500
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self):
        if self.mu_init <= 0 or self.mu_factor <= 1:
            raise InputError("need mu_init > 0 and mu_factor > 1")
        if self.stop_mse <= 0 or self.max_epochs < 1:
            raise InputError("need stop_mse > 0 and max_epochs >= 1")
        if len(self.split) != 3 or any(f <= 0 for f in self.split):
            raise InputError("split needs three positive fractions")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise InputError(f"split fractions must sum to 1, got {sum(self.split)}")


@dataclass(frozen=True)
class TrainingTrace:
    """Per-epoch record of an LM run. Index 0 holds the pre-training state."""

    train_mse: tuple[float, ...]
    val_mse: tuple[float, ...]
    test_mse: tuple[float, ...]
    accepted: tuple[bool, ...]
    epochs: int
    converged: bool
    final_pearson_r: float


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(w1, b1, w2, b2, x_h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hidden = _sigmoid(x_h @ w1.T + b1)
    return hidden @ w2.T + b2, hidden


def _flatten(w1, b1, w2, b2) -> np.ndarray:
    return np.concatenate([w1.ravel(), b1, w2.ravel(), b2])


def _unflatten(v: np.ndarray):
    i = HIDDEN_UNITS * _IN
    w1 = v[:i].reshape(HIDDEN_UNITS, _IN)
    b1 = v[i : i + HIDDEN_UNITS]
    i += HIDDEN_UNITS
    w2 = v[i : i + _OUT * HIDDEN_UNITS].reshape(_OUT, HIDDEN_UNITS)
    i += _OUT * HIDDEN_UNITS
    b2 = v[i : i + _OUT]
    return w1, b1, w2, b2


def _homogeneous(points: np.ndarray) -> np.ndarray:
    return np.hstack([points, np.ones((len(points), 1))])


def mlp_predict(calib: MlpCalibrator, point) -> np.ndarray:
    """Map one board point to an arm point (homogeneous tail discarded)."""
    p = np.asarray(point, dtype=float)
    if p.shape != (3,):
        raise InputError(f"expected a 3-D point, got shape {p.shape}")
    out, _ = _forward(calib.w1, calib.b1, calib.w2, calib.b2, np.append(p, 1.0)[None, :])
    return out[0, :3]


def mlp_predict_many(calib: MlpCalibrator, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InputError(f"expected an (n, 3) point array, got shape {pts.shape}")
    out, _ = _forward(calib.w1, calib.b1, calib.w2, calib.b2, _homogeneous(pts))
    return out[:, :3]


def error_jacobian(
    calib: MlpCalibrator, boards, arms
) -> tuple[np.ndarray, np.ndarray]:
    """Jacobian of the per-sample errors (target - output) w.r.t. every
    weight and bias, plus the flattened error vector.

    Rows are ordered sample-major (sample 0's four output components
    first); columns follow the flattened parameter order w1, b1, w2, b2.
    """
    x_h = _homogeneous(np.asarray(boards, dtype=float))
    t_h = _homogeneous(np.asarray(arms, dtype=float))
    n = len(x_h)
    out, hidden = _forward(calib.w1, calib.b1, calib.w2, calib.b2, x_h)
    hprime = hidden * (1.0 - hidden)

    jac_out = np.zeros((n, _OUT, N_PARAMS))
    dw1 = np.einsum("kj,nj,ni->nkji", calib.w2, hprime, x_h)
    jac_out[:, :, : HIDDEN_UNITS * _IN] = dw1.reshape(n, _OUT, HIDDEN_UNITS * _IN)
    base = HIDDEN_UNITS * _IN
    jac_out[:, :, base : base + HIDDEN_UNITS] = np.einsum(
        "kj,nj->nkj", calib.w2, hprime
    )
    base += HIDDEN_UNITS
    for k in range(_OUT):
        jac_out[:, k, base + HIDDEN_UNITS * k : base + HIDDEN_UNITS * (k + 1)] = hidden
    base += _OUT * HIDDEN_UNITS
    jac_out[:, :, base : base + _OUT] = np.eye(_OUT)

    errors = (t_h - out).reshape(-1)
    return -jac_out.reshape(_OUT * n, N_PARAMS), errors


def lm_step(jac: np.ndarray, errors: np.ndarray, mu: float) -> np.ndarray:
    """Damped least-squares update for residuals with Jacobian ``jac``.

    Solves (J^T J + mu I) d = -J^T e; the result is added to the
    parameters. mu = 0 gives the Gauss-Newton step, large mu shrinks the
    step toward (scaled) gradient descent.
    """
    jtj = jac.T @ jac
    g = jac.T @ errors
    return np.linalg.solve(jtj + mu * np.eye(jac.shape[1]), -g)


def _split_indices(n: int, split, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    n_val = int(round(split[1] * n))
    n_test = int(round(split[2] * n))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise InputError(f"split {split} leaves no training samples for n={n}")
    return perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]


def _subset_mse(w1, b1, w2, b2, x_h, t_h, idx) -> float:
    if len(idx) == 0:
        return float("nan")
    out, _ = _forward(w1, b1, w2, b2, x_h[idx])
    return float(np.mean((t_h[idx] - out) ** 2))


def train_mlp_calibrator(
    cs: CorrespondenceSet, cfg: TrainingConfig = TrainingConfig()
) -> tuple[MlpCalibrator, TrainingTrace]:
    """Fit the 4-10-4 regressor to board-to-arm pairs with LM updates.

    Weights start from a seeded uniform(-0.5, 0.5) draw, the data is
    shuffled once into train/validation/test subsets, and each epoch
    proposes one damped least-squares step on the training subset. Steps
    that would raise the training MSE are rejected (damping grows);
    accepted steps shrink the damping, so the accepted-epoch training MSE
    is non-increasing. Training stops when the training MSE drops below
    ``cfg.stop_mse`` or the epoch budget runs out.
    """
    if cs.n < 10:
        raise InsufficientDataError(f"regressor training needs >= 10 pairs, got {cs.n}")
    rng = np.random.default_rng(cfg.seed)
    w1 = rng.uniform(-0.5, 0.5, (HIDDEN_UNITS, _IN))
    b1 = rng.uniform(-0.5, 0.5, HIDDEN_UNITS)
    w2 = rng.uniform(-0.5, 0.5, (_OUT, HIDDEN_UNITS))
    b2 = rng.uniform(-0.5, 0.5, _OUT)
    train_idx, val_idx, test_idx = _split_indices(cs.n, cfg.split, rng)

    x_h = _homogeneous(cs.boards)
    t_h = _homogeneous(cs.arms)
    params = _flatten(w1, b1, w2, b2)
    mu = cfg.mu_init

    def mse_of(p) -> float:
        return _subset_mse(*_unflatten(p), x_h, t_h, train_idx)

    current = mse_of(params)
    train_hist = [current]
    val_hist = [_subset_mse(*_unflatten(params), x_h, t_h, val_idx)]
    test_hist = [_subset_mse(*_unflatten(params), x_h, t_h, test_idx)]
    accepted_hist: list[bool] = []

    def fail(msg: str):
        trace = TrainingTrace(
            tuple(train_hist), tuple(val_hist), tuple(test_hist),
            tuple(accepted_hist), len(accepted_hist), False, float("nan"),
        )
        raise TrainingFailureError(msg, trace=trace)

    if not math.isfinite(current):
        fail(f"initial training loss is not finite: {current}")

    epochs = 0
    converged = current < cfg.stop_mse
    while epochs < cfg.max_epochs and not converged:
        calib = MlpCalibrator(*_unflatten(params), seed=cfg.seed)
        jac, errors = error_jacobian(calib, cs.boards[train_idx], cs.arms[train_idx])
        try:
            delta = lm_step(jac, errors, mu)
        except np.linalg.LinAlgError:
            delta = None
        if delta is not None and np.all(np.isfinite(delta)):
            candidate = params + delta
            new = mse_of(candidate)
        else:
            candidate, new = None, math.inf
        if math.isnan(new):
            fail("training loss became non-finite (divergence)")
        if new < current:
            params, current = candidate, new
            # floor keeps J^T J + mu I solvable: the homogeneous input
            # duplicates the hidden-bias columns, so J^T J alone is singular
            mu = max(mu / cfg.mu_factor, 1e-12)
            accepted_hist.append(True)
        else:
            mu = min(mu * cfg.mu_factor, 1e20)
            accepted_hist.append(False)
        epochs += 1
        train_hist.append(current)
        val_hist.append(_subset_mse(*_unflatten(params), x_h, t_h, val_idx))
        test_hist.append(_subset_mse(*_unflatten(params), x_h, t_h, test_idx))
        converged = current < cfg.stop_mse

    calib = MlpCalibrator(*_unflatten(params), seed=cfg.seed)
    predictions = mlp_predict_many(calib, cs.boards)
    try:
        r = pearson_r(cs.arms.ravel(), predictions.ravel())
    except DegenerateStatisticsError:
        r = float("nan")
    trace = TrainingTrace(
        tuple(train_hist), tuple(val_hist), tuple(test_hist),
        tuple(accepted_hist), epochs, converged, r,
    )
    return calib, trace


# --- uniform point-map adapter and the three-way comparison -------------


def as_point_mapper(calibrator):
    """Normalize a calibrator to a callable mapping (n, 3) -> (n, 3)."""
    if isinstance(calibrator, HomogeneousTransform):
        return lambda pts: apply_transform_many(calibrator, pts)
    if isinstance(calibrator, MlpCalibrator):
        return lambda pts: mlp_predict_many(calibrator, pts)
    if callable(calibrator):
        return lambda pts: np.asarray(calibrator(np.asarray(pts, dtype=float)))
    raise InputError(f"cannot use {type(calibrator).__name__} as a point mapper")


METHOD_NAMES = ("four-point", "matrix", "mlp")


@dataclass(frozen=True)
class MethodResult:
    stats: AxisErrorStats
    fit_seconds: float
    predict: object  # callable (n, 3) -> (n, 3)
    model: object


@dataclass(frozen=True)
class CalibrationReport:
    """Per-method error statistics and fit wall time, same data for all."""

    methods: dict[str, MethodResult]

    def mse_by_method(self) -> dict[str, float]:
        return {name: res.stats.mean_mse() for name, res in self.methods.items()}


def compare_calibrators(
    cs: CorrespondenceSet,
    cfg: TrainingConfig = TrainingConfig(),
    methods: tuple[str, ...] = METHOD_NAMES,
    timing_repeats: int = 1,
) -> CalibrationReport:
    """Fit the requested estimators on the same pairs and score each one.

    Every method is evaluated on the full correspondence set (the fitting
    protocol treats all points as test points). ``fit_seconds`` is the
    fastest of ``timing_repeats`` identical fits. Estimator failures are
    re-raised as :class:`CalibrationMethodError` naming the method.
    """
    unknown = [m for m in methods if m not in METHOD_NAMES]
    if unknown:
        raise InputError(f"unknown methods {unknown}; choose from {METHOD_NAMES}")
    if timing_repeats < 1:
        raise InputError("timing_repeats must be >= 1")

    fitters = {
        "four-point": lambda: estimate_four_point(cs),
        "matrix": lambda: estimate_normalized_matrix(cs),
        "mlp": lambda: train_mlp_calibrator(cs, cfg)[0],
    }
    results: dict[str, MethodResult] = {}
    for name in methods:
        fit = fitters[name]
        try:
            best = math.inf
            model = None
            for _ in range(timing_repeats):
                start = time.perf_counter()
                model = fit()
                best = min(best, time.perf_counter() - start)
            predict = as_point_mapper(model)
            stats = axis_error_stats(cs.arms, predict(cs.boards))
        except Exception as exc:  # noqa: BLE001 - tagged and re-raised
            raise CalibrationMethodError(name, exc) from exc
        results[name] = MethodResult(stats, best, predict, model)
    return CalibrationReport(results)
