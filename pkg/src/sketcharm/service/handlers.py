"""Service operations as plain functions on the pydantic models.

The FastAPI app and the CLI both dispatch through these, so the two
front ends cannot drift apart. Handlers raise the package's domain
errors; transport-level wrapping happens in the callers.
"""

from __future__ import annotations

import numpy as np

from .. import calibration as cal
from .. import fileio, kinematics, pipeline
from ..errors import InputError
from ..geometry import axis_error_stats
from . import models


def _resolve_chain(name: str, chain_def: dict | None) -> kinematics.KinematicChain:
    if chain_def is not None:
        return fileio.chain_from_dict(chain_def)
    if not name:
        raise InputError("no chain given: set 'chain' or 'chain_def'")
    return kinematics.get_chain(name)


def _correspondences(pairs: list[models.PairModel]) -> cal.CorrespondenceSet:
    if not pairs:
        raise InputError("no correspondence pairs given")
    boards = np.array([p.board for p in pairs])
    arms = np.array([p.arm for p in pairs])
    return cal.CorrespondenceSet(boards, arms)


def _training_config(
    config: models.TrainingConfigModel | None, seed: int | None
) -> cal.TrainingConfig:
    base = config or models.TrainingConfigModel()
    if seed is not None:
        base = base.model_copy(update={"seed": seed})
    return cal.TrainingConfig(
        mu_init=base.mu_init,
        mu_factor=base.mu_factor,
        stop_mse=base.stop_mse,
        max_epochs=base.max_epochs,
        split=tuple(base.split),
        seed=base.seed,
    )


def _ik_config(config: models.IkConfigModel | None) -> kinematics.IkConfig:
    c = config or models.IkConfigModel()
    return kinematics.IkConfig(
        tol=c.tol,
        max_iter=c.max_iter,
        step_scale=c.step_scale,
        damping=c.damping,
        clamp=c.clamp,
    )


def _stats_model(stats) -> models.StatsModel:
    return models.StatsModel(**stats.to_dict())


def calibrate(req: models.CalibrateRequest) -> models.CalibrateResponse:
    cs = _correspondences(req.pairs)
    if req.method == "four-point":
        model = cal.estimate_four_point(cs)
        payload = fileio.transform_to_dict(model)
    elif req.method == "matrix":
        model = cal.estimate_normalized_matrix(cs)
        payload = fileio.transform_to_dict(model)
    else:
        model, _ = cal.train_mlp_calibrator(cs, _training_config(req.config, req.seed))
        payload = fileio.mlp_to_dict(model)
    predicted = cal.as_point_mapper(model)(cs.boards)
    stats = axis_error_stats(cs.arms, predicted)
    return models.CalibrateResponse(calibration=payload, stats=_stats_model(stats))


def compare(req: models.CompareRequest) -> models.CompareResponse:
    cs = _correspondences(req.pairs)
    report = cal.compare_calibrators(
        cs,
        _training_config(req.config, req.seed),
        methods=tuple(req.methods),
        timing_repeats=req.timing_repeats,
    )
    return models.CompareResponse(
        methods={
            name: models.MethodReportModel(
                stats=_stats_model(res.stats), fit_seconds=res.fit_seconds
            )
            for name, res in report.methods.items()
        }
    )


def fk(req: models.FkRequest) -> models.FkResponse:
    chain = _resolve_chain(req.chain, req.chain_def)
    position, _ = kinematics.forward_kinematics(chain, req.joints)
    return models.FkResponse(position=tuple(position))


def ik(req: models.IkRequest) -> models.IkResponse:
    chain = _resolve_chain(req.chain, req.chain_def)
    if req.method == "closed":
        joints = kinematics.solve_ik_closed_chain(chain, req.target)
        position, _ = kinematics.forward_kinematics(chain, joints)
        residual = float(np.linalg.norm(np.asarray(req.target) - position))
        return models.IkResponse(joints=joints.tolist(), residual=residual, iterations=0)
    seed = req.seed_joints if req.seed_joints is not None else [0.0] * chain.dof
    result = kinematics.solve_ik_iterative(chain, req.target, seed, _ik_config(req.config))
    return models.IkResponse(
        joints=result.joints.tolist(),
        residual=result.residual,
        iterations=result.iterations,
    )


def draw(req: models.DrawRequest) -> models.DrawResponse:
    chain = _resolve_chain(req.chain, req.chain_def)
    if (req.points is None) == (req.raster is None):
        raise InputError("give exactly one of 'points' or 'raster'")
    bounds = None
    if req.raster is not None:
        raster = pipeline.GrayRaster(
            req.raster.width,
            req.raster.height,
            np.asarray(req.raster.pixels),
            req.raster.maxval,
        )
        points = pipeline.extract_edge_points(raster, req.threshold)
        bounds = raster.full_bounds()
    else:
        points = [(float(u), float(v)) for u, v in req.points]
    if req.bounds is not None:
        bounds = cal.ImageBounds(
            req.bounds.u_min, req.bounds.u_max, req.bounds.v_min, req.bounds.v_max
        )
    plan = pipeline.order_strokes(points, req.gap, bounds)
    board = cal.BoardRegion(
        req.board.x_min,
        req.board.x_max,
        req.board.y_min,
        req.board.y_max,
        req.board.z_plane,
    )
    calibrator = fileio.calibration_from_dict(req.calibration)
    traj = pipeline.plan_trajectory(
        plan, board, calibrator, chain, _ik_config(req.config), req.method
    )
    rows = [
        models.TrajectoryRowModel(
            stroke=si,
            index=pi,
            joints=point.joints.tolist(),
            pen=point.pen,
            residual_m=point.residual,
        )
        for si, stroke in enumerate(traj.strokes)
        for pi, point in enumerate(stroke)
    ]
    return models.DrawResponse(chain=traj.chain_name, rows=rows)


def _trajectory_from_rows(rows: list[models.TrajectoryRowModel], chain_name: str):
    strokes: list[list[pipeline.TrajectoryPoint]] = []
    for row in rows:
        while len(strokes) <= row.stroke:
            strokes.append([])
        strokes[row.stroke].append(
            pipeline.TrajectoryPoint(np.asarray(row.joints), row.pen, row.residual_m)
        )
    return pipeline.JointTrajectory(chain_name, tuple(tuple(s) for s in strokes))


def evaluate(req: models.EvalRequest) -> models.EvalResponse:
    chain = _resolve_chain(req.chain, req.chain_def)
    traj = _trajectory_from_rows(req.rows, chain.name)
    mse = pipeline.evaluate_drawing(np.asarray(req.commanded), traj, chain)
    return models.EvalResponse(mse=mse)
