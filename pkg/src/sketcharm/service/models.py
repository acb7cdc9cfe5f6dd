"""Pydantic request/response models for the HTTP service.

These mirror the package's file formats: calibrations travel as the same
JSON objects the CLI writes to disk, trajectories as row lists matching
the trajectory CSV columns.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

Vec3 = tuple[float, float, float]
Pixel = tuple[float, float]


class PairModel(BaseModel):
    board: Vec3
    arm: Vec3


class TrainingConfigModel(BaseModel):
    mu_init: float = 1e-3
    mu_factor: float = 10.0
    stop_mse: float = 1e-5
    max_epochs: int = 500
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0


class IkConfigModel(BaseModel):
    tol: float = 1e-6
    max_iter: int = 1000
    step_scale: float = 1.0
    damping: float = 0.0
    clamp: bool = True


class AxisStatsModel(BaseModel):
    mean_abs: float
    std: float
    variance: float
    mse: float


class StatsModel(BaseModel):
    x: AxisStatsModel
    y: AxisStatsModel
    z: AxisStatsModel


class CalibrateRequest(BaseModel):
    method: Literal["four-point", "matrix", "mlp"]
    pairs: list[PairModel]
    config: Optional[TrainingConfigModel] = None
    seed: Optional[int] = None


class CalibrateResponse(BaseModel):
    calibration: dict
    stats: StatsModel


class CompareRequest(BaseModel):
    pairs: list[PairModel]
    config: Optional[TrainingConfigModel] = None
    seed: Optional[int] = None
    methods: tuple[str, ...] = ("four-point", "matrix", "mlp")
    timing_repeats: int = 1


class MethodReportModel(BaseModel):
    stats: StatsModel
    fit_seconds: float


class CompareResponse(BaseModel):
    methods: dict[str, MethodReportModel]


class FkRequest(BaseModel):
    chain: str = ""
    chain_def: Optional[dict] = None  # overrides the named chain
    joints: list[float]


class FkResponse(BaseModel):
    position: Vec3


class IkRequest(BaseModel):
    method: Literal["iterative", "closed"]
    chain: str = ""
    chain_def: Optional[dict] = None
    target: Vec3
    seed_joints: Optional[list[float]] = None
    config: Optional[IkConfigModel] = None


class IkResponse(BaseModel):
    joints: list[float]
    residual: float
    iterations: int


class BoardRegionModel(BaseModel):
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_plane: float = 0.0


class ImageBoundsModel(BaseModel):
    u_min: float
    u_max: float
    v_min: float
    v_max: float


class RasterModel(BaseModel):
    width: int
    height: int
    maxval: int = 255
    pixels: list[list[int]]  # height rows of width values


class DrawRequest(BaseModel):
    points: Optional[list[Pixel]] = None
    raster: Optional[RasterModel] = None
    threshold: float = Field(default=30.0, gt=0)
    gap: float = Field(default=5.0, gt=0)
    bounds: Optional[ImageBoundsModel] = None
    board: BoardRegionModel
    calibration: dict
    chain: str = ""
    chain_def: Optional[dict] = None
    method: Literal["iterative", "closed"] = "iterative"
    config: Optional[IkConfigModel] = None


class TrajectoryRowModel(BaseModel):
    stroke: int
    index: int
    joints: list[float]
    pen: Literal["down", "up"]
    residual_m: float


class DrawResponse(BaseModel):
    chain: str
    rows: list[TrajectoryRowModel]


class EvalRequest(BaseModel):
    commanded: list[Vec3]
    rows: list[TrajectoryRowModel]
    chain: str = ""
    chain_def: Optional[dict] = None


class EvalResponse(BaseModel):
    mse: float


class HealthResponse(BaseModel):
    name: str
    version: str
    chains: list[str]
