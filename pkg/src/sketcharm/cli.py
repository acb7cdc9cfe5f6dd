"""Batch command-line front end.

The CLI is a thin client of the service layer: it reads files, builds
the same request models the HTTP endpoints take, dispatches either
in-process or to a running server (``--server URL``), and formats the
response. Identical inputs and seeds produce byte-identical stdout.

Exit codes: 0 success, 1 domain error (unreachable target, degenerate
data, non-convergence, ...), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, fileio
from .errors import InputError, SketchArmError
from .kinematics import builtin_chain_names
from .service import handlers, models


def _floats(text: str, expected: int | None = None) -> list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"cannot parse {text!r} as comma-separated numbers") from None
    if expected is not None and len(values) != expected:
        raise InputError(f"expected {expected} comma-separated numbers, got {text!r}")
    return values


def _chain_fields(spec: str) -> dict:
    """A chain flag is a built-in name or a path to a chain JSON file."""
    if spec in builtin_chain_names():
        return {"chain": spec}
    path = Path(spec)
    if path.exists():
        return {"chain_def": fileio.chain_to_dict(fileio.load_chain(path))}
    raise InputError(
        f"unknown chain {spec!r}: not a built-in "
        f"({', '.join(builtin_chain_names())}) and not a file"
    )


def _pairs_from_file(path: str) -> list[models.PairModel]:
    cs = fileio.load_correspondences_csv(path)
    return [
        models.PairModel(board=tuple(b), arm=tuple(a))
        for b, a in zip(cs.boards, cs.arms)
    ]


def _training_config_from_file(path: str | None) -> models.TrainingConfigModel | None:
    if path is None:
        return None
    return models.TrainingConfigModel(**json.loads(Path(path).read_text()))


class _Remote:
    """POST request models to a running service and unwrap responses."""

    def __init__(self, base_url: str):
        import httpx  # deferred: only --server runs need it

        self._client = httpx.Client(base_url=base_url.rstrip("/"), timeout=300.0)

    def call(self, endpoint: str, request, response_cls):
        resp = self._client.post(f"/{endpoint}", json=request.model_dump(mode="json"))
        if resp.status_code == 400:
            detail = resp.json().get("detail", {})
            err = SketchArmError(detail.get("message", "remote domain error"))
            err.kind = detail.get("kind", "domain")
            raise err
        resp.raise_for_status()
        return response_cls(**resp.json())


class _Local:
    """Dispatch to the service handlers in-process."""

    _fns = {
        "calibrate": handlers.calibrate,
        "compare": handlers.compare,
        "fk": handlers.fk,
        "ik": handlers.ik,
        "draw": handlers.draw,
        "eval": handlers.evaluate,
    }

    def call(self, endpoint: str, request, response_cls):
        return self._fns[endpoint](request)


def _dispatcher(args):
    return _Remote(args.server) if args.server else _Local()


def _emit_json(payload: dict):
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _fixed(values) -> str:
    # round first so values below the printed precision cannot leave a
    # stray minus sign on a zero
    return ",".join(f"{round(v, 9) + 0.0:.9f}" for v in values)


# --- subcommand implementations -------------------------------------------


def _cmd_calibrate(args) -> int:
    req = models.CalibrateRequest(
        method=args.method,
        pairs=_pairs_from_file(args.pairs),
        config=_training_config_from_file(args.config),
        seed=args.seed,
    )
    resp = _dispatcher(args).call("calibrate", req, models.CalibrateResponse)
    if args.out:
        Path(args.out).write_text(json.dumps(resp.calibration, indent=2) + "\n")
    _emit_json(
        {"calibration": resp.calibration, "stats": resp.stats.model_dump()}
    )
    return 0


def _cmd_compare(args) -> int:
    req = models.CompareRequest(
        pairs=_pairs_from_file(args.pairs),
        config=_training_config_from_file(args.config),
        seed=args.seed,
        timing_repeats=args.timing_repeats,
    )
    resp = _dispatcher(args).call("compare", req, models.CompareResponse)
    if args.out:
        full = {
            name: {"stats": rep.stats.model_dump(), "fit_seconds": rep.fit_seconds}
            for name, rep in resp.methods.items()
        }
        Path(args.out).write_text(json.dumps(full, indent=2, sort_keys=True) + "\n")
    # stdout stays deterministic: wall times only go to the report file
    _emit_json(
        {name: {"stats": rep.stats.model_dump()} for name, rep in resp.methods.items()}
    )
    return 0


def _cmd_fk(args) -> int:
    req = models.FkRequest(joints=_floats(args.joints), **_chain_fields(args.chain))
    resp = _dispatcher(args).call("fk", req, models.FkResponse)
    sys.stdout.write(_fixed(resp.position) + "\n")
    return 0


def _cmd_ik(args) -> int:
    req = models.IkRequest(
        method=args.method,
        target=tuple(_floats(args.target, 3)),
        seed_joints=_floats(args.seed_joints) if args.seed_joints else None,
        config=models.IkConfigModel(tol=args.tol, max_iter=args.max_iter),
        **_chain_fields(args.chain),
    )
    resp = _dispatcher(args).call("ik", req, models.IkResponse)
    sys.stdout.write(_fixed(resp.joints) + "\n")
    return 0


def _cmd_draw(args) -> int:
    if args.points_file is not None:
        points, raster = fileio.load_points_csv(args.points_file), None
    else:
        img = fileio.load_pgm(args.image)
        raster = models.RasterModel(
            width=img.width,
            height=img.height,
            maxval=img.maxval,
            pixels=img.pixels.tolist(),
        )
        points = None
    x0, x1, y0, y1, z = _floats(args.board, 5)
    req = models.DrawRequest(
        points=points,
        raster=raster,
        threshold=args.threshold,
        gap=args.gap,
        board=models.BoardRegionModel(x_min=x0, x_max=x1, y_min=y0, y_max=y1, z_plane=z),
        calibration=json.loads(Path(args.calib).read_text()),
        method=args.method,
        config=models.IkConfigModel(tol=args.tol, max_iter=args.max_iter),
        **_chain_fields(args.chain),
    )
    resp = _dispatcher(args).call("draw", req, models.DrawResponse)
    traj = handlers._trajectory_from_rows(resp.rows, resp.chain)
    fileio.save_trajectory_csv(args.out, traj)
    sys.stdout.write(f"strokes={len(traj.strokes)} points={traj.point_count}\n")
    return 0


def _cmd_eval(args) -> int:
    traj = fileio.load_trajectory_csv(args.trajectory)
    rows = [
        models.TrajectoryRowModel(
            stroke=si, index=pi, joints=p.joints.tolist(), pen=p.pen,
            residual_m=p.residual,
        )
        for si, stroke in enumerate(traj.strokes)
        for pi, p in enumerate(stroke)
    ]
    commanded = fileio.load_arm_points_csv(args.commanded)
    req = models.EvalRequest(
        commanded=[tuple(p) for p in commanded],
        rows=rows,
        **_chain_fields(args.chain),
    )
    resp = _dispatcher(args).call("eval", req, models.EvalResponse)
    sys.stdout.write(f"{resp.mse:.9e}\n")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketcharm",
        description="Calibration, kinematics, and sketch drawing trajectories",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--server",
        metavar="URL",
        default=None,
        help="dispatch to a running sketcharm service instead of in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit one board-to-arm calibration")
    p.add_argument("--method", required=True, choices=["four-point", "matrix", "mlp"])
    p.add_argument("--pairs", required=True, help="correspondence CSV (bx,by,bz,ax,ay,az)")
    p.add_argument("--seed", type=int, default=None, help="seed for all randomness")
    p.add_argument("--config", default=None, help="training config JSON file")
    p.add_argument("--out", default=None, help="also write the calibration JSON here")
    p.set_defaults(fn=_cmd_calibrate)

    p = sub.add_parser("compare", help="fit and score all three calibrations")
    p.add_argument("--pairs", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--timing-repeats", type=int, default=1)
    p.add_argument("--out", default=None, help="full report JSON (includes fit times)")
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("fk", help="forward kinematics")
    p.add_argument("--chain", required=True, help="built-in chain name or chain JSON file")
    p.add_argument("--joints", required=True, help="comma-separated joint angles (rad)")
    p.set_defaults(fn=_cmd_fk)

    p = sub.add_parser("ik", help="inverse kinematics for one target")
    p.add_argument("--method", required=True, choices=["iterative", "closed"])
    p.add_argument("--chain", required=True)
    p.add_argument("--target", required=True, help="x,y,z in meters")
    p.add_argument("--seed-joints", default=None, help="iterative solver seed (rad)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.set_defaults(fn=_cmd_ik)

    p = sub.add_parser("draw", help="plan a drawing trajectory from an image or points")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--image", default=None, help="PGM raster (P2 or P5)")
    src.add_argument(
        "--points",
        dest="points_file",
        default=None,
        help="pixel point CSV with columns u,v",
    )
    p.add_argument("--board", required=True, help="x_min,x_max,y_min,y_max,z_plane (m)")
    p.add_argument("--calib", required=True, help="calibration JSON (transform or weights)")
    p.add_argument("--chain", required=True)
    p.add_argument("--method", default="iterative", choices=["iterative", "closed"])
    p.add_argument("--out", required=True, help="trajectory CSV output path")
    p.add_argument("--threshold", type=float, default=30.0, help="edge gradient threshold")
    p.add_argument("--gap", type=float, default=5.0, help="stroke chaining gap (px)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.set_defaults(fn=_cmd_draw)

    p = sub.add_parser("eval", help="drawing mean squared error of a trajectory")
    p.add_argument("--commanded", required=True, help="arm point CSV (x,y,z)")
    p.add_argument("--trajectory", required=True, help="trajectory CSV")
    p.add_argument("--chain", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except SketchArmError as exc:
        sys.stderr.write(
            json.dumps({"error": {"kind": exc.kind, "message": str(exc)}}) + "\n"
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
