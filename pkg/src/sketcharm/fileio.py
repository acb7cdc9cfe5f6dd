"""File formats shared by the CLI, the service, and external tools.

Formats:

* transform JSON: ``{"matrix": [[...] x4], "kind": "rigid"|"general"}``
* regressor JSON: ``{"w1": [...], "b1": [...], "w2": [...], "b2": [...],
  "seed": n}``
* correspondence CSV: header ``bx,by,bz,ax,ay,az``, optional first-line
  ``# unit: m|cm`` comment (meters by default)
* pixel point CSV: header ``u,v``, integers
* arm point CSV: header ``x,y,z``, meters (same optional unit comment)
* trajectory CSV: header ``stroke,index,theta1..thetaN,pen,residual_m``,
  angles printed with 9 decimals
* chain JSON: DH rows plus optional base offset
* PGM rasters: P2 (ASCII) and P5 (binary), maxval 255 or 65535
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .calibration import CorrespondenceSet, MlpCalibrator
from .errors import InputError
from .geometry import GENERAL, RIGID, HomogeneousTransform, identity
from .kinematics import DhRow, KinematicChain
from .pipeline import GrayRaster, JointTrajectory, TrajectoryPoint

# --- JSON ----------------------------------------------------------------


def transform_to_dict(t: HomogeneousTransform) -> dict:
    return {"matrix": t.m.tolist(), "kind": t.kind}


def transform_from_dict(d: dict) -> HomogeneousTransform:
    try:
        matrix = d["matrix"]
        kind = d.get("kind", RIGID)
    except (TypeError, KeyError) as exc:
        raise InputError(f"bad transform JSON: {exc}") from exc
    if kind not in (RIGID, GENERAL):
        raise InputError(f"bad transform kind {kind!r}")
    return HomogeneousTransform(np.asarray(matrix, dtype=float), kind)


def mlp_to_dict(m: MlpCalibrator) -> dict:
    return {
        "w1": m.w1.tolist(),
        "b1": m.b1.tolist(),
        "w2": m.w2.tolist(),
        "b2": m.b2.tolist(),
        "seed": m.seed,
    }


def mlp_from_dict(d: dict) -> MlpCalibrator:
    try:
        return MlpCalibrator(
            np.asarray(d["w1"], dtype=float),
            np.asarray(d["b1"], dtype=float),
            np.asarray(d["w2"], dtype=float),
            np.asarray(d["b2"], dtype=float),
            seed=int(d.get("seed", 0)),
        )
    except (TypeError, KeyError) as exc:
        raise InputError(f"bad regressor JSON: {exc}") from exc


def calibration_from_dict(d: dict):
    """A stored calibration is either a transform or regressor weights."""
    if not isinstance(d, dict):
        raise InputError("calibration JSON must be an object")
    if "matrix" in d:
        return transform_from_dict(d)
    if "w1" in d:
        return mlp_from_dict(d)
    raise InputError("calibration JSON has neither 'matrix' nor 'w1'")


def load_calibration(path) -> HomogeneousTransform | MlpCalibrator:
    return calibration_from_dict(json.loads(Path(path).read_text()))


def chain_to_dict(chain: KinematicChain) -> dict:
    rows = []
    limit_iter = iter(chain.joint_limits)
    for row in chain.rows:
        if row.is_variable:
            lo, hi = next(limit_iter)
            theta = {"variable": {"offset": row.offset, "lo": lo, "hi": hi}}
        else:
            theta = {"fixed": row.fixed}
        rows.append({"alpha": row.alpha, "a": row.a, "d": row.d, "theta": theta})
    out = {"name": chain.name, "rows": rows}
    if not np.array_equal(chain.base_offset.m, np.eye(4)):
        out["base_offset"] = transform_to_dict(chain.base_offset)
    return out


def chain_from_dict(d: dict) -> KinematicChain:
    try:
        rows = []
        limits = []
        for r in d["rows"]:
            theta = r["theta"]
            if "fixed" in theta:
                rows.append(
                    DhRow(float(r["alpha"]), float(r["a"]), float(r["d"]),
                          fixed=float(theta["fixed"]))
                )
            elif "variable" in theta:
                var = theta["variable"]
                rows.append(
                    DhRow(float(r["alpha"]), float(r["a"]), float(r["d"]),
                          offset=float(var.get("offset", 0.0)))
                )
                limits.append((float(var["lo"]), float(var["hi"])))
            else:
                raise InputError("DH row theta needs 'fixed' or 'variable'")
    except (TypeError, KeyError) as exc:
        raise InputError(f"bad chain JSON: {exc}") from exc
    base = d.get("base_offset")
    return KinematicChain(
        str(d.get("name", "custom")),
        tuple(rows),
        tuple(limits),
        transform_from_dict(base) if base else identity(),
    )


def load_chain(path) -> KinematicChain:
    return chain_from_dict(json.loads(Path(path).read_text()))


# --- CSV -----------------------------------------------------------------


def _read_csv_rows(path) -> tuple[float, list[dict]]:
    """Rows of a headered CSV plus the unit scale from an optional
    leading '# unit: m|cm' comment line."""
    text = Path(path).read_text()
    lines = text.splitlines()
    scale = 1.0
    start = 0
    if lines and lines[0].lstrip().startswith("#"):
        comment = lines[0].lstrip("# ").strip().lower()
        if comment.startswith("unit:"):
            unit = comment.split(":", 1)[1].strip()
            if unit == "cm":
                scale = 0.01
            elif unit != "m":
                raise InputError(f"unknown unit {unit!r}; use m or cm")
        start = 1
    reader = csv.DictReader(io.StringIO("\n".join(lines[start:])))
    return scale, list(reader)


def _columns(rows: list[dict], names: tuple[str, ...], path) -> np.ndarray:
    try:
        return np.array([[float(row[n]) for n in names] for row in rows])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: expected columns {','.join(names)}") from exc


def load_correspondences_csv(path) -> CorrespondenceSet:
    scale, rows = _read_csv_rows(path)
    if not rows:
        raise InputError(f"{path}: no correspondence rows")
    data = _columns(rows, ("bx", "by", "bz", "ax", "ay", "az"), path) * scale
    return CorrespondenceSet(data[:, :3], data[:, 3:])


def save_correspondences_csv(path, cs: CorrespondenceSet, unit: str = "m"):
    if unit not in ("m", "cm"):
        raise InputError(f"unknown unit {unit!r}")
    scale = 100.0 if unit == "cm" else 1.0
    with open(path, "w", newline="") as fh:
        fh.write(f"# unit: {unit}\n")
        writer = csv.writer(fh)
        writer.writerow(["bx", "by", "bz", "ax", "ay", "az"])
        for b, a in zip(cs.boards, cs.arms):
            writer.writerow([repr(float(v) * scale) for v in (*b, *a)])


def load_points_csv(path) -> list[tuple[int, int]]:
    _, rows = _read_csv_rows(path)
    pts = _columns(rows, ("u", "v"), path)
    return [(int(u), int(v)) for u, v in pts]


def save_points_csv(path, points):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v"])
        for u, v in points:
            writer.writerow([int(u), int(v)])


def save_plan_csv(path, plan):
    """Optional stroke/point dump: columns stroke,u,v."""

    def fmt(v):
        return int(v) if float(v).is_integer() else repr(float(v))

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stroke", "u", "v"])
        for si, stroke in enumerate(plan.strokes):
            for u, v in stroke:
                writer.writerow([si, fmt(u), fmt(v)])


def load_arm_points_csv(path) -> np.ndarray:
    scale, rows = _read_csv_rows(path)
    if not rows:
        raise InputError(f"{path}: no point rows")
    return _columns(rows, ("x", "y", "z"), path) * scale


def save_arm_points_csv(path, points):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"])
        for p in np.asarray(points, dtype=float):
            writer.writerow([repr(float(v)) for v in p])


def trajectory_csv_text(traj: JointTrajectory) -> str:
    """Render a trajectory as CSV text with 9-decimal angles."""
    flat = traj.flat_points()
    dof = len(flat[0].joints) if flat else 0
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["stroke", "index"] + [f"theta{i + 1}" for i in range(dof)]
        + ["pen", "residual_m"]
    )
    for si, stroke in enumerate(traj.strokes):
        for pi, point in enumerate(stroke):
            writer.writerow(
                [si, pi]
                + [f"{v:.9f}" for v in point.joints]
                + [point.pen, f"{point.residual:.9f}"]
            )
    return out.getvalue()


def save_trajectory_csv(path, traj: JointTrajectory):
    Path(path).write_text(trajectory_csv_text(traj))


def load_trajectory_csv(path, chain_name: str = "") -> JointTrajectory:
    _, rows = _read_csv_rows(path)
    if not rows:
        return JointTrajectory(chain_name, ())
    theta_cols = sorted(
        (c for c in rows[0] if c.startswith("theta")), key=lambda c: int(c[5:])
    )
    if not theta_cols:
        raise InputError(f"{path}: no theta columns in trajectory CSV")
    strokes: list[list[TrajectoryPoint]] = []
    for row in rows:
        try:
            si = int(row["stroke"])
            joints = np.array([float(row[c]) for c in theta_cols])
            point = TrajectoryPoint(joints, row["pen"], float(row["residual_m"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}: bad trajectory row {row}") from exc
        while len(strokes) <= si:
            strokes.append([])
        strokes[si].append(point)
    return JointTrajectory(chain_name, tuple(tuple(s) for s in strokes))


def report_to_dict(report, include_timings: bool = True) -> dict:
    out = {}
    for name, res in report.methods.items():
        entry = {"stats": res.stats.to_dict()}
        if include_timings:
            entry["fit_seconds"] = res.fit_seconds
        out[name] = entry
    return out


# --- PGM -----------------------------------------------------------------


def load_pgm(path) -> GrayRaster:
    """Read a P2 (ASCII) or P5 (binary) PGM file."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise InputError(f"{path}: not a PGM file (magic {magic!r})")

    # header tokens: width, height, maxval; '#' comments run to end of line
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(data):
            raise InputError(f"{path}: truncated PGM header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end == -1 else end + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            try:
                tokens.append(int(data[pos:end]))
            except ValueError as exc:
                raise InputError(f"{path}: bad PGM header token") from exc
            pos = end
    width, height, maxval = tokens
    if maxval not in (255, 65535):
        raise InputError(f"{path}: PGM maxval must be 255 or 65535, got {maxval}")
    if width < 1 or height < 1:
        raise InputError(f"{path}: bad PGM dimensions {width}x{height}")

    if magic == b"P2":
        values = data[pos:].split()
        if len(values) < width * height:
            raise InputError(f"{path}: P2 pixel data truncated")
        grid = np.array([int(v) for v in values[: width * height]])
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
        count = width * height
        raw = data[pos : pos + count * dtype.itemsize]
        if len(raw) < count * dtype.itemsize:
            raise InputError(f"{path}: P5 pixel data truncated")
        grid = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    return GrayRaster(width, height, grid.reshape(height, width), maxval)


def save_pgm(path, img: GrayRaster, binary: bool = True):
    header = f"P5\n{img.width} {img.height}\n{img.maxval}\n"
    if binary:
        dtype = np.dtype(">u2") if img.maxval == 65535 else np.uint8
        payload = img.pixels.astype(dtype).tobytes()
        Path(path).write_bytes(header.encode() + payload)
    else:
        lines = [f"P2\n{img.width} {img.height}\n{img.maxval}"]
        for row in img.pixels:
            lines.append(" ".join(str(int(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")
