import json

import httpx
import numpy as np
import pytest
from conftest import rigid_pairs, sample_rigid_transform

from sketcharm import cli, fileio
from sketcharm.calibration import CorrespondenceSet
from sketcharm.geometry import HomogeneousTransform
from sketcharm.service.app import app


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def pairs_file(tmp_path):
    path = tmp_path / "pairs.csv"
    fileio.save_correspondences_csv(path, rigid_pairs(30, seed=1))
    return str(path)


@pytest.fixture
def board_mount_file(tmp_path):
    m = np.array(
        [
            [0.0, 0.0, 1.0, 0.18],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    path = tmp_path / "calib.json"
    path.write_text(json.dumps(fileio.transform_to_dict(HomogeneousTransform(m, "rigid"))))
    return str(path)


class TestIkCommand:
    def test_closed_full_extension(self, capsys):
        code, out, err = run(
            capsys, "ik", "--method", "closed", "--chain", "nao-right-3dof",
            "--target", "0.2187,0,0",
        )
        assert code == 0
        assert out == "0.000000000,0.000000000,0.000000000\n"

    def test_unreachable_exits_one_with_structured_error(self, capsys):
        code, out, err = run(
            capsys, "ik", "--method", "closed", "--chain", "nao-right-3dof",
            "--target", "0.5,0,0",
        )
        assert code == 1
        assert out == ""
        assert json.loads(err)["error"]["kind"] == "unreachable"

    def test_iterative_matches_closed(self, capsys):
        args = ["--chain", "nao-right-3dof", "--target", "0.18,0.05,-0.03"]
        code_a, out_a, _ = run(capsys, "ik", "--method", "closed", *args)
        code_b, out_b, _ = run(capsys, "ik", "--method", "iterative", *args)
        assert code_a == code_b == 0
        closed = [float(v) for v in out_a.strip().split(",")]
        iterative = [float(v) for v in out_b.strip().split(",")]
        assert np.allclose(closed, iterative, atol=1e-4)


class TestUsageErrors:
    def test_unknown_method_choice(self, capsys):
        code, out, err = run(capsys, "calibrate", "--method", "unknown", "--pairs", "x")
        assert code == 2
        assert "invalid choice" in err

    def test_unknown_flag(self, capsys):
        code, out, err = run(capsys, "fk", "--chain", "nao-right-3dof", "--bogus", "1")
        assert code == 2

    def test_missing_subcommand(self, capsys):
        code, out, err = run(capsys)
        assert code == 2

    def test_draw_rejects_both_sources(self, capsys, tmp_path):
        code, out, err = run(
            capsys, "draw", "--image", "a.pgm", "--points", "b.csv",
            "--board=0,1,0,1,0", "--calib", "c.json",
            "--chain", "nao-right-3dof", "--out", str(tmp_path / "t.csv"),
        )
        assert code == 2

    def test_bad_number_list_is_domain_error(self, capsys):
        code, out, err = run(
            capsys, "fk", "--chain", "nao-right-3dof", "--joints", "a,b,c"
        )
        assert code == 1
        assert json.loads(err)["error"]["kind"] == "input"


class TestFkCommand:
    def test_zero_pose(self, capsys):
        code, out, _ = run(
            capsys, "fk", "--chain", "nao-right-3dof", "--joints", "0,0,0"
        )
        assert code == 0
        assert out == "0.218700000,0.000000000,0.000000000\n"

    def test_chain_from_json_file(self, capsys, tmp_path):
        path = tmp_path / "chain.json"
        from sketcharm.kinematics import nao_right_3dof

        path.write_text(json.dumps(fileio.chain_to_dict(nao_right_3dof())))
        code, out, _ = run(capsys, "fk", "--chain", str(path), "--joints", "0,0,0")
        assert code == 0
        assert out.startswith("0.218700000,")


class TestCalibrateCommand:
    def test_four_point_writes_calibration(self, capsys, tmp_path, pairs_file):
        out_file = tmp_path / "calib.json"
        code, out, _ = run(
            capsys, "calibrate", "--method", "four-point", "--pairs", pairs_file,
            "--out", str(out_file),
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["calibration"]["kind"] == "rigid"
        assert payload["stats"]["x"]["mse"] < 1e-12
        stored = json.loads(out_file.read_text())
        assert stored == payload["calibration"]

    def test_mlp_respects_seed(self, capsys, pairs_file):
        code_a, out_a, _ = run(
            capsys, "calibrate", "--method", "mlp", "--pairs", pairs_file, "--seed", "3"
        )
        code_b, out_b, _ = run(
            capsys, "calibrate", "--method", "mlp", "--pairs", pairs_file, "--seed", "3"
        )
        code_c, out_c, _ = run(
            capsys, "calibrate", "--method", "mlp", "--pairs", pairs_file, "--seed", "4"
        )
        assert code_a == code_b == code_c == 0
        assert out_a == out_b
        assert out_a != out_c

    def test_config_file(self, capsys, tmp_path, pairs_file):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"max_epochs": 5, "seed": 1}))
        code, out, _ = run(
            capsys, "calibrate", "--method", "mlp", "--pairs", pairs_file,
            "--config", str(cfg),
        )
        assert code == 0


class TestCompareCommand:
    def test_stdout_deterministic_and_report_file_has_timings(
        self, capsys, tmp_path, pairs_file
    ):
        report = tmp_path / "report.json"
        argv = ["compare", "--pairs", pairs_file, "--seed", "2", "--out", str(report)]
        code_a, out_a, _ = run(capsys, *argv)
        first_report = json.loads(report.read_text())
        code_b, out_b, _ = run(capsys, *argv)
        assert code_a == code_b == 0
        assert out_a == out_b  # wall times stay out of stdout
        assert "fit_seconds" in first_report["four-point"]
        assert "fit_seconds" not in json.loads(out_a)["four-point"]


class TestDrawEvalCommands:
    def draw(self, capsys, tmp_path, board_mount_file, method="closed"):
        points = tmp_path / "points.csv"
        fileio.save_points_csv(
            points, [(10 + i, 10) for i in range(20)] + [(10 + i, 40) for i in range(20)]
        )
        out_csv = tmp_path / "traj.csv"
        code, out, err = run(
            capsys, "draw", "--points", str(points),
            "--board=-0.04,0.04,-0.04,0.04,0",
            "--calib", board_mount_file, "--chain", "nao-right-3dof",
            "--method", method, "--gap", "2.0", "--out", str(out_csv),
        )
        return code, out, err, out_csv

    def test_draw_writes_trajectory(self, capsys, tmp_path, board_mount_file):
        code, out, err, out_csv = self.draw(capsys, tmp_path, board_mount_file)
        assert code == 0
        assert out == "strokes=2 points=40\n"
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "stroke,index,theta1,theta2,theta3,pen,residual_m"
        assert len(lines) == 41

    def test_eval_round_trip(self, capsys, tmp_path, board_mount_file):
        code, _, _, out_csv = self.draw(capsys, tmp_path, board_mount_file)
        assert code == 0
        # commanded points: recompute the same mapping
        import sketcharm

        points = fileio.load_points_csv(tmp_path / "points.csv")
        plan = sketcharm.order_strokes(points, 2.0)
        bounds = plan.bounds
        board = sketcharm.BoardRegion(-0.04, 0.04, -0.04, 0.04, 0.0)
        calib = fileio.load_calibration(board_mount_file)
        commanded = []
        for stroke in plan.strokes:
            mapped = sketcharm.image_to_board(stroke, bounds, board)
            commanded.extend(sketcharm.as_point_mapper(calib)(mapped))
        commanded_csv = tmp_path / "commanded.csv"
        fileio.save_arm_points_csv(commanded_csv, np.asarray(commanded))

        code, out, err = run(
            capsys, "eval", "--commanded", str(commanded_csv),
            "--trajectory", str(out_csv), "--chain", "nao-right-3dof",
        )
        assert code == 0
        assert float(out.strip()) < 1e-9

    def test_draw_from_pgm(self, capsys, tmp_path, board_mount_file):
        grid = np.zeros((20, 20), dtype=int)
        grid[6:14, 6:14] = 255
        from sketcharm.pipeline import GrayRaster

        pgm = tmp_path / "img.pgm"
        fileio.save_pgm(pgm, GrayRaster(20, 20, grid))
        out_csv = tmp_path / "traj.csv"
        code, out, err = run(
            capsys, "draw", "--image", str(pgm),
            "--board=-0.03,0.03,-0.03,0.03,0",
            "--calib", board_mount_file, "--chain", "nao-right-3dof",
            "--method", "iterative", "--threshold", "40", "--gap", "3",
            "--out", str(out_csv),
        )
        assert code == 0
        assert out_csv.exists()


@pytest.fixture(scope="module")
def live_server():
    """A real uvicorn instance on a random local port."""
    import socket
    import threading
    import time

    import uvicorn

    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    url = f"http://127.0.0.1:{port}"
    while time.time() < deadline:
        try:
            if httpx.get(url + "/health", timeout=1.0).status_code == 200:
                break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        raise RuntimeError("service did not start")
    yield url
    server.should_exit = True
    thread.join(timeout=5)


class TestRemoteDispatch:
    def test_cli_against_live_server(self, capsys, live_server):
        code, out, _ = run(
            capsys, "--server", live_server, "fk",
            "--chain", "nao-right-3dof", "--joints", "0,0,0",
        )
        assert code == 0
        assert out == "0.218700000,0.000000000,0.000000000\n"

    def test_remote_domain_error_paths(self, capsys, live_server):
        code, out, err = run(
            capsys, "--server", live_server, "ik", "--method", "closed",
            "--chain", "nao-right-3dof", "--target", "0.5,0,0",
        )
        assert code == 1
        assert json.loads(err)["error"]["kind"] == "unreachable"

    def test_remote_matches_local(self, capsys, live_server, pairs_file):
        argv = ["calibrate", "--method", "matrix", "--pairs", pairs_file]
        _, local_out, _ = run(capsys, *argv)
        _, remote_out, _ = run(capsys, "--server", live_server, *argv)
        assert json.loads(local_out) == json.loads(remote_out)


class TestDeterminism:
    def test_identical_invocations_byte_identical(self, capsys, pairs_file):
        argv = ["calibrate", "--method", "matrix", "--pairs", pairs_file]
        _, out_a, _ = run(capsys, *argv)
        _, out_b, _ = run(capsys, *argv)
        assert out_a.encode() == out_b.encode()
