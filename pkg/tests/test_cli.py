import numpy as np
import pytest

from parabolic_fem.cli import EXIT_ERROR, EXIT_OK, EXIT_RATES, main
from parabolic_fem.mesh import build_square_mesh
from parabolic_fem.norms import Trajectory
from parabolic_fem.study import ConvergenceReport
from parabolic_fem.trajio import (dump_trajectory, format_trajectory, load_trajectory,
                                  parse_trajectory)


def test_study_writes_csv_and_passes_rate_check(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(["study", "--problem", "smooth1d", "--levels", "3", "--couple-tau",
                 "--steps", "8", "--out", str(out), "--no-timing", "--assert-rates"])
    assert code == EXIT_OK
    rep = ConvergenceReport.read_csv(out)
    assert [r.level for r in rep.rows] == [0, 1, 2]
    assert "rate" in capsys.readouterr().out


def test_rate_failure_exit_code(capsys):
    code = main(["study", "--problem", "smooth1d", "--levels", "2", "-q",
                 "--assert-rates", "e_W:3:4"])
    assert code == EXIT_RATES
    assert "outside" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["study", "--problem", "no-such-problem"],
    ["study"],
    ["study", "--config", "/nonexistent/config.txt"],
    ["verify", "no-such-suite"],
    ["norms", "--traj", "/nonexistent/traj.txt"],
])
def test_errors_exit_with_one(argv, capsys):
    assert main(argv) == EXIT_ERROR
    assert capsys.readouterr().err


def test_config_file_with_override(tmp_path):
    cfg = tmp_path / "c.txt"
    out = tmp_path / "c.csv"
    cfg.write_text(f"problem = smooth2d\nlevels = 4\nsteps = 2\nout = {out}\n")
    assert main(["study", "--config", str(cfg), "--levels", "2", "-q"]) == EXIT_OK
    assert len(ConvergenceReport.read_csv(out).rows) == 2


def test_verify_single_suite(capsys):
    assert main(["verify", "projections"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS")


def test_norms_on_dumped_trajectory(tmp_path, capsys):
    traj = tmp_path / "t.txt"
    assert main(["study", "--problem", "smooth1d", "--levels", "2", "-q",
                 "--dump-traj", str(traj)]) == EXIT_OK
    capsys.readouterr()
    assert main(["norms", "--traj", str(traj), "--problem", "smooth1d"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "discrete energy norm" in text and "e_W" in text


def test_trajectory_round_trip(tmp_path):
    m = build_square_mesh(3, -1.0, 1.0)
    rng = np.random.default_rng(0)
    traj = Trajectory(m, np.linspace(0.0, 0.5, 4), rng.standard_normal((4, m.n_free)))
    back = parse_trajectory(format_trajectory(traj))
    np.testing.assert_array_equal(back.values, traj.values)
    np.testing.assert_array_equal(back.times, traj.times)
    np.testing.assert_array_equal(back.mesh.vertices, m.vertices)
    np.testing.assert_array_equal(back.mesh.cells, m.cells)
    path = tmp_path / "t.txt"
    dump_trajectory(traj, path)
    assert format_trajectory(load_trajectory(path)) == format_trajectory(traj)
    with pytest.raises(ValueError):
        parse_trajectory("not a trajectory")
