import json

import numpy as np
import pytest

import tenspine


def test_presets():
    m = tenspine.preset_model("2d-default")
    assert (m.dim, m.cables, m.state_dim) == (2, 4, 6)
    assert tenspine.preset_model("3d-default").cables == 24
    with pytest.raises(tenspine.ConfigError):
        tenspine.preset_model("nope")


def test_inverse_statics_equilibrium():
    m = tenspine.preset_model("2d-default")
    t, xi = tenspine.reference_trajectory(m, duration=1.0, dt=0.1)
    assert xi.shape == (11, 6)
    u, q = tenspine.inverse_statics(m, t, xi)
    assert u.shape == (11, 4)
    assert q.min() >= 0.5 - 1e-9
    for k in range(len(t)):
        acc = tenspine.state_derivative(m, xi[k], u[k])
        assert np.abs(acc).max() <= 1e-6


def test_equilibrium_matrix_rank():
    m = tenspine.preset_model("2d-default")
    xi = np.array([0.0, 0.1, 0.0, 0.0, 0.0, 0.0])
    A, p = tenspine.equilibrium_matrix(m, xi)
    assert A.shape == (6, 4)
    assert np.linalg.matrix_rank(A, tol=1e-10 * np.linalg.norm(A, 2)) == 3


def test_solve_qp_matches_numpy():
    P = np.eye(2)
    f = np.zeros(2)
    z, status, _ = tenspine.solve_qp(P, f, np.ones((1, 2)), np.array([2.0]), np.zeros((0, 2)), np.zeros(0))
    assert status == "optimal"
    np.testing.assert_allclose(z, [1.0, 1.0], atol=1e-9)


def test_free_fall_step():
    m = tenspine.preset_model("2d-default")
    xi = np.array([0.0, 0.1, 0.0, 0.0, 0.0, 0.0])
    nxt = tenspine.step(m, xi, np.full(4, 10.0), 1e-3, "rk4")
    assert nxt[4] == pytest.approx(-9.81e-3)


def test_run_command(tmp_path):
    cfg = tenspine.default_config()
    assert cfg["tracking"]["N"] == 4
    code, messages, report = tenspine.run("rank-check", {}, tmp_path / "rank")
    assert code == 0, messages
    assert report["poses_not_rank_3"] == 0
    code, messages, _ = tenspine.run("run", {"bogus": 1}, tmp_path / "bad")
    assert code == 2
    assert not (tmp_path / "bad").exists()
