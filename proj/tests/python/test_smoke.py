from pathlib import Path

import numpy as np
import pytest

import crnobs

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def test_parse_and_field():
    net = crnobs.ReactionNetwork.parse("X1 + X2 <-> X3 [2, 1]")
    assert net.species == ["X1", "X2", "X3"]
    x = np.array([1.0, 2.0, 3.0])
    flux = 2 * 1 * 2 - 3
    np.testing.assert_allclose(net.f(x), [-flux, -flux, flux])


def test_detectability_and_equilibrium():
    net = crnobs.ReactionNetwork.load(str(CONFIGS / "two_species.crn"))
    report = crnobs.check_detectability(net, [[4.0, 1.0]])
    assert report["detectable"]
    x_bar = crnobs.find_equilibrium(net, [0.3, 4.7])
    np.testing.assert_allclose(x_bar, [4.0, 1.0], atol=1e-8)


def test_lyapunov_is_zero_at_equilibrium():
    net = crnobs.ReactionNetwork.load(str(CONFIGS / "two_species.crn"))
    lyap = crnobs.Lyapunov(net, np.array([4.0, 1.0]))
    assert lyap.value(np.array([4.0, 1.0])) == pytest.approx(0.0, abs=1e-14)
    assert lyap.dissipation(np.array([5.0, 2.0])) < 0


def test_run_experiment_converges():
    results = crnobs.run_experiment(CONFIGS / "mckeithan_main.json")
    assert len(results) == 1
    r = results[0]
    assert r["converged"]
    assert r["x"].shape == r["z"].shape
    assert r["error"][-1] <= 1e-6


def test_blowup_escapes():
    r = crnobs.blowup_demo(0.4, np.ones(3), 20.0)
    assert r["escape_detected"]
    assert r["escape_time"] < r["comparison_escape_time"]


def test_errors_map_to_python_exceptions():
    with pytest.raises(crnobs.ParseError):
        crnobs.ReactionNetwork.parse("X1 -> ")
    with pytest.raises(crnobs.Error):
        crnobs.OutputMap(np.array([[0.5, 0.0]]))
