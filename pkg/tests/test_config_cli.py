import json

import numpy as np
import pytest

from singhyp.cli import EXIT_ERROR, EXIT_FAIL, EXIT_INDETERMINATE, EXIT_PASS, main
from singhyp.config import RunConfig, lorenz_config
from singhyp.errors import DomainError

DIAG = {"kind": "linear", "A": np.diag([-3.0, 2.0, 4.0, 10.0]).tolist()}


def small_config(tmp_path, **kw):
    base = dict(field=DIAG, initial=[[0.0] * 4], T=30.0, dt=0.1, d_E=1, p=[2],
                singularity_seeds=[[0.1, 0.1, 0.1, 0.1]], out=str(tmp_path / "out"))
    base.update(kw)
    return RunConfig(**base)


def write_config(tmp_path, cfg, name="run.toml"):
    path = tmp_path / name
    cfg.save(path)
    return str(path)


def load_json(path):
    d = json.loads(path.read_text())
    d.pop("created")
    return d


# ---------------------------------------------------------------- config

def test_toml_round_trip(tmp_path):
    cfg = lorenz_config()
    path = write_config(tmp_path, cfg)
    back = RunConfig.load(path)
    assert back == cfg
    assert RunConfig.from_toml(cfg.to_toml()).to_dict() == cfg.to_dict()


def test_initial_conditions_are_seeded():
    cfg = lorenz_config()
    X = cfg.initial_conditions()
    assert X.shape == (5, 3)
    np.testing.assert_array_equal(X[0], [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(X, lorenz_config().initial_conditions())
    assert not np.array_equal(X, lorenz_config(seed=1).initial_conditions())
    box = np.array(cfg.random_box)
    assert np.all((X[1:] >= box[:, 0]) & (X[1:] <= box[:, 1]))


@pytest.mark.parametrize("bad", [
    {"p": [3]}, {"d_E": 0}, {"d_E": 3}, {"T": 10.005}, {"tau": 0.015},
    {"initial": [[1.0, 2.0]]}, {"random_box": [[0, 1]]}, {"workers": 0},
    {"tolerances": {"rtol": -1.0}}, {"initial": [], "random_count": 0},
])
def test_config_validation(bad):
    with pytest.raises(DomainError):
        lorenz_config(**bad)


def test_unknown_sections_and_keys_rejected():
    d = lorenz_config().to_dict()
    with pytest.raises(DomainError):
        RunConfig.from_dict({**d, "extra": {}})
    d["time"]["horizon"] = 5
    with pytest.raises(DomainError):
        RunConfig.from_dict(d)


# ------------------------------------------------------------------- cli

@pytest.mark.parametrize("name", ["diagonal", "paper-1.9"])
def test_diagonal_example_table(tmp_path, capsys, name):
    code = main(["verify", "--example", name, "--out", str(tmp_path)])
    # the induced splitting on the second exterior power is not dominated
    assert code == EXIT_FAIL
    d = json.loads((tmp_path / "verify.json").read_text())
    table = {r["k"]: (r["verdict"], max(r["rates_E"]), min(r["rates_F"])) for r in d["splittings"]}
    assert table == {1: ("Pass", -3.0, 2.0), 2: ("Fail", 7.0, 6.0), 3: ("Pass", 11.0, 16.0)}
    assert "Fail" in capsys.readouterr().out


def test_spectrum_example(tmp_path):
    assert main(["spectrum", "--example", "diagonal", "--out", str(tmp_path)]) == EXIT_PASS
    (orbit,) = json.loads((tmp_path / "spectrum.json").read_text())["orbits"]
    np.testing.assert_allclose(orbit["exponents"], [10, 4, 2, -3], atol=1e-6)
    np.testing.assert_allclose(orbit["p_sectional"]["2"], [6, 12, 14], atol=1e-6)
    np.testing.assert_allclose(orbit["p_sectional"]["3"], [16], atol=1e-6)
    assert orbit["domination"]["slope"] == pytest.approx(-5.0, abs=1e-6)
    assert (tmp_path / "spectrum_000.csv").exists()
    assert (tmp_path / "domination_000.csv").exists()


def test_verify_config_passes_and_is_deterministic(tmp_path):
    cfg = small_config(tmp_path)
    path = write_config(tmp_path, cfg)
    assert main(["verify", "--config", path]) == EXIT_PASS
    out = tmp_path / "out"
    first = load_json(out / "verify.json")
    summary = (out / "verify_summary.txt").read_text()
    assert main(["verify", "--config", path]) == EXIT_PASS
    assert load_json(out / "verify.json") == first
    assert (out / "verify_summary.txt").read_text() == summary
    props = [c["property"] for c in first["ensemble"]]
    assert "SingularityCompatibility" in props and "ConeCriterion" in props


def test_verify_failure_exit_code(tmp_path):
    cfg = small_config(tmp_path, field={"kind": "linear",
                                        "A": [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0],
                                              [0.0, 0.0, 2.0]]},
                       initial=[[0.0, 0.0, 0.0]], p=[], singularity_seeds=[])
    assert main(["verify", "--config", write_config(tmp_path, cfg)]) == EXIT_FAIL


def test_indeterminate_exit_code(tmp_path):
    # centre at the origin: the singularity check cannot decide
    cfg = small_config(tmp_path, field={"kind": "linear",
                                        "A": [[-1.0, 0.0, 0.0], [0.0, 0.0, -1.0],
                                              [0.0, 1.0, 0.0]]},
                       initial=[[0.0, 0.0, 0.0]], d_E=2, p=[],
                       singularity_seeds=[[0.1, 0.1, 0.1]])
    code = main(["verify", "--config", write_config(tmp_path, cfg)])
    d = json.loads((tmp_path / "out" / "verify.json").read_text())
    verdicts = {c["property"]: c["verdict"] for c in d["ensemble"]}
    assert verdicts["SingularityCompatibility"] == "Indeterminate"
    assert code == (EXIT_FAIL if "Fail" in verdicts.values() else EXIT_INDETERMINATE)


def test_simulate_is_idempotent(tmp_path):
    path = write_config(tmp_path, small_config(tmp_path))
    assert main(["simulate", "--config", path]) == EXIT_PASS
    npz = tmp_path / "out" / "orbits" / "orbit_000.npz"
    stamp = npz.stat().st_mtime_ns
    first = load_json(tmp_path / "out" / "simulate.json")
    assert main(["simulate", "--config", path]) == EXIT_PASS
    assert npz.stat().st_mtime_ns == stamp
    assert load_json(tmp_path / "out" / "simulate.json") == first


def test_runtime_error_exit_code(tmp_path):
    blowup = {"kind": "polynomial", "n": 2, "terms": [[0, 1.0, [2, 0]], [1, -1.0, [0, 1]]]}
    cfg = small_config(tmp_path, field=blowup, initial=[[1.0, 1.0]], p=[])
    assert main(["simulate", "--config", write_config(tmp_path, cfg)]) == EXIT_ERROR


def test_config_errors_exit_before_output(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(lorenz_config().to_toml().replace("p = [\n    2,\n]", "p = [\n    3,\n]"))
    out = tmp_path / "never"
    assert main(["verify", "--config", str(bad), "--out", str(out)]) == EXIT_ERROR
    assert not out.exists()
    assert main(["verify", "--config", str(bad), "--example", "lorenz"]) == EXIT_ERROR
    assert main(["verify"]) == EXIT_ERROR


def test_jlab_command(tmp_path, capsys):
    assert main(["jlab", "--trials", "5", "--seed", "3", "--out", str(tmp_path)]) == EXIT_PASS
    d = json.loads((tmp_path / "jlab.json").read_text())
    assert d["seed"] == 3
    assert {s["name"] for s in d["suites"]} == {"polar_reconstruction", "composition",
                                                "kuhne_bounds", "sigma_d"}
    assert all(s["violations"] == 0 for s in d["suites"])
