import json

import pytest

from src.utils.config import RunConfig, config
from src.utils.errors import ConfigurationError


def test_defaults_round_trip():
    run_config = RunConfig.from_dict({})
    assert run_config.mode == "verify"
    assert RunConfig.from_dict(run_config.to_dict()) == run_config


def test_nested_sections():
    run_config = RunConfig.from_dict(
        {
            "mode": "trajectory",
            "lattice": {"M_x": 16, "epsilon": 0.5},
            "initial": {"bits": "1000" * 16},
            "ensemble": {"support": 4, "count": 3},
            "trotter": {"widths": [2.0, 4.0]},
        }
    )
    assert run_config.M_x == 16
    assert run_config.epsilon == 0.5
    assert run_config.ensemble.count == 3
    assert run_config.trotter.widths == [2.0, 4.0]
    assert run_config.trotter.M_x == 256


@pytest.mark.parametrize(
    "data",
    [
        {"mode": "animate"},
        {"lattice": {"M_x": 0}},
        {"lattice": {"epsilon": -1.0}},
        {"steps": -1},
        {"seed": -3},
        {"schema_version": 2},
        {"colour": "red"},
        {"lattice": {"M_x": 2, "spacing": 1.0}},
        {"trotter": {"packets": 2}},
        {"lattice": [2]},
    ],
)
def test_invalid_documents_rejected(data):
    with pytest.raises(ConfigurationError) as excinfo:
        RunConfig.from_dict(data)
    assert excinfo.value.exit_code == 2


def test_from_json_reports_unreadable_file(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigurationError):
        RunConfig.from_json(str(broken))
    with pytest.raises(ConfigurationError):
        RunConfig.from_json(str(tmp_path / "missing.json"))


def test_from_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"mode": "spectrum", "lattice": {"M_x": 5}}))
    run_config = RunConfig.from_json(str(path))
    assert (run_config.mode, run_config.M_x) == ("spectrum", 5)


def test_tolerance_override():
    config.override_tolerances({"norm_tol": 1e-6})
    assert config.tolerances.NORM_TOL == 1e-6
    with pytest.raises(ConfigurationError):
        config.override_tolerances({"speed_tol": 1.0})
    with pytest.raises(ConfigurationError):
        config.override_tolerances({"NORM_TOL": 0})


def test_max_dim_override():
    config.set_max_dim(256)
    assert config.budgets.MAX_DENSE_DIM == 256
    with pytest.raises(ConfigurationError):
        config.set_max_dim(8)


def test_default_config_is_valid():
    assert config.validate()


if __name__ == "__main__":
    pytest.main([__file__])
