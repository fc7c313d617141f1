"""End-to-end runs of the batch front end."""

import json
import os

import numpy as np
import pandas as pd
import pytest

from src import simulator
from src.simulator import main, run
from src.utils.automaton_utils import random_ensemble
from src.utils.config import RunConfig, config
from src.utils.evolution_utils import WaveFunction
from src.utils.fock_utils import TrotterReport
from src.utils.io_utils import ensemble_to_dict, load_events_jsonl, wavefunction_to_dict
from src.utils.lattice_utils import LatticeSpec
from src.utils.verify_utils import CheckResult, skipped


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_verify_passes_on_two_sites(tmp_path, output_dir):
    status = main(["--mode", "verify", "--out", output_dir])
    checks = pd.read_csv(os.path.join(output_dir, "checks.csv"))
    print(checks[~checks["passed"]])
    assert status == 0
    assert checks["passed"].all()
    assert not checks["skipped"].any()
    assert {"combined_factor_extraction", "chain_rule_four_steps", "splitting_scaling"} <= set(checks["name"])
    with open(os.path.join(output_dir, "manifest.json"), encoding="utf-8") as f:
        manifest = json.load(f)
    assert set(manifest["suites"]) == set(checks["suite"])


def test_verify_exit_codes(monkeypatch, output_dir):
    """Test that a skipped check gives the budget status and a failed one wins over it."""
    passing = CheckResult("lattice", "bit_roundtrip", True)
    skip = skipped("fock", "transport_operator", "Fock space too large")
    monkeypatch.setattr(simulator, "run_suite", lambda spec, seed: [passing, skip])
    assert main(["--mode", "verify", "--out", output_dir]) == 3
    checks = pd.read_csv(os.path.join(output_dir, "checks.csv"))
    assert list(checks["status"]) == ["PASS", "SKIP"]

    failing = CheckResult("automaton", "charge_sum", False, "1 configurations")
    monkeypatch.setattr(simulator, "run_suite", lambda spec, seed: [failing, skip])
    assert main(["--mode", "verify", "--out", output_dir]) == 1


def test_trajectory_artifacts(tmp_path, output_dir):
    path = write_config(tmp_path, {"mode": "trajectory", "lattice": {"M_x": 16}, "steps": 12})
    assert main(["--config", path, "--out", output_dir]) == 0
    frame = pd.read_csv(os.path.join(output_dir, "trajectory.csv"))
    assert list(frame["t"]) == list(range(13))
    events = load_events_jsonl(os.path.join(output_dir, "events.jsonl"))
    assert events
    assert all(e["kind"].startswith("scatter_") for e in events)
    assert os.path.exists(os.path.join(output_dir, "trajectory.svg"))
    assert os.path.exists(os.path.join(output_dir, "run_config.json"))


def test_reruns_are_byte_identical(tmp_path):
    path = write_config(tmp_path, {"mode": "trajectory", "lattice": {"M_x": 16}, "steps": 12})
    first, second = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["--config", path, "--out", first]) == 0
    assert main(["--config", path, "--out", second]) == 0
    for name in ("trajectory.csv", "events.jsonl", "trajectory.svg"):
        with open(os.path.join(first, name), "rb") as a, open(os.path.join(second, name), "rb") as b:
            assert a.read() == b.read(), name


def test_ensemble_mode_conserves_probability(tmp_path, output_dir):
    path = write_config(tmp_path, {"mode": "ensemble", "steps": 5, "ensemble": {"count": 2}})
    assert main(["--config", path, "--out", output_dir, "--seed", "7"]) == 0
    frame = pd.read_csv(os.path.join(output_dir, "ensemble.csv"))
    totals = frame.groupby(["member", "t"])["p"].sum()
    assert totals.to_numpy() == pytest.approx(1.0, abs=1e-12)
    charges = pd.read_csv(os.path.join(output_dir, "charges.csv"))
    for _, member in charges.groupby("member"):
        assert member["N_total"].nunique() == 1


def test_wavefunction_mode_from_input(tmp_path, output_dir):
    state = ensemble_to_dict(random_ensemble(LatticeSpec(2), 4, seed=3))
    input_path = write_config(tmp_path, state, "state.json")
    path = write_config(tmp_path, {"mode": "wavefunction", "steps": 3, "input": input_path})
    assert main(["--config", path, "--out", output_dir]) == 0
    frame = pd.read_csv(os.path.join(output_dir, "wavefunction.csv"))
    assert frame.groupby("t")["p"].sum().to_numpy() == pytest.approx(1.0)


def test_wavefunction_mode_keeps_imaginary_parts(tmp_path, output_dir):
    q = np.zeros(256, dtype=complex)
    q[5], q[9] = 0.6, 0.8j
    input_path = write_config(tmp_path, wavefunction_to_dict(WaveFunction(LatticeSpec(2), q)), "state.json")
    path = write_config(tmp_path, {"mode": "wavefunction", "steps": 2, "input": input_path})
    assert main(["--config", path, "--out", output_dir]) == 0
    frame = pd.read_csv(os.path.join(output_dir, "wavefunction.csv"))
    for _, rows in frame.groupby("t"):
        assert (rows["q_im"] ** 2).sum() == pytest.approx(0.64)
        assert (rows["q_re"] ** 2).sum() == pytest.approx(0.36)
        assert rows["p"].sum() == pytest.approx(1.0)


def test_spectrum_mode(tmp_path, output_dir):
    path = write_config(tmp_path, {"mode": "spectrum", "lattice": {"M_x": 4}})
    assert main(["--config", path, "--out", output_dir]) == 0
    frame = pd.read_csv(os.path.join(output_dir, "spectrum.csv"))
    assert len(frame) == 16
    assert frame["residual"].abs().max() < 1e-9


def test_configuration_error_exit_code(tmp_path, output_dir):
    path = write_config(tmp_path, {"mode": "verify", "lattice": {"sites": 2}})
    assert main(["--config", path, "--out", output_dir]) == 2
    assert main(["--config", str(tmp_path / "missing.json")]) == 2


def test_budget_exit_code(output_dir):
    assert main(["--mode", "wavefunction", "--out", output_dir, "--max-dim", "16"]) == 3


def test_trotter_exit_code_follows_trend(monkeypatch, output_dir):
    """Test that a receding trend that does not decrease fails the run."""

    def fake_trend(spec, widths, n_steps, separation, geometry="receding"):
        distances = [0.05, 0.007, 0.04] if geometry == "receding" else [1.6, 1.6, 1.6]
        return [TrotterReport(w, n_steps, 0.0, d, 0.0, geometry) for w, d in zip(widths, distances)]

    monkeypatch.setattr(simulator, "continuum_trend", fake_trend)
    assert run(RunConfig(mode="trotter", output_dir=output_dir)) == 1
    frame = pd.read_csv(os.path.join(output_dir, "trotter.csv"))
    assert list(frame["geometry"]) == ["receding"] * 3 + ["colliding"] * 3


def test_run_restores_global_config(tmp_path, output_dir):
    norm_tol, max_dense = config.tolerances.NORM_TOL, config.budgets.MAX_DENSE_DIM
    path = write_config(
        tmp_path,
        {"mode": "spectrum", "lattice": {"M_x": 4}, "tolerances": {"norm_tol": 1e-6}, "max_dim": 1024},
    )
    assert main(["--config", path, "--out", output_dir]) == 0
    assert config.tolerances.NORM_TOL == norm_tol
    assert config.budgets.MAX_DENSE_DIM == max_dense


if __name__ == "__main__":
    pytest.main([__file__])
