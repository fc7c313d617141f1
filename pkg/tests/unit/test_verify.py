import pytest

from src.utils.lattice_utils import LatticeSpec
from src.utils.verify_utils import (
    SUITES,
    CheckResult,
    chain_rule,
    combined_factor_extraction,
    run_suite,
    skipped,
    sublattice_decoupling,
    suite_manifest,
)


def test_manifest_names_every_check():
    manifest = suite_manifest()
    assert set(manifest) == {"lattice", "automaton", "evolution", "fock", "grassmann"}
    assert {"interaction_involution", "charge_sum", "extreme_points"} <= set(manifest["automaton"])
    assert {"alternation", "schrodinger_steps", "splitting_scaling"} <= set(manifest["evolution"])
    assert {"hamiltonian_charges", "interaction_support"} <= set(manifest["fock"])
    assert {
        "gmul_exhaustive",
        "primed_duality",
        "free_factor_extraction",
        "chain_rule_four_steps",
    } <= set(manifest["grassmann"])


def test_skipped_result_is_neither_pass_nor_fail():
    result = skipped("fock", "transport_operator", "Fock space too large")
    assert result.status == "SKIP"
    assert not result.passed
    row = result.to_dict()
    assert row["skipped"] and row["status"] == "SKIP"
    assert "seconds" not in row
    assert CheckResult("lattice", "bit_roundtrip", False).status == "FAIL"


def test_grassmann_suite_runs_on_the_run_lattice(pair):
    """Test that the combined factor and chain rule are built at M_x = 2 and hold there."""
    results = run_suite(pair, 0, ["grassmann"])
    failing = [(r.name, r.detail) for r in results if r.status != "PASS"]
    assert not failing
    combined = next(r for r in results if r.name == "combined_factor_extraction")
    assert combined.detail == "0 obstructed cycles"


def test_grassmann_checks_skip_beyond_generator_budget(triple):
    assert combined_factor_extraction(triple, 0).skipped
    assert chain_rule(triple, 0).skipped


def test_wide_lattice_fock_checks_are_skipped():
    results = run_suite(LatticeSpec(5), 0, ["fock"])
    assert results
    assert all(r.skipped and not r.passed for r in results)


def test_odd_lattice_skips_sublattice_decoupling(triple, pair):
    assert sublattice_decoupling(triple, 0).skipped
    result = sublattice_decoupling(pair, 0)
    assert result.passed and not result.skipped


@pytest.mark.parametrize("suite", ["lattice", "automaton", "evolution", "fock"])
def test_suites_pass_on_two_sites(pair, suite):
    results = run_suite(pair, 3, [suite])
    assert [r.name for r in results] == [f.__name__ for f in SUITES[suite]]
    assert all(r.status == "PASS" for r in results), [(r.name, r.detail) for r in results]


def test_raising_check_is_a_failure(monkeypatch, pair):
    def broken(spec, seed):
        raise ZeroDivisionError("division by zero")

    monkeypatch.setitem(SUITES, "lattice", [broken])
    (result,) = run_suite(pair, 0, ["lattice"])
    assert result.status == "FAIL"
    assert "ZeroDivisionError" in result.detail


def test_unknown_suite_rejected(pair):
    with pytest.raises(ValueError):
        run_suite(pair, 0, ["topology"])


if __name__ == "__main__":
    pytest.main([__file__])
