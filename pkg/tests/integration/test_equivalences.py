"""The automaton, its Fock-space exponentials and its Grassmann factors describe one evolution."""

import numpy as np
import pytest

from src.utils.automaton_utils import evolve_ensemble, random_ensemble
from src.utils.evolution_utils import (
    apply_step,
    build_step_operator,
    gauge_transform,
    probabilities_of,
    sign_gauge,
    wavefunction_from_ensemble,
)
from src.utils.factor_utils import (
    ExtractedOperator,
    FactorKind,
    extract_step_operator,
    fix_sign_table,
    local_factor,
)
from src.utils.fock_utils import assemble_S_free_fock, build_S_int_fock
from src.utils.lattice_utils import LatticeSpec


def test_three_routes_to_the_free_step(pair):
    automaton = build_step_operator(pair, "free")
    fock = assemble_S_free_fock(pair, "twisted")
    assert np.array_equal(fock.targets, automaton.targets)
    assert np.all(fock.signs == 1)

    K = local_factor(FactorKind.FREE, pair)
    table, _ = fix_sign_table(K)
    assert extract_step_operator(K, table) == ExtractedOperator.from_step_operator(automaton)


def test_three_routes_to_the_single_site_step(site):
    automaton = build_step_operator(site, "full")
    fock = build_S_int_fock(site, "real")
    gauged = gauge_transform(fock, sign_gauge(fock).gauge)
    assert np.array_equal(gauged.targets, build_step_operator(site, "int").targets)

    K = local_factor(FactorKind.COMBINED, site)
    table, _ = fix_sign_table(K)
    assert extract_step_operator(K, table) == ExtractedOperator.from_step_operator(automaton)


def test_three_routes_to_the_two_site_step(pair):
    automaton = build_step_operator(pair, "full")
    fock = build_S_int_fock(pair, "real").compose(assemble_S_free_fock(pair, "twisted"))
    gauge = sign_gauge(fock)
    assert gauge.succeeded
    assert gauge_transform(fock, gauge.gauge).equals(automaton)

    K = local_factor(FactorKind.COMBINED, pair)
    table, result = fix_sign_table(K, strict=True)
    assert result.succeeded
    assert extract_step_operator(K, table) == ExtractedOperator.from_step_operator(automaton)


def test_interaction_support_on_two_sites(pair):
    automaton = ExtractedOperator.from_step_operator(build_step_operator(pair, "int"))
    grassmann = extract_step_operator(local_factor(FactorKind.INTERACTION, pair))
    fock = ExtractedOperator.from_step_operator(build_S_int_fock(pair, "real"))
    assert grassmann.support() == automaton.support()
    assert fock.support() == automaton.support()


@pytest.mark.parametrize("M_x", [2, 3])
def test_wave_function_reproduces_ensemble(M_x):
    """Test 50 random ensembles over 100 steps against the wave-function route."""
    spec = LatticeSpec(M_x)
    S = build_step_operator(spec, "full")
    for seed in range(50):
        _compare_routes(S, random_ensemble(spec, 16, seed=seed), 100)


def _compare_routes(S, ensemble, n_steps):
    wf = wavefunction_from_ensemble(ensemble)
    for expected in evolve_ensemble(ensemble, n_steps)[1:]:
        wf = apply_step(S, wf)
        observed = probabilities_of(wf)
        assert set(observed.weights) == set(expected.weights)
        for tau, p in expected.weights.items():
            assert observed.weights[tau] == pytest.approx(p, abs=1e-12)
