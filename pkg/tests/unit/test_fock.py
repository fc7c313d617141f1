import numpy as np
import pytest

from src.utils.errors import BudgetExceededError
from src.utils.evolution_utils import (
    build_step_operator,
    cycle_invariants,
    gauge_transform,
    sign_gauge,
)
from src.utils.fock_utils import (
    anticommutator_errors,
    assemble_S_free_fock,
    build_H_lattice,
    build_S_free_fock,
    build_S_int_fock,
    charge_operator_diagonal,
    continuum_trend,
    full_basis,
    gaussian_packet,
    global_interaction,
    ladder_matrix,
    lattice_hamiltonian_matrices,
    local_interaction_block,
    normal_ordered_exponential,
    sector_basis,
    species_shift_targets,
    transport_hopping,
    trotter_compare,
)
from src.utils.lattice_utils import LatticeSpec, Species

EXCHANGED = {9: 6, 6: 9, 5: 10, 10: 5}


def test_ladder_signs():
    """Test the Jordan-Wigner string: a_1 |11> = -|01>."""
    a1 = ladder_matrix(2, 1, dagger=False).toarray()
    assert a1[1, 3] == -1
    assert a1[0, 2] == 1
    a0 = ladder_matrix(1, 0, dagger=False).toarray()
    np.testing.assert_array_equal(a0, [[0, 1], [0, 0]])


def test_anticommutators(pair):
    errors = anticommutator_errors(pair)
    print(f"\nAnticommutator errors: {errors}")
    assert max(errors.values()) <= 1e-14


@pytest.mark.parametrize("variant", ["literal", "real"])
def test_local_block_support(variant):
    block = local_interaction_block(variant)
    expected = np.zeros((16, 16))
    for tau in range(16):
        expected[EXCHANGED.get(tau, tau), tau] = 1
    np.testing.assert_allclose(np.abs(block), expected, atol=1e-12)


def test_literal_block_phases():
    block = local_interaction_block("literal")
    for source, target in EXCHANGED.items():
        assert abs(block[target, source].real) < 1e-12
        assert abs(abs(block[target, source].imag) - 1) < 1e-12


def test_interaction_operator_gauge_equivalent(pair):
    """Test that the real exponential equals the scatter permutation up to basis signs."""
    S = build_S_int_fock(pair, "real")
    assert S.is_permutation
    assert all(v == 1 for v in cycle_invariants(S).values())
    fixed = gauge_transform(S, sign_gauge(S).gauge)
    assert fixed.equals(build_step_operator(pair, "int"))


def test_global_interaction_matches_product(pair):
    local = build_S_int_fock(pair, "real").to_sparse().toarray()
    np.testing.assert_allclose(global_interaction(pair, "real").toarray(), local, atol=1e-12)


@pytest.mark.parametrize("M_x", [1, 2, 3, 4])
def test_twisted_transport_is_shift(M_x):
    spec = LatticeSpec(M_x)
    for species in Species:
        S = build_S_free_fock(spec, species, "twisted")
        assert S.is_permutation
        np.testing.assert_array_equal(S.targets, species_shift_targets(M_x, species.mover))
        assert np.all(S.signs == 1)


def test_periodic_transport_exchange_sign():
    """Test that two fermions cycled around two sites pick up -1 without the twist."""
    S = build_S_free_fock(LatticeSpec(2), Species.R1, "periodic")
    assert S.is_permutation
    assert S.targets[3] == 3
    assert S.signs[3] == -1
    assert S.signs[1] == 1 and S.signs[2] == 1


def test_assembled_transport_equals_automaton(pair):
    assert assemble_S_free_fock(pair, "twisted").equals(build_step_operator(pair, "free"))


def test_normal_ordered_budget():
    with pytest.raises(BudgetExceededError):
        normal_ordered_exponential(5, transport_hopping(5, "R"))


def test_lattice_hamiltonians_hermitian(site):
    H_free, H_int = build_H_lattice(site)
    np.testing.assert_allclose(H_free.matrix, H_free.matrix.conj().T)
    np.testing.assert_allclose(H_int.matrix, H_int.matrix.conj().T)


@pytest.mark.parametrize("M_x", [3, 4, 5])
@pytest.mark.parametrize("species", list(Species))
def test_one_particle_plane_waves(M_x, species):
    """Test that plane waves diagonalize H_free with eigenvalues +-sin(2 pi k / M_x) / eps."""
    spec = LatticeSpec(M_x, 0.5)
    basis = sector_basis(spec, [[species]])
    H_free, H_int = build_H_lattice(spec, basis)
    assert not np.any(H_int.matrix)
    sign = 1 if species.mover == "R" else -1
    x = np.arange(M_x)
    for k in range(M_x):
        wave = np.exp(2j * np.pi * k * x / M_x) / np.sqrt(M_x)
        energy = sign * np.sin(2 * np.pi * k / M_x) / spec.epsilon
        np.testing.assert_allclose(H_free.matrix @ wave, energy * wave, atol=1e-12)


def test_lattice_hamiltonian_conserves_charges(pair):
    H_free, H_int = build_H_lattice(pair)
    basis = full_basis(pair)
    charges = [
        charge_operator_diagonal(basis, pair.full_mask),
        charge_operator_diagonal(basis, pair.right_mask),
        charge_operator_diagonal(basis, pair.left_mask),
        charge_operator_diagonal(basis, pair.color1_mask, parity=True),
    ]
    for H in (H_free.matrix, H_int.matrix):
        for q in charges:
            Q = np.diag(q)
            np.testing.assert_allclose(H @ Q - Q @ H, 0, atol=1e-12)


def test_interaction_needs_two_particles(pair):
    _, h_int = lattice_hamiltonian_matrices(pair)
    dense = h_int.toarray()
    for tau in range(pair.dimension):
        if tau.bit_count() < 2:
            assert not np.any(dense[:, tau])
    assert np.any(dense[:, 0b0101])


def test_trotter_compare_zero_steps():
    spec = LatticeSpec(16)
    basis = sector_basis(spec, [[Species.R1, Species.L1], [Species.R2, Species.L2]])
    q0 = gaussian_packet(basis, [(Species.R1, 10.0), (Species.L1, 6.0)], 2.0)
    assert abs(np.linalg.norm(q0) - 1) < 1e-12
    report = trotter_compare(spec, basis, q0, 0)
    assert report.automaton_vs_split == 0.0
    assert report.automaton_vs_continuum == 0.0


def test_colliding_packets_stay_far_from_continuum():
    """Test that the automaton's exchange keeps colliding packets O(1) away from H_lattice."""
    reports = continuum_trend(LatticeSpec(128), [2.0, 4.0, 8.0], 32, 32, "colliding")
    print(f"\nColliding distances: {[r.automaton_vs_continuum for r in reports]}")
    assert [r.geometry for r in reports] == ["colliding"] * 3
    assert all(r.automaton_vs_continuum > 1.0 for r in reports)


def test_receding_packets_must_not_meet():
    with pytest.raises(ValueError):
        continuum_trend(LatticeSpec(128), [2.0, 4.0, 8.0], 4, 100)
    with pytest.raises(ValueError):
        continuum_trend(LatticeSpec(64), [2.0], 4, 16, "sideways")


if __name__ == "__main__":
    pytest.main([__file__])
