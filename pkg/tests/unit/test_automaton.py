import numpy as np
import pytest

from src.utils.automaton_utils import (
    Ensemble,
    automaton_step,
    conserved_charges_violations,
    cycle_lengths,
    ensemble_step,
    evolve_ensemble,
    inverse_step,
    is_bijection,
    random_ensemble,
    replay_events,
    step_table,
    sublattice_counts,
    trajectory,
)
from src.utils.lattice_utils import BitConfig, LatticeSpec, Species


def test_single_particle_moves():
    spec = LatticeSpec(4)
    c = BitConfig.from_particles(spec, [(0, Species.R1), (0, Species.L2)])
    moved = automaton_step(c)
    assert moved == BitConfig.from_particles(spec, [(1, Species.R1), (3, Species.L2)])


def test_scatter_event():
    """Test that a single R meeting a single L exchanges colors and is logged."""
    spec = LatticeSpec(3)
    c = BitConfig.from_particles(spec, [(0, Species.R1), (2, Species.L1)])
    configs, events = trajectory(c, 1)
    assert configs[1] == BitConfig.from_particles(spec, [(1, Species.R2), (1, Species.L2)])
    assert [(e.t, e.x, e.kind) for e in events] == [(1, 1, "scatter_5_10")]
    assert events[0].before == (1, 0, 1, 0)
    assert events[0].after == (0, 1, 0, 1)


def test_double_movers_pass_straight():
    spec = LatticeSpec(3)
    c = BitConfig.from_particles(spec, [(0, Species.R1), (0, Species.R2), (2, Species.L1)])
    configs, events = trajectory(c, 1)
    assert events == []
    assert configs[1] == BitConfig.from_particles(
        spec, [(1, Species.R1), (1, Species.R2), (1, Species.L1)]
    )


@pytest.mark.parametrize("M_x", [1, 2, 3])
def test_unique_jump_tables(M_x):
    spec = LatticeSpec(M_x)
    for which in ("full", "free", "int", "translation"):
        assert is_bijection(step_table(spec, which))


def test_inverse_step(triple):
    for tau in range(0, triple.dimension, 7):
        c = BitConfig(triple, tau)
        assert inverse_step(automaton_step(c)) == c


@pytest.mark.parametrize("M_x", [1, 2, 3])
def test_charges_conserved(M_x):
    spec = LatticeSpec(M_x)
    assert conserved_charges_violations(spec, range(spec.dimension)) == []


def test_event_log_matches_replay():
    spec = LatticeSpec(6)
    rng = np.random.default_rng(3)
    for _ in range(5):
        start = BitConfig(spec, int(rng.integers(0, spec.dimension)))
        configs, events = trajectory(start, 12)
        assert sorted((e.t, e.x) for e in events) == sorted(replay_events(configs))


def test_sublattices_decouple():
    spec = LatticeSpec(4)
    start = BitConfig.from_particles(spec, [(0, Species.R1), (1, Species.L1), (2, Species.L2)])
    configs, _ = trajectory(start, 8)
    assert len({sublattice_counts(c, t) for t, c in enumerate(configs)}) == 1


def test_ensemble_validation(site):
    with pytest.raises(ValueError):
        Ensemble(site, {0: 0.5, 1: 0.6})
    with pytest.raises(ValueError):
        Ensemble(site, {0: 1.5, 1: -0.5})
    with pytest.raises(ValueError):
        Ensemble(site, {16: 1.0})


def test_ensemble_step_relabels_weights(pair):
    e = random_ensemble(pair, 10, seed=7)
    stepped = ensemble_step(e)
    assert sorted(stepped.weights.values()) == sorted(e.weights.values())
    for tau, p in e.weights.items():
        target = automaton_step(BitConfig(pair, tau)).index
        assert stepped.probability(target) == p


def test_random_ensemble_is_seeded(pair):
    a = random_ensemble(pair, 12, seed=1)
    b = random_ensemble(pair, 12, seed=1)
    c = random_ensemble(pair, 12, seed=2)
    assert a.weights == b.weights
    assert a.weights != c.weights
    assert abs(sum(a.weights.values()) - 1.0) < 1e-12


def test_random_ensemble_reaches_high_bits():
    """Test that wide lattices draw configurations reaching the two top bits."""
    spec = LatticeSpec(16)
    e = random_ensemble(spec, 64, seed=5)
    assert len(e.support) == 64
    assert all(0 <= tau < spec.dimension for tau in e.support)
    assert any(tau >> 62 for tau in e.support)


def test_evolve_ensemble_length(pair):
    assert len(evolve_ensemble(random_ensemble(pair, 4, seed=0), 5)) == 6


def test_cycle_lengths_cover_space(pair):
    histogram = cycle_lengths(step_table(pair, "full"))
    assert sum(length * count for length, count in histogram.items()) == pair.dimension


if __name__ == "__main__":
    pytest.main([__file__])
