import numpy as np
import pytest

from src.utils.lattice_utils import (
    BitConfig,
    Charge,
    LatticeSpec,
    Species,
    charge,
    charges,
    config_from_index,
    index_of,
    local_nibble,
    nibble_value,
    popcount,
    scatter,
    transport,
    translate,
    words_for,
)


def test_bit_layout():
    """Test that bit b(x, gamma) = 4x + gamma and locate() inverts it."""
    spec = LatticeSpec(3)
    for x in range(3):
        for s in Species:
            b = spec.bit(x, s)
            assert b == 4 * x + s.value
            assert spec.locate(b) == (x, s)


def test_species_properties():
    assert [s.mover for s in Species] == ["R", "R", "L", "L"]
    assert [s.color for s in Species] == [1, 2, 1, 2]
    assert Species.from_label("l2") is Species.L2
    with pytest.raises(ValueError):
        Species.from_label("X1")


def test_config_roundtrip(pair):
    for tau in range(pair.dimension):
        c = config_from_index(tau, pair)
        assert index_of(c) == tau
        assert BitConfig.from_bits(pair, c.bits).index == tau


def test_from_particles(pair):
    c = BitConfig.from_particles(pair, [(0, Species.R1), (1, Species.L2)])
    assert c.index == 1 + (1 << 7)
    assert c.bits == "10000001"
    assert local_nibble(c, 1) == (0, 0, 0, 1)
    assert nibble_value(local_nibble(c, 0)) == 1


def test_invalid_inputs():
    with pytest.raises(ValueError):
        LatticeSpec(0)
    with pytest.raises(ValueError):
        BitConfig(LatticeSpec(1), 16)
    with pytest.raises(ValueError):
        BitConfig.from_bits(LatticeSpec(1), "101")
    with pytest.raises(ValueError):
        local_nibble(BitConfig(LatticeSpec(1), 0), 1)


def test_charges():
    spec = LatticeSpec(2)
    c = BitConfig.from_particles(spec, [(0, Species.R1), (0, Species.L1), (1, Species.R2)])
    assert charge(c, Charge.N_TOTAL) == 3
    assert charge(c, Charge.N_R) == 2
    assert charge(c, Charge.N_L) == 1
    assert charge(c, Charge.N_COLOR1_PARITY) == 0
    assert charges(c) == (3, 2, 1, 0)


def test_translate(pair):
    c = BitConfig.from_particles(pair, [(0, Species.R1)])
    assert translate(c).index == 1 << 4
    assert translate(translate(c)) == c


def test_transport_kernel():
    """Test that right movers hop right and left movers hop left, periodically."""
    spec = LatticeSpec(2)
    assert transport(1, spec) == 1 << 4  # R1 at 0 -> R1 at 1
    assert transport(1 << 2, spec) == 1 << 6  # L1 at 0 -> L1 at 1 (wraps)
    assert transport(transport(5, spec), spec, direction=-1) == 5
    site = LatticeSpec(1)
    assert all(transport(tau, site) == tau for tau in range(16))


def test_scatter_kernel():
    """Test the local exchange 9 <-> 6, 5 <-> 10 and that other nibbles stay."""
    site = LatticeSpec(1)
    expected = {9: 6, 6: 9, 5: 10, 10: 5}
    for tau in range(16):
        assert scatter(tau, site) == expected.get(tau, tau)


def test_vectorized_kernels_match_scalar(triple):
    taus = np.arange(triple.dimension)
    words = words_for(triple, taus)
    scattered = scatter(transport(words, triple), triple)
    for tau in range(0, triple.dimension, 37):
        assert int(scattered[tau]) == scatter(transport(tau, triple), triple)


def test_popcount():
    words = np.array([0, 1, 3, 2**63 + 1], dtype=np.uint64)
    np.testing.assert_array_equal(popcount(words), [0, 1, 2, 2])


if __name__ == "__main__":
    pytest.main([__file__])
