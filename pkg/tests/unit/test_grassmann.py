from fractions import Fraction

import numpy as np
import pytest

from src.utils.errors import BudgetExceededError
from src.utils.grassmann_utils import (
    BasisConvention,
    BasisVariant,
    GrassmannElement,
    basis,
    berezin,
    default_slice,
    eta,
    expansion_residue,
    gexp,
    integrate_slice,
    overlap_matrix,
    permutation_sign,
)

GENERATORS = ("psi1", "psi2", "psi3", "psi4")


def gen(name):
    return GrassmannElement.generator(GENERATORS, name)


def test_anticommutation():
    a, b = gen("psi1"), gen("psi2")
    assert a * b == -(b * a)
    assert (a * a).is_zero()
    assert (a * b).coefficient_of(["psi2", "psi1"]) == -1


def test_numbers_scale():
    a = gen("psi3")
    assert (2 * a).terms == {1 << 2: Fraction(2)}
    assert (a * Fraction(1, 2)).coefficient_of(["psi3"]) == Fraction(1, 2)


def test_distinct_generators_required():
    with pytest.raises(ValueError):
        GrassmannElement(("a", "a"))


def test_generator_budget():
    with pytest.raises(BudgetExceededError):
        GrassmannElement.zero([f"g{i}" for i in range(33)])


def test_gexp_of_two_bilinears():
    x = GrassmannElement.monomial(GENERATORS, ["psi1", "psi2"])
    y = GrassmannElement.monomial(GENERATORS, ["psi3", "psi4"])
    expected = GrassmannElement.one(GENERATORS) + x + y + x * y
    assert gexp(x + y) == expected


def test_gexp_rejects_odd_and_constant():
    with pytest.raises(ValueError):
        gexp(gen("psi1"))
    with pytest.raises(ValueError):
        gexp(GrassmannElement.one(GENERATORS))


def test_berezin_rules():
    """Test int dpsi psi = 1, int dpsi 1 = 0 and the slice measure."""
    assert berezin(gen("psi1"), ["psi1"]).constant_term() == 1
    assert berezin(GrassmannElement.one(GENERATORS), ["psi1"]).is_zero()
    top = GrassmannElement.monomial(GENERATORS, GENERATORS)
    assert integrate_slice(top, GENERATORS).constant_term() == 1
    swapped = GrassmannElement.monomial(GENERATORS, ["psi2", "psi1", "psi3", "psi4"])
    assert integrate_slice(swapped, GENERATORS).constant_term() == -1


def test_embed_reorders_with_sign():
    e = GrassmannElement.monomial(("a", "b"), ["a", "b"])
    moved = e.embed(("b", "a", "c"))
    assert moved.coefficient_of(["a", "b"]) == 1
    assert moved.terms == {0b11: Fraction(-1)}


def test_rename_keeps_coefficients():
    e = GrassmannElement.monomial(("a", "b"), ["b", "a"], 3)
    renamed = e.rename({"a": "x"})
    assert renamed.generators == ("x", "b")
    assert renamed.coefficient_of(["b", "x"]) == 3


def test_permutation_sign():
    assert permutation_sign([0, 1, 2]) == 1
    assert permutation_sign([1, 0, 2]) == -1
    assert permutation_sign([2, 0, 1]) == 1


def test_hole_convention_example():
    """Test that the hole convention gives g_(1001) = psi2 psi3."""
    g = basis(0b1001, 4, BasisVariant.G, convention=BasisConvention.HOLE)
    assert g == GrassmannElement.monomial(default_slice(4), ["psi2", "psi3"])
    assert basis(0, 4, BasisVariant.G) == GrassmannElement.one(default_slice(4))


@pytest.mark.parametrize("convention", list(BasisConvention))
@pytest.mark.parametrize("M", [1, 2, 3, 4])
def test_expansion_identity(M, convention):
    assert expansion_residue(M, convention).is_zero()


@pytest.mark.parametrize("convention", list(BasisConvention))
def test_conjugate_orthonormality(convention):
    overlaps = overlap_matrix(4, BasisVariant.G_BAR, BasisVariant.G, convention)
    assert np.all(overlaps == np.eye(16, dtype=int))


@pytest.mark.parametrize("M", [2, 3, 4])
def test_primed_duality(M):
    overlaps = overlap_matrix(M, BasisVariant.G_PRIME, BasisVariant.G_BAR_PRIME)
    assert np.all(overlaps == eta(M) * np.eye(1 << M, dtype=int))


def test_sign_table_flips_basis():
    table = [1] * 16
    table[5] = -1
    assert basis(5, 4, BasisVariant.G, sign_table=table) == -basis(5, 4, BasisVariant.G)


def test_eta_values():
    assert [eta(M) for M in range(1, 9)] == [1, -1, -1, 1, 1, -1, -1, 1]


if __name__ == "__main__":
    pytest.main([__file__])
