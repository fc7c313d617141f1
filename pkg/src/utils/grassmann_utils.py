"""
Exact Grassmann algebra with Berezin integration, and the basis functions of a time slice.

An element is a map from monomials to rational coefficients. Monomials are bitmasks
over an ordered tuple of named generators and are stored in canonical (ascending
generator) order with the reordering sign absorbed into the coefficient.

Basis functions of a slice with M variables psi_1 .. psi_M follow the slice order of
the variables, which is the bit order of the configuration index:

    g_tau     = s_tau * prod of psi_alpha over the chosen bits (particle: occupied bits)
    g'_tau    = eps_m * g_tau,                eps_m = (-1)^(m(m-1)/2)
    gbar_tau  = dual of g_tau with  int Dpsi gbar_tau g_rho = delta_tau_rho
    gbar'_tau = eps'_tau * gbar_tau,          eps'_tau = (-1)^m eps_m eta_M (-1)^(M m)

where m is the number of psi factors of g_tau, eta_M = (-1)^(M(M-1)/2) and s_tau is an
optional sign table. The measure is int Dpsi = int dpsi_M ... dpsi_1.
"""

import logging
import numbers
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .config import config
from .errors import BudgetExceededError

logger = logging.getLogger("fermion_automaton")

Scalar = Union[int, Fraction]


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


def _product_sign(a: int, b: int) -> int:
    """Sign of reordering monomial(a) * monomial(b) into canonical order (a & b == 0)."""
    inversions = 0
    remaining = b
    while remaining:
        low = remaining & -remaining
        j = low.bit_length() - 1
        inversions += _popcount(a >> (j + 1))
        remaining ^= low
    return -1 if inversions % 2 else 1


def _ordered_monomial(positions: Sequence[int]) -> Tuple[int, int]:
    """Mask and sign of the product of generators taken in the given order (0, 0 if repeated)."""
    mask, sign = 0, 1
    for p in positions:
        if (mask >> p) & 1:
            return 0, 0
        if _popcount(mask >> (p + 1)) % 2:
            sign = -sign
        mask |= 1 << p
    return mask, sign


def permutation_sign(sequence: Sequence[int]) -> int:
    """(-1)^(number of inversions) of a sequence of distinct integers."""
    return _ordered_monomial(list(sequence))[1]


@dataclass(frozen=True)
class GrassmannElement:
    """Element of the Grassmann algebra over an ordered tuple of generator names."""

    generators: Tuple[str, ...]
    terms: Mapping[int, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        generators = tuple(self.generators)
        if len(set(generators)) != len(generators):
            raise ValueError("Generator names must be distinct")
        if len(generators) > config.budgets.MAX_GRASSMANN_GENERATORS:
            raise BudgetExceededError(
                f"{len(generators)} generators exceed MAX_GRASSMANN_GENERATORS "
                f"{config.budgets.MAX_GRASSMANN_GENERATORS}"
            )
        limit = 1 << len(generators)
        cleaned = {}
        for mask, coefficient in self.terms.items():
            if not 0 <= mask < limit:
                raise ValueError(f"Monomial mask {mask} outside the generator set")
            value = Fraction(coefficient)
            if value != 0:
                cleaned[int(mask)] = value
        object.__setattr__(self, "generators", generators)
        object.__setattr__(self, "terms", cleaned)

    # constructors

    @classmethod
    def zero(cls, generators: Sequence[str]) -> "GrassmannElement":
        return cls(tuple(generators), {})

    @classmethod
    def constant(cls, generators: Sequence[str], value: Scalar = 1) -> "GrassmannElement":
        return cls(tuple(generators), {0: Fraction(value)})

    @classmethod
    def one(cls, generators: Sequence[str]) -> "GrassmannElement":
        return cls.constant(generators, 1)

    @classmethod
    def generator(cls, generators: Sequence[str], name: str) -> "GrassmannElement":
        return cls.monomial(generators, [name])

    @classmethod
    def monomial(
        cls, generators: Sequence[str], names: Sequence[str], coefficient: Scalar = 1
    ) -> "GrassmannElement":
        """coefficient * psi_{names[0]} psi_{names[1]} ..., in the order given."""
        generators = tuple(generators)
        mask, sign = _ordered_monomial([_position(generators, n) for n in names])
        return cls(generators, {mask: sign * Fraction(coefficient)} if sign else {})

    # structure

    def position(self, name: str) -> int:
        return _position(self.generators, name)

    def is_zero(self) -> bool:
        return not self.terms

    def is_even(self) -> bool:
        return all(_popcount(mask) % 2 == 0 for mask in self.terms)

    def is_odd(self) -> bool:
        return all(_popcount(mask) % 2 == 1 for mask in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get(0, Fraction(0))

    def degree(self) -> int:
        return max((_popcount(mask) for mask in self.terms), default=0)

    def coefficient_of(self, names: Sequence[str]) -> Fraction:
        """Coefficient of the product of `names` taken in the given order."""
        mask, sign = _ordered_monomial([self.position(n) for n in names])
        if sign == 0:
            return Fraction(0)
        return sign * self.terms.get(mask, Fraction(0))

    # arithmetic

    def _check_compatible(self, other: "GrassmannElement"):
        if self.generators != other.generators:
            raise ValueError("Grassmann elements live over different generator sets; embed first")

    def __add__(self, other: "GrassmannElement") -> "GrassmannElement":
        self._check_compatible(other)
        terms = dict(self.terms)
        for mask, coefficient in other.terms.items():
            terms[mask] = terms.get(mask, Fraction(0)) + coefficient
        return GrassmannElement(self.generators, terms)

    def __neg__(self) -> "GrassmannElement":
        return GrassmannElement(self.generators, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "GrassmannElement") -> "GrassmannElement":
        return self + (-other)

    def scaled(self, factor: Scalar) -> "GrassmannElement":
        factor = Fraction(int(factor)) if isinstance(factor, numbers.Integral) else Fraction(factor)
        return GrassmannElement(self.generators, {m: factor * c for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, numbers.Rational):
            return self.scaled(other)
        return gmul(self, other)

    def __rmul__(self, other):
        if isinstance(other, numbers.Rational):
            return self.scaled(other)
        return NotImplemented

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrassmannElement):
            return NotImplemented
        return self.generators == other.generators and self.terms == other.terms

    def __hash__(self):
        return hash((self.generators, tuple(sorted(self.terms.items()))))

    # renaming and embedding

    def rename(self, mapping: Mapping[str, str]) -> "GrassmannElement":
        """Rename generators; the order (and therefore every coefficient) is unchanged."""
        return GrassmannElement(tuple(mapping.get(g, g) for g in self.generators), self.terms)

    def embed(self, generators: Sequence[str]) -> "GrassmannElement":
        """The same element over a larger (or reordered) generator tuple."""
        generators = tuple(generators)
        if generators == self.generators:
            return self
        targets = [_position(generators, g) for g in self.generators]
        terms: Dict[int, Fraction] = {}
        for mask, coefficient in self.terms.items():
            positions = [targets[i] for i in range(len(self.generators)) if (mask >> i) & 1]
            new_mask, sign = _ordered_monomial(positions)
            terms[new_mask] = terms.get(new_mask, Fraction(0)) + sign * coefficient
        return GrassmannElement(generators, terms)

    def to_text(self, symbol: str = "ψ") -> str:
        """Canonical text form: monomials sorted by degree then mask, '±c · ψ_{a} ψ_{b}'."""
        if not self.terms:
            return "0"
        parts = []
        for mask in sorted(self.terms, key=lambda m: (_popcount(m), m)):
            coefficient = self.terms[mask]
            sign = "-" if coefficient < 0 else "+"
            names = [self.generators[i] for i in range(len(self.generators)) if (mask >> i) & 1]
            if names:
                factors = " ".join(f"{symbol}_{{{n}}}" for n in names)
                parts.append(f"{sign}{abs(coefficient)} · {factors}")
            else:
                parts.append(f"{sign}{abs(coefficient)}")
        return " ".join(parts)

    def __str__(self) -> str:
        return self.to_text()


def _position(generators: Sequence[str], name: str) -> int:
    try:
        return generators.index(name)
    except ValueError:
        raise ValueError(f"Unknown Grassmann generator '{name}'")


def union_generators(*groups: Sequence[str]) -> Tuple[str, ...]:
    """Generators of all groups in first-seen order."""
    seen: List[str] = []
    for group in groups:
        for name in group:
            if name not in seen:
                seen.append(name)
    return tuple(seen)


def gmul(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    """Graded product with psi_i psi_j = -psi_j psi_i and psi_i^2 = 0."""
    a._check_compatible(b)
    if len(a.terms) * len(b.terms) > config.budgets.MAX_PROJECTION_TERMS:
        raise BudgetExceededError(
            f"Product of {len(a.terms)} x {len(b.terms)} monomials exceeds MAX_PROJECTION_TERMS"
        )
    terms: Dict[int, Fraction] = {}
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            if ma & mb:
                continue
            mask = ma | mb
            terms[mask] = terms.get(mask, Fraction(0)) + _product_sign(ma, mb) * ca * cb
    return GrassmannElement(a.generators, terms)


def gexp(a: GrassmannElement) -> GrassmannElement:
    """exp(a) for an even element without constant term; the series ends by nilpotency."""
    if not a.is_even():
        raise ValueError("gexp needs an even Grassmann element")
    if a.constant_term() != 0:
        raise ValueError("gexp needs an element without constant term")
    result = GrassmannElement.one(a.generators)
    power = GrassmannElement.one(a.generators)
    k = 1
    while True:
        power = gmul(power, a).scaled(Fraction(1, k))
        if power.is_zero():
            return result
        result = result + power
        k += 1


def berezin(e: GrassmannElement, variables: Sequence[str]) -> GrassmannElement:
    """Iterated Berezin integral int d(variables[0]) ... d(variables[-1]) e.

    The variables are written as in the measure, outermost first, so the last one is
    integrated first. Each integration uses int dpsi (c + psi r) = r and drops the
    generator from the result.
    """
    result = e
    for name in reversed(list(variables)):
        result = _integrate_one(result, name)
    return result


def _integrate_one(e: GrassmannElement, name: str) -> GrassmannElement:
    p = e.position(name)
    below = (1 << p) - 1
    terms: Dict[int, Fraction] = {}
    for mask, coefficient in e.terms.items():
        if not (mask >> p) & 1:
            continue
        sign = -1 if _popcount(mask & below) % 2 else 1
        rest = mask ^ (1 << p)
        # drop bit p from the mask
        new_mask = (rest & below) | ((rest >> (p + 1)) << p)
        terms[new_mask] = terms.get(new_mask, Fraction(0)) + sign * coefficient
    generators = e.generators[:p] + e.generators[p + 1 :]
    return GrassmannElement(generators, terms)


def measure(slice_vars: Sequence[str]) -> List[str]:
    """Variables of Dpsi = dpsi_M ... dpsi_1 in measure order."""
    return list(reversed(list(slice_vars)))


def integrate_slice(e: GrassmannElement, slice_vars: Sequence[str]) -> GrassmannElement:
    """int Dpsi e over one time slice."""
    return berezin(e, measure(slice_vars))


# Basis functions ------------------------------------------------------------------


class BasisConvention(str, Enum):
    PARTICLE = "particle"  # occupied bit <-> psi factor, g_(0...0) = 1
    HOLE = "hole"  # occupied bit <-> factor 1


class BasisVariant(str, Enum):
    G = "g"
    G_PRIME = "g'"
    G_BAR = "gbar"
    G_BAR_PRIME = "gbar'"

    @property
    def conjugate(self) -> bool:
        return self in (BasisVariant.G_BAR, BasisVariant.G_BAR_PRIME)


def epsilon_sign(m: int) -> int:
    """(-1)^(m(m-1)/2)."""
    return -1 if (m * (m - 1) // 2) % 2 else 1


def eta(M: int) -> int:
    """+1 for M = 0, 1 mod 4 and -1 for M = 2, 3 mod 4."""
    return epsilon_sign(M)


def epsilon_prime(m: int, M: int) -> int:
    return (-1) ** m * epsilon_sign(m) * eta(M) * (-1) ** (M * m)


def default_slice(M: int, prefix: str = "psi") -> List[str]:
    return [f"{prefix}{alpha}" for alpha in range(1, M + 1)]


def basis_term(
    tau: int,
    positions: Sequence[int],
    variant: BasisVariant,
    sign_table: Optional[Sequence[int]] = None,
    convention: BasisConvention = BasisConvention.PARTICLE,
) -> Tuple[int, Fraction]:
    """Canonical mask and coefficient of a basis function whose slice variables sit at `positions`."""
    M = len(positions)
    if not 0 <= tau < (1 << M):
        raise ValueError(f"Configuration {tau} outside 0..{(1 << M) - 1}")
    occupied = [(tau >> b) & 1 for b in range(M)]
    if BasisConvention(convention) is BasisConvention.PARTICLE:
        chosen = [b for b in range(M) if occupied[b]]
    else:
        chosen = [b for b in range(M) if not occupied[b]]
    m = len(chosen)
    s = 1 if sign_table is None else int(sign_table[tau])
    variant = BasisVariant(variant)

    if not variant.conjugate:
        mask, sign = _ordered_monomial([positions[b] for b in chosen])
        coefficient = s * sign * (epsilon_sign(m) if variant is BasisVariant.G_PRIME else 1)
        return mask, Fraction(coefficient)

    complement = [b for b in range(M) if b not in chosen]
    mask, sign = _ordered_monomial([positions[b] for b in complement])
    # psi_{A^c} psi_A = sigma psi_1 ... psi_M in slice order
    sigma = permutation_sign(complement + chosen)
    coefficient = s * sigma * sign
    if variant is BasisVariant.G_BAR_PRIME:
        coefficient *= epsilon_prime(m, M)
    return mask, Fraction(coefficient)


def basis(
    tau: int,
    slice_vars: Union[int, Sequence[str]],
    variant: BasisVariant = BasisVariant.G,
    generators: Optional[Sequence[str]] = None,
    sign_table: Optional[Sequence[int]] = None,
    convention: BasisConvention = BasisConvention.PARTICLE,
) -> GrassmannElement:
    """Basis function of configuration tau over the variables of one slice."""
    if isinstance(slice_vars, int):
        slice_vars = default_slice(slice_vars)
    slice_vars = list(slice_vars)
    generators = tuple(generators) if generators is not None else tuple(slice_vars)
    positions = [_position(generators, v) for v in slice_vars]
    mask, coefficient = basis_term(tau, positions, variant, sign_table, convention)
    return GrassmannElement(generators, {mask: coefficient})


def bilinear_sum(
    generators: Sequence[str],
    pairs: Iterable[Tuple[str, str]],
    weights: Optional[Iterable[Scalar]] = None,
) -> GrassmannElement:
    """sum_k w_k psi_{a_k} psi_{b_k}."""
    generators = tuple(generators)
    pairs = list(pairs)
    weights = list(weights) if weights is not None else [1] * len(pairs)
    total = GrassmannElement.zero(generators)
    for (a, b), w in zip(pairs, weights):
        total = total + GrassmannElement.monomial(generators, [a, b], w)
    return total


def expansion_residue(
    M: int,
    convention: BasisConvention = BasisConvention.PARTICLE,
    sign_table: Optional[Sequence[int]] = None,
) -> GrassmannElement:
    """exp(sum_alpha psi_alpha phi_alpha) - sum_tau g_tau(psi) g'_tau(phi); zero when the identity holds."""
    psi, phi = default_slice(M, "psi"), default_slice(M, "phi")
    generators = union_generators(psi, phi)
    lhs = gexp(bilinear_sum(generators, zip(psi, phi)))
    rhs = GrassmannElement.zero(generators)
    for tau in range(1 << M):
        left = basis(tau, psi, BasisVariant.G, generators, sign_table, convention)
        right = basis(tau, phi, BasisVariant.G_PRIME, generators, sign_table, convention)
        rhs = rhs + left * right
    return lhs - rhs


def overlap_matrix(
    M: int,
    left: BasisVariant,
    right: BasisVariant,
    convention: BasisConvention = BasisConvention.PARTICLE,
    sign_table: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Matrix of int Dpsi left_tau(psi) right_rho(psi) as exact Fractions (object array)."""
    slice_vars = default_slice(M)
    dimension = 1 << M
    functions_left = [
        basis(t, slice_vars, left, None, sign_table, convention) for t in range(dimension)
    ]
    functions_right = [
        basis(t, slice_vars, right, None, sign_table, convention) for t in range(dimension)
    ]
    result = np.empty((dimension, dimension), dtype=object)
    for tau, f in enumerate(functions_left):
        for rho, h in enumerate(functions_right):
            result[tau, rho] = integrate_slice(f * h, slice_vars).constant_term()
    return result
