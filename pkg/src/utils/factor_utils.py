"""
Local factors of the Grassmann functional integral and the step evolution operators they encode.

A local factor links the variables psi(t + t_tilde) of one time slice (the "out"
slice) with psi(t) of the previous one (the "in" slice). Reading its double
expansion in basis functions gives the step evolution operator:

    odd t:   K = g_tau(out)     S_tau,rho g'_rho(in)
    even t:  K = gbar'_tau(out) S_tau,rho gbar_rho(in)

Integrating the shared slice of two neighbouring factors multiplies their operators.
The interaction is placed on odd t and transport on even t, so the integrated pair
reads as K = g_tau(out) (S_int S_free)_tau,rho gbar_rho(in).

Variables are named "<slice>:x<site>:<species>", e.g. "t1:x0:R1", and every slice
lists them in the bit order of the configuration index.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import sympy

from .config import config
from .errors import BudgetExceededError, SignObstructionError
from .evolution_utils import SignGauge, StepKind, StepOperator, sign_gauge
from .grassmann_utils import (
    BasisConvention,
    BasisVariant,
    GrassmannElement,
    _product_sign,
    basis,
    basis_term,
    bilinear_sum,
    eta,
    gexp,
    integrate_slice,
    union_generators,
)
from .lattice_utils import LatticeSpec, Species

logger = logging.getLogger("fermion_automaton")

CHANNELS = ("9_6", "5_10")
COARSE_LABELS = ("psi(t)", "bar(t)", "psi(t-1)")


class Parity(str, Enum):
    ODD = "odd"
    EVEN = "even"


PAIRS = {
    Parity.ODD: (BasisVariant.G, BasisVariant.G_PRIME),
    Parity.EVEN: (BasisVariant.G_BAR_PRIME, BasisVariant.G_BAR),
}


class FactorKind(str, Enum):
    IDENTITY = "identity"
    TRANSPORT_R = "transport_R"
    TRANSPORT_L = "transport_L"
    FREE = "free"
    INTERACTION = "interaction"
    COMBINED = "combined"


MOVERS = {
    FactorKind.IDENTITY: (),
    FactorKind.TRANSPORT_R: ("R",),
    FactorKind.TRANSPORT_L: ("L",),
    FactorKind.FREE: ("R", "L"),
}


def slice_variables(spec: LatticeSpec, label: str) -> List[str]:
    return [f"{label}:x{x}:{s.name}" for x in range(spec.M_x) for s in Species]


def parse_variable(name: str) -> Tuple[str, int, Species]:
    label, site, species = name.rsplit(":", 2)
    return label, int(site[1:]), Species[species]


def duality_factor(in_variant: BasisVariant, out_variant: BasisVariant, M: int) -> int:
    """int Dpsi in_alpha(psi) out_beta(psi) = factor * delta_alpha_beta on the shared slice."""
    key = (BasisVariant(in_variant), BasisVariant(out_variant))
    if key == (BasisVariant.G_PRIME, BasisVariant.G_BAR_PRIME):
        return eta(M)
    if key == (BasisVariant.G_BAR, BasisVariant.G):
        return 1
    raise ValueError(
        f"Factors cannot be chained: {key[0].value} meets {key[1].value} on the shared slice"
    )


@dataclass
class LocalFactor:
    """Even Grassmann element linking the out slice to the in slice, with its expansion pair."""

    element: GrassmannElement
    out_vars: List[str]
    in_vars: List[str]
    kind: FactorKind
    pair: Tuple[BasisVariant, BasisVariant]
    spec: LatticeSpec
    half_steps: int = 1
    boundary: str = "periodic"
    middle_vars: List[str] = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        if not self.element.is_even():
            raise ValueError("Local factors must be even Grassmann elements")
        if len(self.out_vars) != len(self.in_vars):
            raise ValueError("Out and in slices differ in size")

    @property
    def t_tilde(self) -> float:
        return self.spec.t_tilde

    @property
    def duration(self) -> float:
        return self.half_steps * self.t_tilde

    @property
    def parity(self) -> Optional[Parity]:
        for parity, pair in PAIRS.items():
            if tuple(self.pair) == pair:
                return parity
        return None

    def integrated(self) -> "LocalFactor":
        """The factor with its intermediate slice integrated out."""
        if not self.middle_vars:
            return self
        element = integrate_slice(self.element, self.middle_vars)
        return LocalFactor(
            element,
            list(self.out_vars),
            list(self.in_vars),
            self.kind,
            self.pair,
            self.spec,
            self.half_steps,
            self.boundary,
            [],
            self.label,
        )


# Construction -------------------------------------------------------------------


def _site_names(label: str, x: int) -> Dict[Species, str]:
    return {s: f"{label}:x{x}:{s.name}" for s in Species}


def pair_exchange_term(
    generators: Sequence[str],
    primed: Mapping[Species, str],
    plain: Mapping[Species, str],
    channels: Sequence[str] = CHANNELS,
) -> GrassmannElement:
    """Dbar = Dtilde + Ctilde at one site; a channel left out contributes nothing.

    Dtilde = -(p_R1 p_L2 - p_R2 p_L1)(q_R1 q_L2 - q_R2 q_L1)   (R1+L2 <-> R2+L1)
    Ctilde = -(p_R1 p_L1 + p_R2 p_L2)(q_R1 q_L1 + q_R2 q_L2)   (R1+L1 <-> R2+L2)
    """
    unknown = set(channels) - set(CHANNELS)
    if unknown:
        raise ValueError(f"Unknown scattering channels {sorted(unknown)}")
    mono = lambda a, b, c=1: GrassmannElement.monomial(generators, [a, b], c)  # noqa: E731
    p, q = primed, plain
    R1, R2, L1, L2 = Species.R1, Species.R2, Species.L1, Species.L2
    total = GrassmannElement.zero(generators)
    if "9_6" in channels:
        left = mono(p[R1], p[L2]) - mono(p[R2], p[L1])
        right = mono(q[R1], q[L2]) - mono(q[R2], q[L1])
        total = total - left * right
    if "5_10" in channels:
        left = mono(p[R1], p[L1]) + mono(p[R2], p[L2])
        right = mono(q[R1], q[L1]) + mono(q[R2], q[L2])
        total = total - left * right
    return total


def site_identity_exponent(
    generators: Sequence[str], primed: Mapping[Species, str], plain: Mapping[Species, str]
) -> GrassmannElement:
    """sum_gamma psi'_gamma psi_gamma at one site."""
    return bilinear_sum(generators, [(primed[s], plain[s]) for s in Species])


def _transport_bonds(
    spec: LatticeSpec, out_label: str, in_label: str, movers: Sequence[str]
) -> List[Tuple[str, str]]:
    """(out var, in var) for every bilinear of the exponent."""
    bonds = []
    for x in range(spec.M_x):
        for s in Species:
            y = (x + s.velocity) % spec.M_x if s.mover in movers else x
            bonds.append((f"{out_label}:x{y}:{s.name}", f"{in_label}:x{x}:{s.name}"))
    return bonds


def transport_element(
    spec: LatticeSpec,
    generators: Sequence[str],
    out_label: str,
    in_label: str,
    movers: Sequence[str],
) -> GrassmannElement:
    """exp{sum psi'(x + v) psi(x)} over all bonds, the wrap bond included with weight +1."""
    return gexp(bilinear_sum(generators, _transport_bonds(spec, out_label, in_label, movers)))


def twisted_transport_element(
    spec: LatticeSpec,
    generators: Sequence[str],
    out_label: str,
    in_label: str,
    movers: Sequence[str],
    pair: Tuple[BasisVariant, BasisVariant],
) -> GrassmannElement:
    """Grassmann image of the direct product of the one-species twisted shifts.

    The monomials are those of exp{sum psi'(x + v) psi(x)}, one per in-configuration.
    Each takes the sign of the basis product out_tau(out) in_rho(in) of `pair` it
    pairs, so neither the wrap bond nor a crossing between species leaves a sign,
    as in `fock_utils.assemble_S_free_fock`.
    """
    generators = tuple(generators)
    out_positions = [generators.index(v) for v in slice_variables(spec, out_label)]
    in_positions = [generators.index(v) for v in slice_variables(spec, in_label)]
    out_bits = sum(1 << p for p in out_positions)
    out_lookup = _slice_lookup(out_positions, pair[0], None, BasisConvention.PARTICLE)
    in_lookup = _slice_lookup(in_positions, pair[1], None, BasisConvention.PARTICLE)

    plain = transport_element(spec, generators, out_label, in_label, movers)
    terms: Dict[int, Fraction] = {}
    for mask in plain.terms:
        out_mask, in_mask = mask & out_bits, mask & ~out_bits
        _, out_coefficient = out_lookup[out_mask]
        _, in_coefficient = in_lookup[in_mask]
        terms[mask] = out_coefficient * in_coefficient * _product_sign(out_mask, in_mask)
    return GrassmannElement(generators, terms)


def local_factor(
    kind: FactorKind,
    spec: LatticeSpec,
    parity: Optional[Parity] = None,
    slices: Optional[Sequence[str]] = None,
    boundary: str = "twisted",
    channels: Sequence[str] = CHANNELS,
) -> LocalFactor:
    """Build one local factor.

    Transport and identity factors default to the even parity and the interaction to
    the odd one. `boundary` is "periodic" (the exponent as written) or "twisted"
    (the direct product of one-species shifts, see `twisted_transport_element`).
    COMBINED takes three slice labels (out, middle, in) and integrates the middle one.
    """
    kind = FactorKind(kind)
    if boundary not in ("periodic", "twisted"):
        raise ValueError(f"Unknown boundary '{boundary}'")
    if kind is FactorKind.COMBINED:
        out_label, middle_label, in_label = slices or ("t2", "t1", "t0")
        interaction = local_factor(
            FactorKind.INTERACTION, spec, Parity.ODD, (out_label, middle_label), channels=channels
        )
        free = local_factor(FactorKind.FREE, spec, Parity.EVEN, (middle_label, in_label), boundary)
        return chain_factors(interaction, free)

    if parity is None:
        parity = Parity.ODD if kind is FactorKind.INTERACTION else Parity.EVEN
    parity = Parity(parity)
    out_label, in_label = slices or ("t1", "t0")
    out_vars = slice_variables(spec, out_label)
    in_vars = slice_variables(spec, in_label)
    generators = tuple(out_vars + in_vars)

    if kind is FactorKind.INTERACTION:
        element = GrassmannElement.one(generators)
        for x in range(spec.M_x):
            primed, plain = _site_names(out_label, x), _site_names(in_label, x)
            site = gexp(site_identity_exponent(generators, primed, plain)) - pair_exchange_term(
                generators, primed, plain, channels
            )
            element = element * site
    elif boundary == "twisted" and MOVERS[kind]:
        element = twisted_transport_element(
            spec, generators, out_label, in_label, MOVERS[kind], PAIRS[parity]
        )
    else:
        element = transport_element(spec, generators, out_label, in_label, MOVERS[kind])

    if config.debug:
        logger.info("🔧 %s factor (%s): %d monomials", kind.value, parity.value, len(element.terms))
    return LocalFactor(
        element,
        out_vars,
        in_vars,
        kind,
        PAIRS[parity],
        spec,
        boundary=boundary,
        label=f"{kind.value}({out_label},{in_label})",
    )


def factor_product(K2: LocalFactor, K1: LocalFactor) -> LocalFactor:
    """K2 K1 over three slices, the shared one kept as `middle_vars`."""
    K2, K1 = K2.integrated(), K1.integrated()
    if list(K2.in_vars) != list(K1.out_vars):
        raise ValueError("Factors do not share a time slice")
    duality_factor(K2.pair[1], K1.pair[0], len(K2.in_vars))
    generators = union_generators(K2.element.generators, K1.element.generators)
    element = K2.element.embed(generators) * K1.element.embed(generators)
    return LocalFactor(
        element,
        list(K2.out_vars),
        list(K1.in_vars),
        FactorKind.COMBINED,
        (K2.pair[0], K1.pair[1]),
        K2.spec,
        K2.half_steps + K1.half_steps,
        K1.boundary,
        list(K2.in_vars),
        f"{K2.label} {K1.label}",
    )


def chain_factors(K2: LocalFactor, K1: LocalFactor) -> LocalFactor:
    """int Dpsi(shared slice) K2 K1."""
    return factor_product(K2, K1).integrated()


# Extraction -----------------------------------------------------------------------


@dataclass
class ExtractedOperator:
    """Exact step evolution operator, entries[(tau, rho)] = S_tau,rho."""

    entries: Dict[Tuple[int, int], Fraction]
    dimension: int
    label: str = ""

    def __post_init__(self):
        self.entries = {k: Fraction(v) for k, v in self.entries.items() if v != 0}

    @classmethod
    def identity(cls, dimension: int) -> "ExtractedOperator":
        return cls({(i, i): Fraction(1) for i in range(dimension)}, dimension, "identity")

    @classmethod
    def from_step_operator(cls, S: StepOperator) -> "ExtractedOperator":
        matrix = S.to_sparse().tocoo()
        entries = {}
        for i, j, v in zip(matrix.row, matrix.col, matrix.data):
            if abs(np.imag(v)) > 0:
                raise ValueError("Only real integer operators convert exactly")
            entries[(int(i), int(j))] = Fraction(int(round(float(np.real(v)))))
        return cls(entries, S.dimension, S.label)

    def __matmul__(self, other: "ExtractedOperator") -> "ExtractedOperator":
        if self.dimension != other.dimension:
            raise ValueError("Dimension mismatch in operator product")
        rows_of_other: Dict[int, List[Tuple[int, Fraction]]] = defaultdict(list)
        for (k, j), b in other.entries.items():
            rows_of_other[k].append((j, b))
        entries: Dict[Tuple[int, int], Fraction] = defaultdict(Fraction)
        for (i, k), a in self.entries.items():
            for j, b in rows_of_other.get(k, ()):
                entries[(i, j)] += a * b
        return ExtractedOperator(dict(entries), self.dimension)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExtractedOperator):
            return NotImplemented
        return self.dimension == other.dimension and self.entries == other.entries

    def scaled(self, factor) -> "ExtractedOperator":
        return ExtractedOperator(
            {k: Fraction(factor) * v for k, v in self.entries.items()}, self.dimension, self.label
        )

    def transpose(self) -> "ExtractedOperator":
        return ExtractedOperator({(j, i): v for (i, j), v in self.entries.items()}, self.dimension)

    def trace(self) -> Fraction:
        return sum((v for (i, j), v in self.entries.items() if i == j), Fraction(0))

    def column(self, rho: int) -> Dict[int, Fraction]:
        return {i: v for (i, j), v in self.entries.items() if j == rho}

    def negative_entries(self) -> List[Tuple[int, int]]:
        return sorted(k for k, v in self.entries.items() if v < 0)

    def support(self) -> set:
        return set(self.entries)

    def to_sparse(self) -> sp.csr_matrix:
        if not self.entries:
            return sp.csr_matrix((self.dimension, self.dimension))
        rows, cols = zip(*self.entries)
        data = [float(v) for v in self.entries.values()]
        return sp.csr_matrix((data, (rows, cols)), shape=(self.dimension, self.dimension))

    def to_step_operator(
        self, spec: Optional[LatticeSpec] = None, kind: StepKind = StepKind.COMPOSITE
    ) -> StepOperator:
        operator = StepOperator(kind, matrix=self.to_sparse(), spec=spec, label=self.label)
        return operator.as_signed_permutation() or operator

    def is_unique_jump(self) -> bool:
        columns = defaultdict(int)
        rows = defaultdict(int)
        for (i, j), v in self.entries.items():
            if abs(v) != 1:
                return False
            columns[j] += 1
            rows[i] += 1
        return (
            len(columns) == self.dimension
            and len(rows) == self.dimension
            and all(c == 1 for c in columns.values())
            and all(r == 1 for r in rows.values())
        )

    def spectral_radius(self) -> Tuple[float, int]:
        """Largest |eigenvalue| and how many eigenvalues attain it."""
        if self.dimension > config.budgets.MAX_DENSE_DIM:
            raise BudgetExceededError("Spectral radius needs a dense matrix beyond MAX_DENSE_DIM")
        eigenvalues = np.abs(np.linalg.eigvals(self.to_sparse().toarray()))
        radius = float(np.max(eigenvalues, initial=0.0))
        count = int(np.sum(np.abs(eigenvalues - radius) <= 1e-9 * max(1.0, radius)))
        return radius, count

    def to_triplets(self) -> List[Tuple[int, int, Fraction]]:
        return [(i, j, v) for (i, j), v in sorted(self.entries.items())]


def _slice_lookup(
    positions: Sequence[int],
    variant: BasisVariant,
    sign_table: Optional[Sequence[int]],
    convention: BasisConvention,
) -> Dict[int, Tuple[int, Fraction]]:
    lookup = {}
    for tau in range(1 << len(positions)):
        mask, coefficient = basis_term(tau, positions, variant, sign_table, convention)
        lookup[mask] = (tau, coefficient)
    return lookup


def extract_step_operator(
    K: LocalFactor,
    sign_table: Optional[Sequence[int]] = None,
    convention: BasisConvention = BasisConvention.PARTICLE,
) -> ExtractedOperator:
    """Read S from the coefficients of K in its double basis expansion."""
    K = K.integrated()
    generators = K.element.generators
    out_positions = [generators.index(v) for v in K.out_vars]
    in_positions = [generators.index(v) for v in K.in_vars]
    out_bits = sum(1 << p for p in out_positions)
    in_bits = sum(1 << p for p in in_positions)
    out_lookup = _slice_lookup(out_positions, K.pair[0], sign_table, convention)
    in_lookup = _slice_lookup(in_positions, K.pair[1], sign_table, convention)

    entries: Dict[Tuple[int, int], Fraction] = {}
    for mask, coefficient in K.element.terms.items():
        if mask & ~(out_bits | in_bits):
            raise ValueError("Factor contains variables outside its two slices")
        out_mask, in_mask = mask & out_bits, mask & in_bits
        tau, out_coefficient = out_lookup[out_mask]
        rho, in_coefficient = in_lookup[in_mask]
        sign = _product_sign(out_mask, in_mask)
        entries[(tau, rho)] = coefficient / (out_coefficient * in_coefficient * sign)
    return ExtractedOperator(entries, 1 << len(out_positions), K.label)


def project_step_operator(
    K: LocalFactor,
    sign_table: Optional[Sequence[int]] = None,
    convention: BasisConvention = BasisConvention.PARTICLE,
) -> ExtractedOperator:
    """S by Berezin projection with the conjugate bases of both slices.

    odd:  S_ab = eta   int Dpsi [ (int Dpsi' gbar_a(psi') K) gbar'_b(psi) ]
    even: S_ab = eta^-1 int Dpsi [ (int Dpsi' g'_a(psi') K) g_b(psi) ]
    """
    K = K.integrated()
    parity = K.parity
    if parity is None:
        raise ValueError("Projection needs an elementary odd or even factor")
    M = len(K.out_vars)
    dimension = 1 << M
    if dimension * dimension * max(1, len(K.element.terms)) > config.budgets.MAX_PROJECTION_TERMS:
        raise BudgetExceededError("Projection oracle exceeds MAX_PROJECTION_TERMS")
    if parity is Parity.ODD:
        left, right = BasisVariant.G_BAR, BasisVariant.G_BAR_PRIME
    else:
        left, right = BasisVariant.G_PRIME, BasisVariant.G
    h = eta(M)
    generators = K.element.generators
    entries: Dict[Tuple[int, int], Fraction] = {}
    for a in range(dimension):
        projector = basis(a, K.out_vars, left, generators, sign_table, convention)
        partial = integrate_slice(projector * K.element, K.out_vars)
        if partial.is_zero():
            continue
        for b in range(dimension):
            closing = basis(b, K.in_vars, right, partial.generators, sign_table, convention)
            value = integrate_slice(partial * closing, K.in_vars).constant_term()
            if value:
                entries[(a, b)] = h * value
    return ExtractedOperator(entries, dimension, K.label)


def fix_sign_table(
    K: LocalFactor,
    convention: BasisConvention = BasisConvention.PARTICLE,
    strict: bool = False,
) -> Tuple[np.ndarray, SignGauge]:
    """Basis signs s_tau that turn the extracted operator into an all +1 permutation.

    Flipping s_tau conjugates S by diag(s), so the gauge of `sign_gauge` is the sign
    table. Cycles whose entries multiply to -1 cannot be fixed and are reported.
    """
    S = extract_step_operator(K, None, convention).to_step_operator(K.spec)
    if not S.is_permutation:
        raise ValueError("Sign fixing needs a signed permutation")
    result = sign_gauge(S)
    if not result.succeeded:
        logger.warning(
            "⚠️ Sign table for %s: %d obstructed cycles", K.label, len(result.obstructions)
        )
        if strict:
            raise SignObstructionError(
                f"No sign table makes {K.label} an all +1 permutation", result.obstructions
            )
    elif config.debug:
        logger.info("✅ Sign table fixed on %d cycles", result.n_cycles)
    return result.gauge, result


@dataclass
class ChainRuleReport:
    holds: bool
    product: ExtractedOperator
    expected: ExtractedOperator
    duality: int


def verify_chain_rule(
    K2: LocalFactor,
    K1: LocalFactor,
    sign_table: Optional[Sequence[int]] = None,
    convention: BasisConvention = BasisConvention.PARTICLE,
) -> ChainRuleReport:
    """Integrating the shared slice of K2 K1 multiplies the extracted operators."""
    K2, K1 = K2.integrated(), K1.integrated()
    M = len(K2.in_vars)
    duality = duality_factor(K2.pair[1], K1.pair[0], M)
    product = extract_step_operator(chain_factors(K2, K1), sign_table, convention)
    expected = (
        extract_step_operator(K2, sign_table, convention)
        @ extract_step_operator(K1, sign_table, convention)
    ).scaled(duality)
    if M % 2:
        # the shared variables pass the out-slice monomial of K2 on integration
        positions = list(range(len(K2.out_vars)))
        degrees = {
            tau: bin(basis_term(tau, positions, K2.pair[0], sign_table, convention)[0]).count("1")
            for tau in range(expected.dimension)
        }
        expected = ExtractedOperator(
            {(i, j): v * (-1) ** degrees[i] for (i, j), v in expected.entries.items()},
            expected.dimension,
        )
    return ChainRuleReport(product == expected, product, expected, duality)


@dataclass
class NormalizationReport:
    radius: float
    n_largest: int
    factor: LocalFactor


def normalize_factor(
    K: LocalFactor, sign_table: Optional[Sequence[int]] = None
) -> NormalizationReport:
    """Divide K by the largest |eigenvalue| of its operator; unique-jump factors are unchanged.

    Several eigenvalues of the same largest modulus are reported, not resolved.
    """
    radius, n_largest = extract_step_operator(K, sign_table).spectral_radius()
    if radius == 0:
        raise ValueError("Factor encodes the zero operator")
    scale = Fraction(radius).limit_denominator(10**6)
    factor = K
    if scale != 1:
        factor = LocalFactor(
            K.element.scaled(1 / scale),
            K.out_vars,
            K.in_vars,
            K.kind,
            K.pair,
            K.spec,
            K.half_steps,
            K.boundary,
            K.middle_vars,
            K.label,
        )
    if n_largest > 1 and config.debug:
        logger.info("🔍 %d eigenvalues share the largest modulus %.6f", n_largest, radius)
    return NormalizationReport(radius, n_largest, factor)


# Partition function ---------------------------------------------------------------


def normalized_identity(dimension: int) -> ExtractedOperator:
    return ExtractedOperator.identity(dimension).scaled(Fraction(1, dimension))


def inverse_boundary(S: ExtractedOperator) -> ExtractedOperator:
    """S^-1 / N for an orthogonal S, so that tr(S B) = 1."""
    transpose = S.transpose()
    if S @ transpose != ExtractedOperator.identity(S.dimension):
        raise ValueError("inverse_boundary needs an orthogonal step operator")
    return transpose.scaled(Fraction(1, S.dimension))


def pure_boundary(S: ExtractedOperator, tau: int) -> ExtractedOperator:
    """|q_in><q_f| with q_in = e_tau and q_f = S q_in."""
    return ExtractedOperator(
        {(tau, sigma): value for sigma, value in S.column(tau).items()}, S.dimension, "pure"
    )


def chain_operator(
    chain: Sequence[LocalFactor],
    sign_table: Optional[Sequence[int]] = None,
    convention: BasisConvention = BasisConvention.PARTICLE,
) -> Optional[ExtractedOperator]:
    """S(t_f - t_tilde) ... S(t_in) for factors listed in time order."""
    for earlier, later in zip(chain, chain[1:]):
        if earlier.parity is not None and earlier.parity == later.parity:
            raise ValueError("Elementary factors of a chain must alternate between odd and even t")
    product = None
    for K in chain:
        S = extract_step_operator(K, sign_table, convention)
        product = S if product is None else S @ product
    return product


def partition_function(
    chain: Sequence[LocalFactor],
    boundary: ExtractedOperator,
    sign_table: Optional[Sequence[int]] = None,
    convention: BasisConvention = BasisConvention.PARTICLE,
) -> Fraction:
    """Z = tr{S(t_f - t_tilde) ... S(t_in) B}."""
    product = chain_operator(chain, sign_table, convention)
    if product is None:
        product = ExtractedOperator.identity(boundary.dimension)
    if product.dimension != boundary.dimension:
        raise ValueError(
            f"Boundary of dimension {boundary.dimension} does not match the chain ({product.dimension})"
        )
    return (product @ boundary).trace()


# Coarse graining and continuum form ---------------------------------------------------


def coarse_grain_relabel(K_pair: LocalFactor) -> LocalFactor:
    """Rename the three slices of a factor pair to psi(t), bar(t) and psi(t-1)."""
    if not K_pair.middle_vars:
        raise ValueError("coarse_grain_relabel needs the pair product before integration")
    new_out, new_middle, new_in = COARSE_LABELS
    mapping = {}
    for names, label in ((K_pair.out_vars, new_out), (K_pair.middle_vars, new_middle), (K_pair.in_vars, new_in)):
        for name in names:
            _, x, species = parse_variable(name)
            mapping[name] = f"{label}:x{x}:{species.name}"
    return LocalFactor(
        K_pair.element.rename(mapping),
        [mapping[n] for n in K_pair.out_vars],
        [mapping[n] for n in K_pair.in_vars],
        K_pair.kind,
        K_pair.pair,
        K_pair.spec,
        K_pair.half_steps,
        K_pair.boundary,
        [mapping[n] for n in K_pair.middle_vars],
        "coarse " + K_pair.label,
    )


def exp_linear_residue(channels: Sequence[str] = CHANNELS) -> GrassmannElement:
    """exp{-(-E + Dbar)(1 + Dbar)} - (exp{E} - Dbar) at one site, E = sum psi'_gamma psi_gamma."""
    spec = LatticeSpec(1)
    primed, plain = _site_names("t1", 0), _site_names("t0", 0)
    generators = tuple(slice_variables(spec, "t1") + slice_variables(spec, "t0"))
    E = site_identity_exponent(generators, primed, plain)
    D = pair_exchange_term(generators, primed, plain, channels)
    one = GrassmannElement.one(generators)
    exponent = ((D - E) * (one + D)).scaled(-1)
    return gexp(exponent) - (gexp(E) - D)


THIRRING_GENERATORS = tuple(
    [f"bar:{s.name}" for s in Species]
    + [f"psi:{s.name}" for s in Species]
    + [f"dt:{s.name}" for s in Species]
    + [f"dx:{s.name}" for s in Species]
)


def gamma_matrices() -> Dict[str, object]:
    """Real two-dimensional Dirac matrices with metric diag(-1, 1)."""
    tau1 = sympy.Matrix([[0, 1], [1, 0]])
    tau2 = sympy.Matrix([[0, -sympy.I], [sympy.I, 0]])
    tau3 = sympy.Matrix([[1, 0], [0, -1]])
    upper = [-sympy.I * tau2, tau1]
    metric = sympy.diag(-1, 1)
    lower = [
        sum((metric[mu, nu] * upper[nu] for nu in range(2)), sympy.zeros(2, 2)) for mu in range(2)
    ]
    return {
        "tau1": tau1,
        "tau3": tau3,
        "upper": upper,
        "lower": lower,
        "metric": metric,
        "gamma_bar": -upper[0] * upper[1],
    }


def _same(a, b) -> bool:
    return (a - b).applyfunc(sympy.expand) == sympy.zeros(*a.shape)


def gamma_relations() -> Dict[str, bool]:
    g = gamma_matrices()
    upper, lower, metric, tau3 = g["upper"], g["lower"], g["metric"], g["tau3"]
    gamma_bar = g["gamma_bar"]
    eye = sympy.eye(2)
    plus, minus = (eye + gamma_bar) / 2, (eye - gamma_bar) / 2
    return {
        "clifford": all(
            _same(upper[m] * upper[n] + upper[n] * upper[m], 2 * metric[m, n] * eye)
            for m in range(2)
            for n in range(2)
        ),
        "gamma_bar_is_tau3": _same(gamma_bar, tau3),
        "gamma_bar_anticommutes": all(
            _same(gamma_bar * gm + gm * gamma_bar, sympy.zeros(2, 2)) for gm in upper
        ),
        "weyl_projectors": _same(plus * plus, plus)
        and _same(minus * minus, minus)
        and _same(plus * minus, sympy.zeros(2, 2)),
        "sigma_lower_is_half_tau3": _same((lower[0] * lower[1] - lower[1] * lower[0]) / 4, tau3 / 2),
        "sigma_upper_is_minus_half_tau3": _same(
            (upper[0] * upper[1] - upper[1] * upper[0]) / 4, -tau3 / 2
        ),
    }


def _rational(value) -> Fraction:
    r = sympy.Rational(sympy.nsimplify(value))
    return Fraction(int(r.p), int(r.q))


def spinor_bilinear(a: int, b: int, matrix, field: str = "psi") -> GrassmannElement:
    """psibar_a M psi_b with psi_b = (psi_Rb, psi_Lb) and psibar_a = (psibar_La, -psibar_Ra)."""
    bar = [(f"bar:L{a}", 1), (f"bar:R{a}", -1)]
    column = [f"{field}:R{b}", f"{field}:L{b}"]
    total = GrassmannElement.zero(THIRRING_GENERATORS)
    for i, (bar_name, bar_sign) in enumerate(bar):
        for j, name in enumerate(column):
            coefficient = bar_sign * _rational(matrix[i, j])
            if coefficient:
                total = total + GrassmannElement.monomial(
                    THIRRING_GENERATORS, [bar_name, name], coefficient
                )
    return total


def thirring_interaction() -> GrassmannElement:
    """-[1/2 (psibar_a g^mu psi_a)(psibar_b g_mu psi_b) + 1/2 eps^ab eps^cd (psibar_a g^mu psi_b)(psibar_c g_mu psi_d)]."""
    g = gamma_matrices()
    upper, lower = g["upper"], g["lower"]
    epsilon = {(1, 2): 1, (2, 1): -1}
    total = GrassmannElement.zero(THIRRING_GENERATORS)
    for mu in range(2):
        current_up = GrassmannElement.zero(THIRRING_GENERATORS)
        current_low = GrassmannElement.zero(THIRRING_GENERATORS)
        for a in (1, 2):
            current_up = current_up + spinor_bilinear(a, a, upper[mu])
            current_low = current_low + spinor_bilinear(a, a, lower[mu])
        total = total + (current_up * current_low).scaled(Fraction(1, 2))

        mixed_up = GrassmannElement.zero(THIRRING_GENERATORS)
        mixed_low = GrassmannElement.zero(THIRRING_GENERATORS)
        for (a, b), sign in epsilon.items():
            mixed_up = mixed_up + spinor_bilinear(a, b, upper[mu]).scaled(sign)
            mixed_low = mixed_low + spinor_bilinear(a, b, lower[mu]).scaled(sign)
        total = total + (mixed_up * mixed_low).scaled(Fraction(1, 2))
    return -total


def thirring_kinetic() -> GrassmannElement:
    """-psibar_a g^mu d_mu psi_a with d_0 psi -> dt, d_1 psi -> dx."""
    upper = gamma_matrices()["upper"]
    total = GrassmannElement.zero(THIRRING_GENERATORS)
    for a in (1, 2):
        for mu, field in enumerate(("dt", "dx")):
            total = total + spinor_bilinear(a, a, upper[mu], field)
    return -total


def continuum_d_bar(channels: Sequence[str] = CHANNELS) -> GrassmannElement:
    """Dbar of the coarse-grained action: psi' -> psi(t, x), psi -> psibar(t, x)."""
    primed = {s: f"psi:{s.name}" for s in Species}
    plain = {s: f"bar:{s.name}" for s in Species}
    return pair_exchange_term(THIRRING_GENERATORS, primed, plain, channels)


def continuum_kinetic() -> GrassmannElement:
    """psibar_R (d_t + d_x) psi_R + psibar_L (d_t - d_x) psi_L."""
    total = GrassmannElement.zero(THIRRING_GENERATORS)
    for s in Species:
        sign = 1 if s.mover == "R" else -1
        total = total + GrassmannElement.monomial(THIRRING_GENERATORS, [f"bar:{s.name}", f"dt:{s.name}"])
        total = total + GrassmannElement.monomial(
            THIRRING_GENERATORS, [f"bar:{s.name}", f"dx:{s.name}"], sign
        )
    return total


def continuum_action_density() -> GrassmannElement:
    return continuum_kinetic() + continuum_d_bar().scaled(2)


def continuum_prefactors() -> Dict[str, object]:
    """Prefactors of the kinetic and interaction terms after sum -> integral and psi -> sqrt(2 eps) psi_N."""
    eps = sympy.symbols("epsilon", positive=True)
    normalization = sympy.sqrt(2 * eps)
    measure = 1 / (2 * eps**2)
    return {
        "kinetic": sympy.simplify(measure * eps * normalization**2),
        "interaction": sympy.simplify(measure * normalization**4),
        "d_bar_scaling": sympy.simplify(normalization**4),
    }


@dataclass
class ThirringReport:
    interaction_residue: GrassmannElement
    kinetic_residue: GrassmannElement
    gamma_checks: Dict[str, bool]
    prefactors: Dict[str, object]

    @property
    def holds(self) -> bool:
        return (
            self.interaction_residue.is_zero()
            and self.kinetic_residue.is_zero()
            and all(self.gamma_checks.values())
            and self.prefactors["kinetic"] == 1
            and self.prefactors["interaction"] == 2
        )


def verify_thirring_form() -> ThirringReport:
    """Compare the spinor form of the continuum action with 2 Dbar and the chiral kinetic terms."""
    report = ThirringReport(
        interaction_residue=thirring_interaction() - continuum_d_bar().scaled(2),
        kinetic_residue=thirring_kinetic() - continuum_kinetic(),
        gamma_checks=gamma_relations(),
        prefactors=continuum_prefactors(),
    )
    if not report.holds:
        logger.warning("⚠️ Spinor form differs: %s", report.interaction_residue.to_text())
    elif config.debug:
        logger.info("✅ Spinor form of the continuum action verified")
    return report
