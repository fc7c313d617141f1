"""
Fermionic ladder operators on the occupation basis and the operator forms of the
automaton.

Ladder operators carry the Jordan-Wigner string of the global bit order
b(x, gamma) = 4x + gamma: a_b removes bit b with sign (-1)^(number of occupied
bits below b). Per-site interaction blocks and per-species transport operators are
assembled into the full space as direct products, the way the automaton factorizes.

Lattice Hamiltonians are built on a `SectorBasis` (a set of configurations closed
under the dynamics) from explicit operator strings, so the same code serves the full
space at M_x <= 3 and two-particle sectors on long chains.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from tqdm import tqdm

from .config import config
from .errors import BudgetExceededError
from .evolution_utils import (
    Hamiltonian,
    StepKind,
    StepOperator,
    hamiltonian_from_step,
    one_particle_block,
)
from .lattice_utils import NIBBLE, LatticeSpec, Species, popcount, scatter, transport

logger = logging.getLogger("fermion_automaton")

INTERACTION_VARIANTS = ("literal", "real")
BOUNDARIES = ("periodic", "twisted")
GEOMETRIES = ("receding", "colliding")
# a Gaussian envelope of width w is negligible beyond this many widths
PACKET_REACH = 6


@dataclass
class FockOperator:
    """Sparse operator on the 2**n_modes occupation basis."""

    matrix: sp.csr_matrix
    label: str
    n_modes: int

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.matrix @ other.matrix, f"{self.label} {other.label}", self.n_modes)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.matrix + other.matrix, f"({self.label} + {other.label})", self.n_modes)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.matrix - other.matrix, f"({self.label} - {other.label})", self.n_modes)

    def scaled(self, factor: complex) -> "FockOperator":
        return FockOperator(self.matrix * factor, f"{factor} {self.label}", self.n_modes)

    def dagger(self) -> "FockOperator":
        return FockOperator(self.matrix.conj().T.tocsr(), f"({self.label})†", self.n_modes)

    def max_abs(self) -> float:
        m = self.matrix.tocoo()
        m.eliminate_zeros()
        return float(np.max(np.abs(m.data))) if m.nnz else 0.0


def _check_modes(n_modes: int):
    if (1 << n_modes) > config.budgets.MAX_DENSE_DIM:
        raise BudgetExceededError(
            f"Fock space of {n_modes} modes exceeds MAX_DENSE_DIM {config.budgets.MAX_DENSE_DIM}"
        )


def ladder_matrix(n_modes: int, mode: int, dagger: bool) -> sp.csr_matrix:
    """Integer matrix of a_mode (or its adjoint) with the Jordan-Wigner string."""
    _check_modes(n_modes)
    dim = 1 << n_modes
    states = np.arange(dim, dtype=np.int64)
    occupied = (states >> mode) & 1
    string = popcount((states & ((1 << mode) - 1)).astype(np.uint64)) % 2
    signs = 1 - 2 * string
    if dagger:
        sources = states[occupied == 0]
        targets = sources | (1 << mode)
    else:
        sources = states[occupied == 1]
        targets = sources ^ (1 << mode)
    return sp.csr_matrix((signs[sources], (targets, sources)), shape=(dim, dim), dtype=np.int64)


def annihilator(spec: LatticeSpec, x: int, species: Species) -> FockOperator:
    return FockOperator(
        ladder_matrix(spec.n_bits, spec.bit(x, species), dagger=False),
        f"a_{species.name}({x})",
        spec.n_bits,
    )


def creator(spec: LatticeSpec, x: int, species: Species) -> FockOperator:
    return FockOperator(
        ladder_matrix(spec.n_bits, spec.bit(x, species), dagger=True),
        f"a†_{species.name}({x})",
        spec.n_bits,
    )


def anticommutator(a: FockOperator, b: FockOperator) -> FockOperator:
    return FockOperator(a.matrix @ b.matrix + b.matrix @ a.matrix, f"{{{a.label}, {b.label}}}", a.n_modes)


def anticommutator_errors(spec: LatticeSpec) -> Dict[str, float]:
    """Largest deviation from the canonical anticommutation relations over all mode pairs."""
    modes = [(x, s) for x in range(spec.M_x) for s in Species]
    ann = {m: annihilator(spec, *m) for m in modes}
    cre = {m: creator(spec, *m) for m in modes}
    identity = sp.identity(spec.dimension, format="csr", dtype=np.int64)
    worst = {"aa": 0.0, "a†a†": 0.0, "a†a": 0.0, "nilpotent": 0.0}
    for m in modes:
        worst["nilpotent"] = max(
            worst["nilpotent"],
            FockOperator(ann[m].matrix @ ann[m].matrix, "", spec.n_bits).max_abs(),
            FockOperator(cre[m].matrix @ cre[m].matrix, "", spec.n_bits).max_abs(),
        )
        for n in modes:
            worst["aa"] = max(worst["aa"], anticommutator(ann[m], ann[n]).max_abs())
            worst["a†a†"] = max(worst["a†a†"], anticommutator(cre[m], cre[n]).max_abs())
            expected = identity if m == n else 0 * identity
            deviation = anticommutator(cre[m], ann[n]).matrix - expected
            worst["a†a"] = max(worst["a†a"], FockOperator(deviation, "", spec.n_bits).max_abs())
    return worst


# Interaction -----------------------------------------------------------------


def pair_flip(spec: LatticeSpec, x: int) -> FockOperator:
    """X(x) = [a†_R1 a_R2 - a†_R2 a_R1][a†_L1 a_L2 - a†_L2 a_L1]."""
    a = lambda s: annihilator(spec, x, s)  # noqa: E731
    c = lambda s: creator(spec, x, s)  # noqa: E731
    right = c(Species.R1) @ a(Species.R2) - c(Species.R2) @ a(Species.R1)
    left = c(Species.L1) @ a(Species.L2) - c(Species.L2) @ a(Species.L1)
    return FockOperator((right @ left).matrix, f"X({x})", spec.n_bits)


def interaction_exponent(spec: LatticeSpec, x: int, variant: str = "real") -> sp.csr_matrix:
    """(i pi/2) X for the literal form, (i pi/2)(X - X^2) for the real form."""
    if variant not in INTERACTION_VARIANTS:
        raise ValueError(f"Unknown interaction variant '{variant}'")
    X = pair_flip(spec, x).matrix.astype(complex)
    if variant == "literal":
        return (0.5j * np.pi) * X
    return (0.5j * np.pi) * (X - X @ X)


def local_interaction_block(variant: str = "real") -> np.ndarray:
    """16 x 16 exponential of the single-site exponent."""
    site = LatticeSpec(1)
    block = scipy.linalg.expm(interaction_exponent(site, 0, variant).toarray())
    if variant == "real":
        if np.max(np.abs(block.imag)) > config.tolerances.PERMUTATION_TOL:
            raise ValueError("Real interaction variant produced complex entries")
        block = block.real
    block[np.abs(block) < config.tolerances.PERMUTATION_TOL] = 0.0
    return block


def build_S_int_fock(spec: LatticeSpec, variant: str = "real") -> StepOperator:
    """Direct product over sites of the per-site exponential of the interaction exponent."""
    _check_modes(spec.n_bits)
    block = sp.csr_matrix(local_interaction_block(variant))
    result = sp.identity(1, format="csr", dtype=block.dtype)
    # configuration index = sum_x nibble_x 16^x, so site M_x - 1 is the leading factor
    for _ in range(spec.M_x):
        result = sp.kron(block, result, format="csr")
    operator = StepOperator(StepKind.INT, matrix=result, spec=spec, label=f"fock int ({variant})")
    if variant == "real":
        return operator.as_signed_permutation(config.tolerances.PERMUTATION_TOL) or operator
    return operator


def global_interaction(spec: LatticeSpec, variant: str = "real") -> sp.csr_matrix:
    """Product over sites of exp(exponent(x)) built from the global ladder operators."""
    _check_modes(spec.n_bits)
    result = sp.identity(spec.dimension, format="csr", dtype=complex)
    for x in range(spec.M_x):
        factor = scipy.linalg.expm(interaction_exponent(spec, x, variant).toarray())
        result = result @ sp.csr_matrix(factor)
    return result


# Transport -------------------------------------------------------------------


def transport_hopping(M_x: int, mover: str, wrap_sign: int = 1) -> np.ndarray:
    """Coefficients M = T - 1 of the exponent sum_x a†(x +- 1)[a(x) - a(x +- 1)]."""
    T = np.zeros((M_x, M_x), dtype=np.int64)
    for x in range(M_x):
        if mover == "R":
            y, wrapped = (x + 1) % M_x, x == M_x - 1
        else:
            y, wrapped = (x - 1) % M_x, x == 0
        T[y, x] += wrap_sign if wrapped else 1
    return T - np.eye(M_x, dtype=np.int64)


def normal_ordered_exponential(n_modes: int, hopping: np.ndarray) -> sp.csr_matrix:
    """N-ordered exp(sum_ij M_ij a†_i a_j), expanded term by term.

    The k-th order term of an ordered sequence of bilinears is
    a†_{i1} ... a†_{ik} a_{jk} ... a_{j1}; sequences repeating a creator or an
    annihilator vanish, so the series stops at k = n_modes. Coefficients are
    accumulated over the common denominator n_modes! to stay exact.
    """
    if n_modes > config.budgets.MAX_FOCK_SITES:
        raise BudgetExceededError(
            f"Normal-ordered expansion limited to {config.budgets.MAX_FOCK_SITES} modes"
        )
    bilinears = [
        (i, j, int(hopping[i, j]))
        for i in range(n_modes)
        for j in range(n_modes)
        if hopping[i, j] != 0
    ]
    n_terms = sum(len(bilinears) ** k for k in range(1, n_modes + 1))
    if n_terms > config.budgets.MAX_EXPANSION_TERMS:
        raise BudgetExceededError(f"Expansion needs {n_terms} terms")

    cre = [ladder_matrix(n_modes, i, True) for i in range(n_modes)]
    ann = [ladder_matrix(n_modes, j, False) for j in range(n_modes)]
    denominator = math.factorial(n_modes)
    dim = 1 << n_modes
    total = sp.identity(dim, format="csr", dtype=np.int64) * denominator
    for k in range(1, n_modes + 1):
        weight = denominator // math.factorial(k)
        for sequence in itertools.product(bilinears, repeat=k):
            creators = [i for i, _, _ in sequence]
            annihilators = [j for _, j, _ in sequence]
            if len(set(creators)) < k or len(set(annihilators)) < k:
                continue
            coefficient = weight * math.prod(c for _, _, c in sequence)
            term = sp.identity(dim, format="csr", dtype=np.int64)
            for i in creators:
                term = term @ cre[i]
            for j in reversed(annihilators):
                term = term @ ann[j]
            total = total + coefficient * term
    total = total.tocsr()
    total.eliminate_zeros()
    if np.any(total.data % denominator):
        raise ValueError("Normal-ordered expansion produced non-integer entries")
    result = total.copy()
    result.data = result.data // denominator
    return result


def _particle_counts(n_modes: int) -> np.ndarray:
    return popcount(np.arange(1 << n_modes, dtype=np.uint64))


def build_S_free_fock(
    spec: LatticeSpec, species: Species, boundary: str = "twisted"
) -> StepOperator:
    """One-species transport operator on the 2**M_x occupation space of that species.

    `periodic` uses the exponent as written. `twisted` weights the wrap bond by
    (-1)^(m-1) in the sector with m particles, which is what makes the result the
    plain shift permutation for every m.
    """
    if boundary not in BOUNDARIES:
        raise ValueError(f"Unknown boundary '{boundary}'")
    if spec.M_x > config.budgets.MAX_FOCK_SITES:
        raise BudgetExceededError(
            f"build_S_free_fock is limited to M_x <= {config.budgets.MAX_FOCK_SITES}"
        )
    M_x = spec.M_x
    plain = normal_ordered_exponential(M_x, transport_hopping(M_x, species.mover, 1))
    if boundary == "periodic":
        matrix = plain
    else:
        flipped = normal_ordered_exponential(M_x, transport_hopping(M_x, species.mover, -1))
        odd = sp.diags((_particle_counts(M_x) % 2 == 1).astype(np.int64))
        even = sp.diags((_particle_counts(M_x) % 2 == 0).astype(np.int64))
        matrix = (plain @ odd + flipped @ even).tocsr()
    operator = StepOperator(
        StepKind.FREE, matrix=matrix, spec=spec, label=f"fock free {species.name} ({boundary})"
    )
    return operator.as_signed_permutation() or operator


def species_shift_targets(M_x: int, mover: str) -> np.ndarray:
    """Shift permutation on the occupation space of one species (bit x = site x)."""
    states = np.arange(1 << M_x, dtype=np.int64)
    full = (1 << M_x) - 1
    if M_x == 1:
        return states
    if mover == "R":
        return ((states << 1) & full) | (states >> (M_x - 1))
    return (states >> 1) | ((states << (M_x - 1)) & full)


def _species_subindex(states: np.ndarray, spec: LatticeSpec, species: Species) -> np.ndarray:
    sub = np.zeros_like(states)
    for x in range(spec.M_x):
        sub |= ((states >> spec.bit(x, species)) & 1) << x
    return sub


def assemble_S_free_fock(spec: LatticeSpec, boundary: str = "twisted") -> StepOperator:
    """Direct product of the four one-species transport operators on the full space."""
    _check_modes(spec.n_bits)
    states = np.arange(spec.dimension, dtype=np.int64)
    targets = np.zeros_like(states)
    signs = np.ones_like(states)
    for species in Species:
        factor = build_S_free_fock(spec, species, boundary)
        if not factor.is_permutation:
            raise ValueError(f"Transport factor for {species.name} is not a signed permutation")
        sub = _species_subindex(states, spec, species)
        new_sub = factor.targets[sub]
        signs = signs * factor.signs[sub]
        for x in range(spec.M_x):
            targets |= ((new_sub >> x) & 1) << spec.bit(x, species)
    return StepOperator(StepKind.FREE, targets=targets, signs=signs, spec=spec, label="fock free")


# Sector bases and lattice Hamiltonians ---------------------------------------------


@dataclass
class SectorBasis:
    """Ordered set of configuration indices with a reverse lookup."""

    spec: LatticeSpec
    states: List[int]
    label: str = ""
    index: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.states) > config.budgets.MAX_SECTOR_DIM:
            raise BudgetExceededError(
                f"Sector of dimension {len(self.states)} exceeds MAX_SECTOR_DIM"
            )
        self.index = {state: i for i, state in enumerate(self.states)}

    def __len__(self) -> int:
        return len(self.states)


def full_basis(spec: LatticeSpec) -> SectorBasis:
    _check_modes(spec.n_bits)
    return SectorBasis(spec, list(range(spec.dimension)), "full")


def sector_basis(spec: LatticeSpec, groups: Sequence[Sequence[Species]], label: str = "") -> SectorBasis:
    """Union over groups of all placements of one particle of each listed species."""
    states = set()
    for group in groups:
        for positions in itertools.product(range(spec.M_x), repeat=len(group)):
            tau = 0
            for x, species in zip(positions, group):
                tau |= 1 << spec.bit(x, species)
            if tau.bit_count() == len(group):
                states.add(tau)
    return SectorBasis(spec, sorted(states), label)


# An operator string: coefficient and ((mode, is_creator), ...) written left to right.
Term = Tuple[complex, Tuple[Tuple[int, bool], ...]]


def _apply_string(state: int, ops: Tuple[Tuple[int, bool], ...]) -> Tuple[int, int]:
    sign = 1
    for mode, is_creator in reversed(ops):
        occupied = (state >> mode) & 1
        if occupied == is_creator:
            return 0, state
        if (state & ((1 << mode) - 1)).bit_count() % 2:
            sign = -sign
        state ^= 1 << mode
    return sign, state


def operator_matrix(basis: SectorBasis, terms: Sequence[Term]) -> sp.csr_matrix:
    """Matrix of a sum of operator strings on the sector; strings must end in an annihilator."""
    by_mode: Dict[int, List[Term]] = {}
    for coefficient, ops in terms:
        mode, is_creator = ops[-1]
        if is_creator:
            raise ValueError("Operator strings must end with an annihilator")
        by_mode.setdefault(mode, []).append((coefficient, ops))

    rows, cols, data = [], [], []
    iterator = basis.states
    if config.debug and len(basis) > 10_000:
        iterator = tqdm(basis.states, desc=f"Assembling {basis.label or 'sector'}")
    for col, state in enumerate(iterator):
        remaining = state
        while remaining:
            low = remaining & -remaining
            mode = low.bit_length() - 1
            remaining ^= low
            for coefficient, ops in by_mode.get(mode, ()):
                sign, target = _apply_string(state, ops)
                if sign == 0:
                    continue
                row = basis.index.get(target)
                if row is None:
                    raise ValueError(f"Operator leaves the sector '{basis.label}'")
                rows.append(row)
                cols.append(col)
                data.append(sign * coefficient)
    n = len(basis)
    matrix = sp.csr_matrix((np.array(data, dtype=complex), (rows, cols)), shape=(n, n))
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    return matrix


def _hop(spec: LatticeSpec, species: Species, to_site: int, from_site: int) -> Tuple[Tuple[int, bool], ...]:
    return (
        (spec.bit(to_site % spec.M_x, species), True),
        (spec.bit(from_site % spec.M_x, species), False),
    )


def free_terms(spec: LatticeSpec) -> List[Term]:
    """(i/2eps) sum_x [a†_L (a_L(x+1) - a_L(x-1)) - a†_R (a_R(x+1) - a_R(x-1))]."""
    c = 1j / (2 * spec.epsilon)
    terms: List[Term] = []
    for x in range(spec.M_x):
        for species in Species:
            sign = 1 if species.mover == "L" else -1
            terms.append((sign * c, _hop(spec, species, x, x + 1)))
            terms.append((-sign * c, _hop(spec, species, x, x - 1)))
    return terms


def one_body_terms(spec: LatticeSpec, species: Species, h: np.ndarray) -> List[Term]:
    """sum_{y,x} h[y, x] a†(y) a(x) for one species."""
    return [
        (complex(h[y, x]), _hop(spec, species, y, x))
        for y in range(spec.M_x)
        for x in range(spec.M_x)
        if abs(h[y, x]) > 1e-15
    ]


def exact_transport_hamiltonian(spec: LatticeSpec, species: Species) -> np.ndarray:
    """One-particle h with exp(-i eps h) equal to the shift (the log of the transport block)."""
    block = StepOperator(StepKind.FREE, matrix=one_particle_block(spec, species))
    return hamiltonian_from_step(block, spec.epsilon).matrix


def interaction_terms(spec: LatticeSpec) -> List[Term]:
    """-(pi/2eps) sum_x X(x), X expanded into its four quartic strings."""
    g = -np.pi / (2 * spec.epsilon)
    terms: List[Term] = []
    right = [(1, Species.R1, Species.R2), (-1, Species.R2, Species.R1)]
    left = [(1, Species.L1, Species.L2), (-1, Species.L2, Species.L1)]
    for x in range(spec.M_x):
        for sr, cr, ar in right:
            for sl, cl, al in left:
                ops = (
                    (spec.bit(x, cr), True),
                    (spec.bit(x, ar), False),
                    (spec.bit(x, cl), True),
                    (spec.bit(x, al), False),
                )
                terms.append((g * sr * sl, ops))
    return terms


def lattice_hamiltonian_matrices(
    spec: LatticeSpec, basis: Optional[SectorBasis] = None, derivative: str = "symmetric"
) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse H_free and H_int on a sector (full space by default)."""
    basis = basis or full_basis(spec)
    if derivative == "symmetric":
        kinetic = free_terms(spec)
    elif derivative == "exact":
        kinetic = []
        for species in Species:
            kinetic.extend(one_body_terms(spec, species, exact_transport_hamiltonian(spec, species)))
    else:
        raise ValueError(f"Unknown derivative '{derivative}'")
    if config.debug:
        logger.info("🔧 Lattice Hamiltonian on %d states (%s derivative)", len(basis), derivative)
    return operator_matrix(basis, kinetic), operator_matrix(basis, interaction_terms(spec))


def build_H_lattice(
    spec: LatticeSpec, basis: Optional[SectorBasis] = None, derivative: str = "symmetric"
) -> Tuple[Hamiltonian, Hamiltonian]:
    """Dense H_free and H_int for a space small enough for exact diagonalization."""
    h_free, h_int = lattice_hamiltonian_matrices(spec, basis, derivative)
    if h_free.shape[0] > config.budgets.MAX_DENSE_DIM:
        raise BudgetExceededError("Dense lattice Hamiltonian exceeds MAX_DENSE_DIM")
    return (
        Hamiltonian(h_free.toarray(), spec.epsilon, label="H_free"),
        Hamiltonian(h_int.toarray(), spec.epsilon, label="H_int"),
    )


def charge_operator_diagonal(basis: SectorBasis, mask: int, parity: bool = False) -> np.ndarray:
    counts = np.array([(state & mask).bit_count() for state in basis.states])
    return counts % 2 if parity else counts


# Continuum comparison ----------------------------------------------------------------


def sector_step_operator(basis: SectorBasis) -> StepOperator:
    """The automaton restricted to a closed sector, as a permutation of sector positions."""
    spec = basis.spec
    targets = np.empty(len(basis), dtype=np.int64)
    for i, state in enumerate(basis.states):
        image = scatter(transport(state, spec), spec)
        if image not in basis.index:
            raise ValueError(f"Automaton leaves the sector '{basis.label}'")
        targets[i] = basis.index[image]
    return StepOperator(StepKind.FULL, targets=targets, spec=spec, label=basis.label)


def _periodic_distance(x: int, center: float, M_x: int) -> float:
    d = abs(x - center) % M_x
    return min(d, M_x - d)


def gaussian_packet(
    basis: SectorBasis, particles: Sequence[Tuple[Species, float]], width: float
) -> np.ndarray:
    """Product of real Gaussian envelopes, one particle per listed species, zero elsewhere."""
    spec = basis.spec
    wanted = sorted(s.value for s, _ in particles)
    centers = {s: c for s, c in particles}
    q = np.zeros(len(basis))
    for i, state in enumerate(basis.states):
        content = [spec.locate(b) for b in range(spec.n_bits) if (state >> b) & 1]
        if sorted(s.value for _, s in content) != wanted:
            continue
        amplitude = 1.0
        for x, s in content:
            d = _periodic_distance(x, centers[s], spec.M_x)
            amplitude *= np.exp(-(d**2) / (4 * width**2))
        q[i] = amplitude
    return q / np.linalg.norm(q)


@dataclass
class TrotterReport:
    width: Optional[float]
    n_steps: int
    automaton_vs_split: float
    automaton_vs_continuum: float
    split_vs_continuum: float
    geometry: str = "receding"

    def to_dict(self) -> dict:
        return {
            "geometry": self.geometry,
            "width": self.width,
            "n_steps": self.n_steps,
            "automaton_vs_split": self.automaton_vs_split,
            "automaton_vs_continuum": self.automaton_vs_continuum,
            "split_vs_continuum": self.split_vs_continuum,
        }


def trotter_compare(
    spec: LatticeSpec,
    basis: SectorBasis,
    q0: np.ndarray,
    n_steps: int,
    width: Optional[float] = None,
    matrices: Optional[Tuple[sp.csr_matrix, sp.csr_matrix]] = None,
) -> TrotterReport:
    """Distances between automaton, alternating-exponential and joint-exponential evolutions."""
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    h_free, h_int = matrices or lattice_hamiltonian_matrices(spec, basis)
    eps = spec.epsilon
    automaton = sector_step_operator(basis)

    q_auto = np.asarray(q0, dtype=complex)
    q_split = q_auto.copy()
    q_joint = q_auto.copy()
    for _ in range(n_steps):
        moved = np.zeros_like(q_auto)
        moved[automaton.targets] = q_auto
        q_auto = moved
        q_split = expm_multiply(-1j * eps * h_free, q_split)
        q_split = expm_multiply(-1j * eps * h_int, q_split)
    if n_steps:
        q_joint = expm_multiply(-1j * n_steps * eps * (h_free + h_int), q_joint)

    return TrotterReport(
        width=width,
        n_steps=n_steps,
        automaton_vs_split=float(np.linalg.norm(q_auto - q_split)),
        automaton_vs_continuum=float(np.linalg.norm(q_auto - q_joint)),
        split_vs_continuum=float(np.linalg.norm(q_split - q_joint)),
    )


def _packet_centers(spec: LatticeSpec, widths: Sequence[float], n_steps: int, separation: int, geometry: str):
    if geometry not in GEOMETRIES:
        raise ValueError(f"Unknown geometry '{geometry}', expected one of {', '.join(GEOMETRIES)}")
    if not 0 < separation < spec.M_x:
        raise ValueError(f"separation must lie strictly between 0 and M_x = {spec.M_x}")
    left, right = spec.M_x / 2 - separation / 2, spec.M_x / 2 + separation / 2
    if geometry == "colliding":
        return left, right
    # receding packets close in across the wrap bond at two sites per step
    gap = min(separation, spec.M_x - separation) - 2 * n_steps
    if gap < PACKET_REACH * max(widths):
        raise ValueError(
            f"Receding packets of width {max(widths)} overlap within {n_steps} steps on {spec.M_x} sites"
        )
    return right, left


def continuum_trend(
    spec: LatticeSpec,
    widths: Sequence[float],
    n_steps: int,
    separation: int,
    geometry: str = "receding",
) -> List[TrotterReport]:
    """Automaton against continuum evolution of an R1/L1 packet pair, one report per width.

    Receding packets (R1 right of L1) never meet, so only H_free acts on them and the
    distance shrinks with the width. Colliding packets (R1 left of L1) meet after
    separation / 2 steps; there the automaton exchanges the pair outright while
    H_lattice rotates it, and the distance stays of order one for every width.
    """
    r1_center, l1_center = _packet_centers(spec, widths, n_steps, separation, geometry)
    basis = sector_basis(spec, [[Species.R1, Species.L1], [Species.R2, Species.L2]], "R1L1+R2L2")
    matrices = lattice_hamiltonian_matrices(spec, basis)
    reports = []
    for width in widths:
        q0 = gaussian_packet(basis, [(Species.R1, r1_center), (Species.L1, l1_center)], width)
        report = trotter_compare(spec, basis, q0, n_steps, width, matrices)
        report.geometry = geometry
        if config.debug:
            logger.info(
                "📈 %s width %.1f: automaton vs continuum %.3e",
                geometry,
                width,
                report.automaton_vs_continuum,
            )
        reports.append(report)
    return reports


def is_decreasing(reports: Sequence[TrotterReport]) -> bool:
    distances = [r.automaton_vs_continuum for r in reports]
    return all(b < a for a, b in zip(distances, distances[1:]))
