"""
Quantum-mechanical description of the automaton.

Wave functions are real unit vectors q with p_tau = q_tau**2, the step evolution
operator is a unique-jump matrix, and the Hamiltonian is its principal-branch
logarithm: S = exp(-i eps H). Signed permutations coming from the fermionic
constructions are analysed with `sign_gauge`, which decides whether a diagonal
change of basis signs turns every entry into +1 and reports the cycles where it
cannot.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .automaton_utils import Ensemble, step_table
from .config import config
from .errors import BudgetExceededError
from .lattice_utils import NIBBLE, BitConfig, Charge, LatticeSpec, Species, charge

logger = logging.getLogger("fermion_automaton")


class StepKind(str, Enum):
    FULL = "full"
    FREE = "free"
    INT = "int"
    SITE = "site"
    TRANSLATION = "translation"
    COMPOSITE = "composite"


@dataclass
class WaveFunction:
    """Real (or, after Schrodinger evolution, complex) unit vector over configurations."""

    spec: LatticeSpec
    q: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q)
        norm = float(np.sum(np.abs(self.q) ** 2))
        if abs(norm - 1.0) > config.tolerances.NORM_TOL * max(1, len(self.q)) ** 0.5:
            raise ValueError(f"Wave function norm {norm} differs from 1")

    @property
    def dimension(self) -> int:
        return len(self.q)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.q) ** 2

    @classmethod
    def delta(cls, config_: BitConfig, dimension: Optional[int] = None) -> "WaveFunction":
        n = dimension or _checked_dimension(config_.spec)
        q = np.zeros(n)
        q[config_.index] = 1.0
        return cls(config_.spec, q)


def _checked_dimension(spec: LatticeSpec) -> int:
    if spec.dimension > config.budgets.MAX_DENSE_DIM:
        raise BudgetExceededError(
            f"Dimension {spec.dimension} exceeds MAX_DENSE_DIM {config.budgets.MAX_DENSE_DIM}"
        )
    return spec.dimension


def wavefunction_from_ensemble(e: Ensemble) -> WaveFunction:
    q = np.zeros(_checked_dimension(e.spec))
    for tau, p in e.weights.items():
        q[tau] = np.sqrt(p)
    return WaveFunction(e.spec, q)


def probabilities_of(wf: WaveFunction, threshold: float = 0.0) -> Ensemble:
    p = wf.probabilities()
    support = np.nonzero(p > threshold)[0]
    weights = {int(tau): float(p[tau]) for tau in support}
    # renormalize away the rounding of sqrt/square
    total = sum(weights.values())
    return Ensemble(wf.spec, {tau: w / total for tau, w in weights.items()})


@dataclass
class StepOperator:
    """Step evolution operator as a signed permutation or a dense/sparse matrix.

    In permutation form the operator maps basis state rho to signs[rho] * e_{targets[rho]},
    i.e. S[targets[rho], rho] = signs[rho].
    """

    kind: StepKind
    targets: Optional[np.ndarray] = None
    signs: Optional[np.ndarray] = None
    matrix: Optional[object] = None
    spec: Optional[LatticeSpec] = None
    label: str = ""

    def __post_init__(self):
        if self.targets is None and self.matrix is None:
            raise ValueError("StepOperator needs either a permutation or a matrix")
        if self.targets is not None:
            self.targets = np.asarray(self.targets, dtype=np.int64)
            if self.signs is None:
                self.signs = np.ones(len(self.targets), dtype=np.int64)
            self.signs = np.asarray(self.signs)
            if len(self.signs) != len(self.targets):
                raise ValueError("signs and targets differ in length")
            if not np.array_equal(np.sort(self.targets), np.arange(len(self.targets))):
                raise ValueError("targets do not form a permutation")

    @property
    def is_permutation(self) -> bool:
        return self.targets is not None

    @property
    def dimension(self) -> int:
        if self.is_permutation:
            return len(self.targets)
        return self.matrix.shape[0]

    def to_sparse(self) -> sp.csr_matrix:
        if self.is_permutation:
            n = self.dimension
            return sp.csr_matrix((self.signs, (self.targets, np.arange(n))), shape=(n, n))
        return sp.csr_matrix(self.matrix)

    def to_dense(self) -> np.ndarray:
        if self.is_permutation:
            if self.dimension > config.budgets.MAX_DENSE_DIM:
                raise BudgetExceededError("Dense form exceeds MAX_DENSE_DIM")
            return self.to_sparse().toarray()
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return np.asarray(self.matrix)

    def compose(self, other: "StepOperator") -> "StepOperator":
        """self after other (matrix product self @ other)."""
        if self.dimension != other.dimension:
            raise ValueError("Dimension mismatch in composition")
        if self.is_permutation and other.is_permutation:
            return StepOperator(
                StepKind.COMPOSITE,
                targets=self.targets[other.targets],
                signs=self.signs[other.targets] * other.signs,
                spec=self.spec,
            )
        product = self.to_sparse() @ other.to_sparse()
        return StepOperator(StepKind.COMPOSITE, matrix=product, spec=self.spec)

    def inverse(self) -> "StepOperator":
        if not self.is_permutation:
            return StepOperator(self.kind, matrix=self.to_sparse().conj().T, spec=self.spec)
        targets = np.empty_like(self.targets)
        targets[self.targets] = np.arange(self.dimension)
        signs = np.empty_like(self.signs)
        signs[self.targets] = self.signs
        return StepOperator(self.kind, targets=targets, signs=signs, spec=self.spec)

    def equals(self, other: "StepOperator", tol: float = 0.0) -> bool:
        if self.is_permutation and other.is_permutation:
            return np.array_equal(self.targets, other.targets) and np.array_equal(
                self.signs, other.signs
            )
        difference = self.to_sparse() - other.to_sparse()
        return difference.nnz == 0 or float(np.max(np.abs(difference.data))) <= tol

    def support_equals(self, other: "StepOperator", tol: float = 1e-12) -> bool:
        """Same nonzero pattern with unit-modulus entries on both sides."""
        a, b = abs(self.to_sparse()), abs(other.to_sparse())
        difference = a - b
        return difference.nnz == 0 or float(np.max(np.abs(difference.data))) <= tol

    def as_signed_permutation(self, tol: float = 1e-12) -> Optional["StepOperator"]:
        """Permutation form if every column has a single real +-1 entry."""
        if self.is_permutation:
            return self
        matrix = sp.csc_matrix(self.matrix)
        matrix.eliminate_zeros()
        n = matrix.shape[0]
        targets = np.empty(n, dtype=np.int64)
        signs = np.empty(n, dtype=np.int64)
        for col in range(n):
            start, stop = matrix.indptr[col], matrix.indptr[col + 1]
            values = matrix.data[start:stop]
            keep = np.abs(values) > tol
            if keep.sum() != 1:
                return None
            value = values[keep][0]
            if abs(abs(value) - 1) > tol or abs(np.imag(value)) > tol:
                return None
            targets[col] = matrix.indices[start:stop][keep][0]
            signs[col] = 1 if np.real(value) > 0 else -1
        if not np.array_equal(np.sort(targets), np.arange(n)):
            return None
        return StepOperator(self.kind, targets=targets, signs=signs, spec=self.spec, label=self.label)

    def unitarity_error(self) -> float:
        if self.is_permutation:
            return 0.0
        m = self.to_sparse()
        residual = (m.conj().T @ m - sp.identity(m.shape[0], format="csr")).tocoo()
        return float(np.max(np.abs(residual.data))) if residual.nnz else 0.0


def build_step_operator(spec: LatticeSpec, which: str = "full") -> StepOperator:
    """Unique-jump operator of the automaton (or of one of its factors) in permutation form."""
    kind = StepKind(which)
    targets = step_table(spec, kind.value)
    if config.debug:
        logger.info("🔧 Built %s step operator, dimension %d", kind.value, len(targets))
    return StepOperator(kind, targets=targets, spec=spec)


def apply_step(S: StepOperator, wf: WaveFunction) -> WaveFunction:
    if S.dimension != wf.dimension:
        raise ValueError(f"Dimension mismatch: operator {S.dimension}, state {wf.dimension}")
    if S.is_permutation:
        q = np.zeros_like(wf.q, dtype=np.result_type(wf.q, S.signs))
        q[S.targets] = S.signs * wf.q
    else:
        q = S.to_sparse() @ wf.q
    return WaveFunction(wf.spec, q, wf.t + 1.0)


# Hamiltonians ---------------------------------------------------------------


@dataclass
class Hamiltonian:
    """Hermitian generator with exp(-i eps H) = S; may carry its eigendecomposition."""

    matrix: np.ndarray
    epsilon: float = 1.0
    eigenphases: Optional[np.ndarray] = None  # eps * eigenvalues, in (-pi, pi]
    eigenvectors: Optional[np.ndarray] = None
    branch_cut: List[int] = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        m = self.matrix
        if sp.issparse(m):
            m = m.toarray()
        self.matrix = np.asarray(m, dtype=complex)
        error = hermiticity_error(self.matrix)
        if error > max(config.tolerances.HERMITIAN_TOL, 1e-12) * max(
            1.0, float(np.max(np.abs(self.matrix), initial=0.0))
        ):
            raise ValueError(f"Hamiltonian is not Hermitian (error {error:.3e})")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def spectrum(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.eigenphases is not None and self.eigenvectors is not None:
            return self.eigenphases / self.epsilon, self.eigenvectors
        return np.linalg.eigh(self.matrix)

    def propagator(self, t: float) -> np.ndarray:
        """exp(-i t H)."""
        energies, vectors = self.spectrum()
        return (vectors * np.exp(-1j * t * energies)) @ vectors.conj().T


def hermiticity_error(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T), initial=0.0))


def principal_phases(eigenvalues: np.ndarray, tol: float) -> Tuple[np.ndarray, List[int]]:
    """Phases theta with lambda = exp(-i theta), theta in (-pi, pi]; -pi is moved to +pi."""
    theta = -np.angle(eigenvalues)
    at_cut = [int(i) for i in np.nonzero(np.abs(np.abs(theta) - np.pi) <= tol)[0]]
    theta[at_cut] = np.pi
    return theta, at_cut


def hamiltonian_from_step(S: StepOperator, epsilon: float = 1.0) -> Hamiltonian:
    """H = (i / eps) log S through the Schur form of the unitary S."""
    if S.dimension > config.budgets.MAX_DENSE_DIM:
        raise BudgetExceededError(f"Dense logarithm of dimension {S.dimension} exceeds budget")
    unitary = S.to_dense().astype(complex)
    error = float(
        np.max(np.abs(unitary.conj().T @ unitary - np.eye(len(unitary))), initial=0.0)
    )
    if error > config.tolerances.UNITARY_TOL:
        raise ValueError(f"Step operator is not unitary (error {error:.3e})")

    # a unitary matrix is normal, so its complex Schur form is diagonal
    triangular, vectors = scipy.linalg.schur(unitary, output="complex")
    eigenvalues = np.diag(triangular)
    theta, at_cut = principal_phases(eigenvalues, config.tolerances.BRANCH_CUT_TOL)
    if at_cut:
        logger.warning(
            "⚠️ %d eigenphases at the branch cut, assigned +pi", len(at_cut)
        )
    matrix = (vectors * (theta / epsilon)) @ vectors.conj().T
    matrix = (matrix + matrix.conj().T) / 2
    return Hamiltonian(
        matrix,
        epsilon=epsilon,
        eigenphases=theta,
        eigenvectors=vectors,
        branch_cut=at_cut,
        label=f"log {S.kind.value}",
    )


def schrodinger_evolve(H: Hamiltonian, wf: WaveFunction, t: float) -> WaveFunction:
    """q(t) = exp(-i t H) q(0); t in the units of H's epsilon."""
    if H.dimension != wf.dimension:
        raise ValueError(f"Dimension mismatch: Hamiltonian {H.dimension}, state {wf.dimension}")
    q = H.propagator(t) @ wf.q
    return WaveFunction(wf.spec, q, wf.t + t / H.epsilon)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def delta_H(H_free: Hamiltonian, H_int: Hamiltonian, epsilon: float) -> Hamiltonian:
    """Alternation error: (i/eps) log(exp(-i eps H_int) exp(-i eps H_free)) - H_free - H_int."""
    if H_free.dimension != H_int.dimension:
        raise ValueError("H_free and H_int act on different spaces")
    u_int = scipy.linalg.expm(-1j * epsilon * H_int.matrix)
    u_free = scipy.linalg.expm(-1j * epsilon * H_free.matrix)
    product = StepOperator(StepKind.COMPOSITE, matrix=u_int @ u_free)
    effective = hamiltonian_from_step(product, epsilon)
    if effective.branch_cut:
        logger.warning("⚠️ Alternation product has eigenphases at the branch cut")
    residual = effective.matrix - H_free.matrix - H_int.matrix
    return Hamiltonian((residual + residual.conj().T) / 2, epsilon=epsilon, label="delta H")


def delta_h_scaling(
    H_free: Hamiltonian, H_int: Hamiltonian, epsilon: float, lambdas: Sequence[float]
) -> Dict[str, object]:
    """Distance of Delta H(lambda eps) from its leading commutator term, with the fitted power."""
    leading = commutator(H_int.matrix, H_free.matrix)
    errors = []
    for lam in lambdas:
        step = lam * epsilon
        dh = delta_H(H_free, H_int, step).matrix
        errors.append(float(np.max(np.abs(dh - (-0.5j * step) * leading))))
    slope = float(np.polyfit(np.log(lambdas), np.log(errors), 1)[0])
    return {"lambdas": list(lambdas), "errors": errors, "slope": slope}


# Spectra and symmetries -------------------------------------------------------


@dataclass(frozen=True)
class SpectrumLine:
    k: int
    phase: float
    residual: float


def wrap_phase(phase: float) -> float:
    """Map a phase into (-pi, pi]."""
    wrapped = (phase + np.pi) % (2 * np.pi) - np.pi
    if abs(wrapped + np.pi) <= 1e-12:
        wrapped = np.pi
    return float(wrapped)


def one_particle_block(spec: LatticeSpec, species: Species) -> np.ndarray:
    """Matrix of S_free restricted to a single particle of one species, basis |x>."""
    table = step_table(spec, "free")
    block = np.zeros((spec.M_x, spec.M_x))
    for x in range(spec.M_x):
        target = int(table[1 << spec.bit(x, species)])
        y, _ = spec.locate(target.bit_length() - 1)
        block[y, x] = 1.0
    return block


def free_spectrum(spec: LatticeSpec, species: Species) -> List[SpectrumLine]:
    """Eigenphases of the one-particle transport block, labelled by the momentum index k."""
    block = one_particle_block(spec, species)
    sites = np.arange(spec.M_x)
    lines = []
    for k in range(spec.M_x):
        plane_wave = np.exp(2j * np.pi * k * sites / spec.M_x) / np.sqrt(spec.M_x)
        image = block @ plane_wave
        eigenvalue = np.vdot(plane_wave, image)
        residual = float(np.linalg.norm(image - eigenvalue * plane_wave))
        lines.append(SpectrumLine(k, wrap_phase(float(np.angle(eigenvalue))), residual))
    return lines


def expected_free_phase(species: Species, k: int, M_x: int) -> float:
    return wrap_phase(-species.velocity * 2 * np.pi * k / M_x)


def translation_operator(spec: LatticeSpec) -> StepOperator:
    return StepOperator(StepKind.TRANSLATION, targets=step_table(spec, "translation"), spec=spec)


def translation_commutator(spec: LatticeSpec, S: Optional[StepOperator] = None) -> float:
    """Max-norm of [S, T] for the one-site translation T."""
    S = S or build_step_operator(spec, "full")
    T = translation_operator(spec)
    st, ts = S.compose(T), T.compose(S)
    if st.is_permutation and ts.is_permutation:
        if np.array_equal(st.targets, ts.targets) and np.array_equal(st.signs, ts.signs):
            return 0.0
    difference = (st.to_sparse() - ts.to_sparse()).tocoo()
    return float(np.max(np.abs(difference.data))) if difference.nnz else 0.0


def charge_sectors(spec: LatticeSpec) -> Dict[Tuple[int, int, int], np.ndarray]:
    """Configuration indices grouped by (N_R, N_L, color-1 parity)."""
    sectors: Dict[Tuple[int, int, int], List[int]] = {}
    for tau in range(_checked_dimension(spec)):
        c = BitConfig(spec, tau)
        key = (charge(c, Charge.N_R), charge(c, Charge.N_L), charge(c, Charge.N_COLOR1_PARITY))
        sectors.setdefault(key, []).append(tau)
    return {key: np.array(indices, dtype=np.int64) for key, indices in sectors.items()}


def sector_block(S: StepOperator, indices: np.ndarray) -> np.ndarray:
    """Dense block of S on a set of basis states; raises if S leaks out of the set."""
    matrix = S.to_sparse().tocsc()
    block = matrix[indices][:, indices].toarray()
    leak = abs(matrix[:, indices]).sum() - abs(block).sum()
    if leak > 1e-12:
        raise ValueError("Operator does not preserve the sector")
    return block


def sector_closure_violations(S: StepOperator, spec: LatticeSpec) -> List[Tuple[int, int, int]]:
    """Sectors that S maps outside themselves."""
    bad = []
    for key, indices in charge_sectors(spec).items():
        try:
            sector_block(S, indices)
        except ValueError:
            bad.append(key)
    return bad


def sector_hamiltonians(
    S: StepOperator, spec: LatticeSpec, epsilon: float = 1.0
) -> Dict[Tuple[int, int, int], Hamiltonian]:
    """Principal-branch Hamiltonian of S computed block by block."""
    result = {}
    for key, indices in charge_sectors(spec).items():
        block = StepOperator(StepKind.COMPOSITE, matrix=sector_block(S, indices))
        result[key] = hamiltonian_from_step(block, epsilon)
    return result


# Sign gauge -----------------------------------------------------------------


@dataclass
class SignGauge:
    """Diagonal basis signs g with g S g = P (the unsigned permutation) where possible."""

    gauge: np.ndarray
    n_cycles: int
    obstructions: List[int]  # smallest basis index of every cycle with invariant -1
    closing_entries: List[Tuple[int, int]]  # (row, col) entries left at -1

    @property
    def succeeded(self) -> bool:
        return not self.obstructions


def sign_gauge(S: StepOperator) -> SignGauge:
    """Walk every cycle of a signed permutation, fixing basis signs from its smallest index."""
    S = S.as_signed_permutation()
    if S is None:
        raise ValueError("sign_gauge needs a signed permutation")
    n = S.dimension
    gauge = np.zeros(n, dtype=np.int64)
    obstructions, closing = [], []
    n_cycles = 0
    for start in range(n):
        if gauge[start] != 0:
            continue
        n_cycles += 1
        gauge[start] = 1
        node = start
        while True:
            target = int(S.targets[node])
            sign = int(S.signs[node])
            if target == start:
                if gauge[start] != sign * gauge[node]:
                    obstructions.append(start)
                    closing.append((start, node))
                break
            gauge[target] = sign * gauge[node]
            node = target
    if obstructions:
        logger.warning("⚠️ Sign gauge obstructed on %d of %d cycles", len(obstructions), n_cycles)
    return SignGauge(gauge, n_cycles, obstructions, closing)


def gauge_transform(S: StepOperator, gauge: np.ndarray) -> StepOperator:
    """diag(g) S diag(g)."""
    S = S.as_signed_permutation()
    if S is None:
        raise ValueError("gauge_transform needs a signed permutation")
    signs = gauge[S.targets] * S.signs * gauge
    return StepOperator(S.kind, targets=S.targets, signs=signs, spec=S.spec, label=S.label)


def cycle_invariants(S: StepOperator) -> Dict[int, int]:
    """Product of the entries along every cycle, keyed by the cycle's smallest index."""
    S = S.as_signed_permutation()
    if S is None:
        raise ValueError("cycle_invariants needs a signed permutation")
    seen = np.zeros(S.dimension, dtype=bool)
    invariants = {}
    for start in range(S.dimension):
        if seen[start]:
            continue
        product, node = 1, start
        while not seen[node]:
            seen[node] = True
            product *= int(S.signs[node])
            node = int(S.targets[node])
        invariants[start] = product
    return invariants


def nibble_gauge(spec: LatticeSpec, nibble: int) -> np.ndarray:
    """Basis signs (-1)^(number of sites whose local nibble equals `nibble`)."""
    taus = np.arange(_checked_dimension(spec), dtype=np.int64)
    count = np.zeros_like(taus)
    for x in range(spec.M_x):
        count += ((taus >> (NIBBLE * x)) & 0xF) == nibble
    return np.where(count % 2 == 0, 1, -1)
