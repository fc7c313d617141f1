"""
Invariant suites behind the `verify` mode.

Every check returns a CheckResult; suites are plain lists of check functions
registered by name, so the manifest written next to the results lists exactly
what ran. A check that does not fit the configured budgets at the run's lattice
is reported as skipped, never as passed.
"""

import itertools
import logging
import time
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from tqdm import tqdm

from .automaton_utils import (
    Ensemble,
    automaton_step,
    conserved_charges_violations,
    ensemble_step,
    evolve_ensemble,
    interaction_step,
    inverse_step,
    is_bijection,
    random_ensemble,
    replay_events,
    step_table,
    sublattice_counts,
    trajectory,
)
from .config import config
from .errors import BudgetExceededError
from .evolution_utils import (
    WaveFunction,
    apply_step,
    build_step_operator,
    cycle_invariants,
    delta_h_scaling,
    expected_free_phase,
    free_spectrum,
    gauge_transform,
    hamiltonian_from_step,
    probabilities_of,
    schrodinger_evolve,
    sector_closure_violations,
    sign_gauge,
    translation_commutator,
    wavefunction_from_ensemble,
    wrap_phase,
)
from .factor_utils import (
    ExtractedOperator,
    FactorKind,
    Parity,
    chain_factors,
    chain_operator,
    exp_linear_residue,
    extract_step_operator,
    fix_sign_table,
    local_factor,
    verify_chain_rule,
    verify_thirring_form,
)
from .fock_utils import (
    anticommutator_errors,
    assemble_S_free_fock,
    build_H_lattice,
    build_S_int_fock,
    charge_operator_diagonal,
    full_basis,
    lattice_hamiltonian_matrices,
    sector_basis,
)
from .grassmann_utils import BasisVariant, GrassmannElement, eta, expansion_residue, overlap_matrix
from .lattice_utils import (
    BitConfig,
    Charge,
    LatticeSpec,
    Species,
    charge,
    config_from_index,
    index_of,
    translate,
)

logger = logging.getLogger("fermion_automaton")

# exhaustive checks run over at most this many configurations
SAMPLE_LIMIT = 4096
HAMILTONIAN_LIMIT = 4096
SCHRODINGER_STEPS = 20
SPLITTING_LAMBDAS = (1.0, 0.5, 0.25, 0.125)
SPLITTING_MIN_SLOPE = 1.8
GMUL_GENERATORS = 8
# out, middle and in slice of a combined factor
COMBINED_SLICES = 3


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""
    value: Optional[float] = None
    seconds: float = 0.0
    skipped: bool = False

    @property
    def status(self) -> str:
        if self.skipped:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        row = asdict(self)
        row.pop("seconds")
        row["status"] = self.status
        return row


def skipped(suite: str, name: str, reason: str) -> CheckResult:
    """A check that could not run within the budgets; it counts as neither pass nor failure."""
    return CheckResult(suite, name, False, f"{reason}; skipped", skipped=True)


Check = Callable[[LatticeSpec, int], CheckResult]
SUITES: Dict[str, List[Check]] = {}


def check(suite: str):
    """Register a check function under a suite name."""

    def register(func: Check) -> Check:
        SUITES.setdefault(suite, []).append(func)
        return func

    return register


def _sample(spec: LatticeSpec, seed: int) -> np.ndarray:
    if spec.dimension <= SAMPLE_LIMIT:
        return np.arange(spec.dimension)
    rng = np.random.default_rng(seed)
    return rng.integers(0, spec.dimension, size=SAMPLE_LIMIT)


# lattice --------------------------------------------------------------------------


@check("lattice")
def bit_roundtrip(spec: LatticeSpec, seed: int) -> CheckResult:
    bad = [
        int(tau)
        for tau in _sample(spec, seed)
        if index_of(config_from_index(int(tau), spec)) != tau
        or BitConfig.from_bits(spec, config_from_index(int(tau), spec).bits).index != tau
    ]
    return CheckResult("lattice", "bit_roundtrip", not bad, f"{len(bad)} mismatches")


@check("lattice")
def translation_cycle(spec: LatticeSpec, seed: int) -> CheckResult:
    bad = 0
    for tau in _sample(spec, seed):
        c = config_from_index(int(tau), spec)
        moved = c
        for _ in range(spec.M_x):
            moved = translate(moved, 1)
        if moved != c:
            bad += 1
    return CheckResult("lattice", "translation_cycle", bad == 0, f"{bad} mismatches")


# automaton ------------------------------------------------------------------------


@check("automaton")
def unique_jump_tables(spec: LatticeSpec, seed: int) -> CheckResult:
    if spec.dimension > config.budgets.MAX_TABLE_DIM:
        return skipped("automaton", "unique_jump_tables", "step tables exceed MAX_TABLE_DIM")
    failing = [w for w in ("full", "free", "int") if not is_bijection(step_table(spec, w))]
    return CheckResult("automaton", "unique_jump_tables", not failing, f"not bijective: {failing}")


@check("automaton")
def charges_conserved(spec: LatticeSpec, seed: int) -> CheckResult:
    bad = conserved_charges_violations(spec, _sample(spec, seed))
    return CheckResult("automaton", "charges_conserved", not bad, f"{len(bad)} violations")


@check("automaton")
def charge_sum(spec: LatticeSpec, seed: int) -> CheckResult:
    bad = 0
    for tau in _sample(spec, seed):
        c = BitConfig(spec, int(tau))
        if charge(c, Charge.N_TOTAL) != charge(c, Charge.N_R) + charge(c, Charge.N_L):
            bad += 1
    return CheckResult("automaton", "charge_sum", bad == 0, f"{bad} configurations")


@check("automaton")
def interaction_involution(spec: LatticeSpec, seed: int) -> CheckResult:
    bad = 0
    for tau in _sample(spec, seed):
        c = BitConfig(spec, int(tau))
        if interaction_step(interaction_step(c)) != c:
            bad += 1
    return CheckResult("automaton", "interaction_involution", bad == 0, f"{bad} configurations")


@check("automaton")
def inverse_roundtrip(spec: LatticeSpec, seed: int) -> CheckResult:
    bad = 0
    for tau in _sample(spec, seed):
        c = config_from_index(int(tau), spec)
        if inverse_step(automaton_step(c)) != c:
            bad += 1
    return CheckResult("automaton", "inverse_roundtrip", bad == 0, f"{bad} mismatches")


@check("automaton")
def extreme_points(spec: LatticeSpec, seed: int) -> CheckResult:
    """Point masses stay point masses and follow the deterministic trajectory."""
    n_steps = 2 * spec.M_x
    bad = 0
    for tau in _sample(spec, seed)[:64]:
        c = BitConfig(spec, int(tau))
        e = Ensemble.point_mass(c)
        for _ in range(n_steps):
            e, c = ensemble_step(e), automaton_step(c)
            if e.support != [c.index] or e.probability(c.index) != 1.0:
                bad += 1
                break
    return CheckResult("automaton", "extreme_points", bad == 0, f"{bad} point masses spread")


@check("automaton")
def event_replay(spec: LatticeSpec, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    start = BitConfig(spec, int(rng.integers(0, spec.dimension)))
    configs, events = trajectory(start, 4 * spec.M_x)
    logged = sorted((e.t, e.x) for e in events)
    replayed = sorted(replay_events(configs))
    return CheckResult("automaton", "event_replay", logged == replayed, f"{len(logged)} events")


@check("automaton")
def sublattice_decoupling(spec: LatticeSpec, seed: int) -> CheckResult:
    if spec.M_x % 2:
        return skipped("automaton", "sublattice_decoupling", "odd M_x couples the sublattices")
    rng = np.random.default_rng(seed)
    start = BitConfig(spec, int(rng.integers(0, spec.dimension)))
    configs, _ = trajectory(start, 2 * spec.M_x)
    counts = {sublattice_counts(c, t) for t, c in enumerate(configs)}
    return CheckResult("automaton", "sublattice_decoupling", len(counts) == 1, f"counts {sorted(counts)}")


# evolution ------------------------------------------------------------------------


@check("evolution")
def orthogonality(spec: LatticeSpec, seed: int) -> CheckResult:
    error = build_step_operator(spec, "full").unitarity_error()
    return CheckResult("evolution", "orthogonality", error == 0.0, value=error)


@check("evolution")
def alternation(spec: LatticeSpec, seed: int) -> CheckResult:
    composed = build_step_operator(spec, "int").compose(build_step_operator(spec, "free"))
    passed = composed.equals(build_step_operator(spec, "full"))
    return CheckResult("evolution", "alternation", passed, "S_int S_free against S_full")


@check("evolution")
def ensemble_equivalence(spec: LatticeSpec, seed: int) -> CheckResult:
    S = build_step_operator(spec, "full")
    e = random_ensemble(spec, min(8, spec.dimension), seed)
    wf = wavefunction_from_ensemble(e)
    worst = 0.0
    for later in evolve_ensemble(e, 2 * spec.M_x)[1:]:
        wf = apply_step(S, wf)
        worst = max(worst, later.max_deviation(probabilities_of(wf)))
    return CheckResult(
        "evolution", "ensemble_equivalence", worst <= config.tolerances.NORM_TOL, value=worst
    )


@check("evolution")
def hamiltonian_roundtrip(spec: LatticeSpec, seed: int) -> CheckResult:
    if spec.dimension > HAMILTONIAN_LIMIT:
        return skipped("evolution", "hamiltonian_roundtrip", f"dimension above {HAMILTONIAN_LIMIT}")
    S = build_step_operator(spec, "full")
    H = hamiltonian_from_step(S, spec.epsilon)
    error = float(np.max(np.abs(H.propagator(spec.epsilon) - S.to_dense())))
    return CheckResult(
        "evolution", "hamiltonian_roundtrip", error <= config.tolerances.ROUNDTRIP_TOL, value=error
    )


@check("evolution")
def schrodinger_steps(spec: LatticeSpec, seed: int) -> CheckResult:
    if spec.dimension > HAMILTONIAN_LIMIT:
        return skipped("evolution", "schrodinger_steps", f"dimension above {HAMILTONIAN_LIMIT}")
    S = build_step_operator(spec, "full")
    H = hamiltonian_from_step(S, spec.epsilon)
    rng = np.random.default_rng(seed)
    start = WaveFunction.delta(BitConfig(spec, int(rng.integers(0, spec.dimension))))
    wf, worst = start, 0.0
    for m in range(1, SCHRODINGER_STEPS + 1):
        wf = apply_step(S, wf)
        evolved = schrodinger_evolve(H, start, m * spec.epsilon)
        worst = max(worst, float(np.max(np.abs(evolved.q - wf.q))))
    return CheckResult(
        "evolution", "schrodinger_steps", worst <= config.tolerances.SCHRODINGER_TOL, value=worst
    )


@check("evolution")
def splitting_scaling(spec: LatticeSpec, seed: int) -> CheckResult:
    """Delta H minus its commutator term in the R1L1+R2L2 sector of four sites."""
    sector_spec = LatticeSpec(4)
    basis = sector_basis(sector_spec, [[Species.R1, Species.L1], [Species.R2, Species.L2]])
    H_free, H_int = build_H_lattice(sector_spec, basis)
    result = delta_h_scaling(H_free, H_int, sector_spec.epsilon, SPLITTING_LAMBDAS)
    return CheckResult(
        "evolution",
        "splitting_scaling",
        result["slope"] >= SPLITTING_MIN_SLOPE,
        f"errors {['%.3e' % e for e in result['errors']]}",
        value=result["slope"],
    )


@check("evolution")
def translation_invariance(spec: LatticeSpec, seed: int) -> CheckResult:
    error = translation_commutator(spec)
    return CheckResult("evolution", "translation_invariance", error == 0.0, value=error)


@check("evolution")
def free_phases(spec: LatticeSpec, seed: int) -> CheckResult:
    worst = 0.0
    for species in Species:
        for line in free_spectrum(spec, species):
            expected = expected_free_phase(species, line.k, spec.M_x)
            worst = max(worst, abs(wrap_phase(line.phase - expected)))
    return CheckResult("evolution", "free_phases", worst <= config.tolerances.SPECTRUM_TOL, value=worst)


@check("evolution")
def sector_closure(spec: LatticeSpec, seed: int) -> CheckResult:
    bad = sector_closure_violations(build_step_operator(spec, "full"), spec)
    return CheckResult("evolution", "sector_closure", not bad, f"{len(bad)} leaking sectors")


# fock -----------------------------------------------------------------------------


def _fock_fits(spec: LatticeSpec) -> bool:
    return spec.dimension <= config.budgets.MAX_DENSE_DIM and spec.M_x <= config.budgets.MAX_FOCK_SITES


@lru_cache(maxsize=4)
def _lattice_matrices(spec: LatticeSpec) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    return lattice_hamiltonian_matrices(spec)


@check("fock")
def canonical_anticommutators(spec: LatticeSpec, seed: int) -> CheckResult:
    if not _fock_fits(spec):
        return skipped("fock", "canonical_anticommutators", "Fock space too large")
    worst = max(anticommutator_errors(spec).values())
    return CheckResult(
        "fock", "canonical_anticommutators", worst <= config.tolerances.ANTICOMMUTATOR_TOL, value=worst
    )


@check("fock")
def interaction_operator(spec: LatticeSpec, seed: int) -> CheckResult:
    if not _fock_fits(spec):
        return skipped("fock", "interaction_operator", "Fock space too large")
    S = build_S_int_fock(spec, "real")
    if not S.is_permutation:
        return CheckResult("fock", "interaction_operator", False, "not a signed permutation")
    obstructed = [k for k, v in cycle_invariants(S).items() if v < 0]
    fixed = gauge_transform(S, sign_gauge(S).gauge)
    passed = not obstructed and fixed.equals(build_step_operator(spec, "int"))
    return CheckResult("fock", "interaction_operator", passed, f"{len(obstructed)} obstructed cycles")


@check("fock")
def transport_operator(spec: LatticeSpec, seed: int) -> CheckResult:
    if not _fock_fits(spec):
        return skipped("fock", "transport_operator", "Fock space too large")
    passed = assemble_S_free_fock(spec, "twisted").equals(build_step_operator(spec, "free"))
    return CheckResult("fock", "transport_operator", passed)


@check("fock")
def hamiltonian_charges(spec: LatticeSpec, seed: int) -> CheckResult:
    """[H_lattice, Q] = 0 for N_total, N_R, N_L and the color-1 parity."""
    if spec.dimension > HAMILTONIAN_LIMIT:
        return skipped("fock", "hamiltonian_charges", f"dimension above {HAMILTONIAN_LIMIT}")
    h_free, h_int = _lattice_matrices(spec)
    basis = full_basis(spec)
    diagonals = [
        charge_operator_diagonal(basis, spec.full_mask),
        charge_operator_diagonal(basis, spec.right_mask),
        charge_operator_diagonal(basis, spec.left_mask),
        charge_operator_diagonal(basis, spec.color1_mask, parity=True),
    ]
    H = (h_free + h_int).tocoo()
    worst = 0.0
    for diagonal in diagonals:
        # [H, Q]_ij = H_ij (q_j - q_i)
        jumps = np.abs(H.data * (diagonal[H.col] - diagonal[H.row]))
        worst = max(worst, float(np.max(jumps, initial=0.0)))
    return CheckResult("fock", "hamiltonian_charges", worst == 0.0, value=worst)


@check("fock")
def interaction_support(spec: LatticeSpec, seed: int) -> CheckResult:
    """H_int annihilates every configuration with fewer than two particles."""
    if spec.dimension > HAMILTONIAN_LIMIT:
        return skipped("fock", "interaction_support", f"dimension above {HAMILTONIAN_LIMIT}")
    _, h_int = _lattice_matrices(spec)
    entries = h_int.tocoo()
    columns = entries.col[entries.data != 0]
    few = [int(c) for c in columns if int(c).bit_count() < 2]
    return CheckResult("fock", "interaction_support", not few, f"{len(few)} entries")


# grassmann ------------------------------------------------------------------------


def _grassmann_fits(spec: LatticeSpec) -> bool:
    return COMBINED_SLICES * spec.n_bits <= config.budgets.MAX_GRASSMANN_GENERATORS


@check("grassmann")
def gmul_exhaustive(spec: LatticeSpec, seed: int) -> CheckResult:
    """Anticommutation and nilpotency for every generator pair of every algebra up to G = 8."""
    bad = 0
    for G in range(1, GMUL_GENERATORS + 1):
        names = [f"g{i}" for i in range(G)]
        generators = [GrassmannElement.generator(names, n) for n in names]
        for a, b in itertools.product(generators, repeat=2):
            if a * b != -(b * a):
                bad += 1
        bad += sum(1 for a in generators if not (a * a).is_zero())
    return CheckResult("grassmann", "gmul_exhaustive", bad == 0, f"{bad} violations")


@check("grassmann")
def basis_expansion(spec: LatticeSpec, seed: int) -> CheckResult:
    residues = {M: len(expansion_residue(M).terms) for M in (1, 2, 3, 4)}
    passed = not any(residues.values())
    return CheckResult("grassmann", "basis_expansion", passed, f"residual terms by M: {residues}")


@check("grassmann")
def basis_orthonormality(spec: LatticeSpec, seed: int) -> CheckResult:
    overlaps = overlap_matrix(4, BasisVariant.G_BAR, BasisVariant.G)
    passed = bool(np.all(overlaps == np.eye(16, dtype=int)))
    return CheckResult("grassmann", "basis_orthonormality", passed)


@check("grassmann")
def primed_duality(spec: LatticeSpec, seed: int) -> CheckResult:
    overlaps = overlap_matrix(4, BasisVariant.G_PRIME, BasisVariant.G_BAR_PRIME)
    passed = bool(np.all(overlaps == eta(4) * np.eye(16, dtype=int)))
    return CheckResult("grassmann", "primed_duality", passed, f"eta_4 = {eta(4)}")


@check("grassmann")
def exp_linear_identity(spec: LatticeSpec, seed: int) -> CheckResult:
    residue = exp_linear_residue()
    return CheckResult("grassmann", "exp_linear_identity", residue.is_zero())


@check("grassmann")
def free_factor_extraction(spec: LatticeSpec, seed: int) -> CheckResult:
    failing = []
    for M_x in (2, 3):
        lattice = LatticeSpec(M_x, spec.epsilon)
        extracted = extract_step_operator(local_factor(FactorKind.FREE, lattice))
        if extracted != ExtractedOperator.from_step_operator(build_step_operator(lattice, "free")):
            failing.append(M_x)
    return CheckResult("grassmann", "free_factor_extraction", not failing, f"failing M_x: {failing}")


@check("grassmann")
def combined_factor_extraction(spec: LatticeSpec, seed: int) -> CheckResult:
    if not _grassmann_fits(spec):
        return skipped("grassmann", "combined_factor_extraction", "too many Grassmann generators")
    K = local_factor(FactorKind.COMBINED, spec)
    table, gauge = fix_sign_table(K)
    extracted = extract_step_operator(K, table)
    expected = ExtractedOperator.from_step_operator(build_step_operator(spec, "full"))
    return CheckResult(
        "grassmann",
        "combined_factor_extraction",
        gauge.succeeded and extracted == expected,
        f"{len(gauge.obstructions)} obstructed cycles",
    )


@check("grassmann")
def chain_rule(spec: LatticeSpec, seed: int) -> CheckResult:
    if not _grassmann_fits(spec):
        return skipped("grassmann", "chain_rule", "too many Grassmann generators")
    interaction = local_factor(FactorKind.INTERACTION, spec, slices=("t2", "t1"))
    free = local_factor(FactorKind.FREE, spec, slices=("t1", "t0"))
    report = verify_chain_rule(interaction, free)
    return CheckResult("grassmann", "chain_rule", report.holds, f"duality {report.duality}")


@check("grassmann")
def chain_rule_four_steps(spec: LatticeSpec, seed: int) -> CheckResult:
    """Every adjacent pair of int, free, int, free on one site, and the integrated chain."""
    site = LatticeSpec(1, spec.epsilon)
    labels = ("t4", "t3", "t2", "t1", "t0")
    factors = [
        local_factor(
            FactorKind.INTERACTION if i % 2 == 0 else FactorKind.FREE,
            site,
            Parity.ODD if i % 2 == 0 else Parity.EVEN,
            (labels[i], labels[i + 1]),
        )
        for i in range(4)
    ]
    reports = [verify_chain_rule(a, b) for a, b in zip(factors, factors[1:])]
    pairs_hold = all(r.holds for r in reports)
    whole = chain_factors(chain_factors(factors[0], factors[1]), chain_factors(factors[2], factors[3]))
    duality = int(np.prod([r.duality for r in reports]))
    expected = chain_operator(factors[::-1]).scaled(duality)
    product_holds = extract_step_operator(whole) == expected
    return CheckResult(
        "grassmann",
        "chain_rule_four_steps",
        pairs_hold and product_holds,
        f"pairs {'hold' if pairs_hold else 'fail'}, product {'holds' if product_holds else 'fails'}",
    )


@check("grassmann")
def thirring_form(spec: LatticeSpec, seed: int) -> CheckResult:
    report = verify_thirring_form()
    return CheckResult("grassmann", "thirring_form", report.holds)


# Runner ---------------------------------------------------------------------------


def suite_manifest() -> Dict[str, List[str]]:
    return {suite: [f.__name__ for f in checks] for suite, checks in SUITES.items()}


def run_suite(
    spec: LatticeSpec, seed: int = 0, suites: Optional[Sequence[str]] = None
) -> List[CheckResult]:
    """Run the named suites (all by default); budget errors propagate, other errors fail the check."""
    names = list(suites or SUITES)
    unknown = set(names) - set(SUITES)
    if unknown:
        raise ValueError(f"Unknown suites {sorted(unknown)}")
    checks = [(name, f) for name in names for f in SUITES[name]]
    iterator = tqdm(checks, desc="Verifying") if config.debug else checks
    results = []
    for suite, func in iterator:
        started = time.perf_counter()
        try:
            result = func(spec, seed)
        except BudgetExceededError:
            raise
        except Exception as e:
            logger.warning("⚠️ Check %s.%s raised: %s", suite, func.__name__, e)
            result = CheckResult(suite, func.__name__, False, f"raised {type(e).__name__}: {e}")
        result.seconds = time.perf_counter() - started
        results.append(result)
        if config.debug:
            icon = {"PASS": "✅", "FAIL": "❌", "SKIP": "⏭️"}[result.status]
            logger.info("%s %s.%s", icon, suite, result.name)
    return results
