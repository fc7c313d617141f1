import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Tuple

import numpy as np

from .config import config
from .errors import BudgetExceededError
from .lattice_utils import (
    NIBBLE,
    BitConfig,
    Charge,
    LatticeSpec,
    Species,
    charge,
    local_nibble,
    nibble_value,
    rotate_sites,
    scatter,
    scatter_flags,
    transport,
    words_for,
)

logger = logging.getLogger("fermion_automaton")

SCATTER_PAIRS = {9: 6, 6: 9, 5: 10, 10: 5}
EVENT_KINDS = {9: "scatter_9_6", 6: "scatter_9_6", 5: "scatter_5_10", 10: "scatter_5_10"}


@dataclass(frozen=True)
class TrajectoryEvent:
    """A nontrivial local exchange at time step t (after the step) and site x."""

    t: int
    x: int
    kind: str
    before: Tuple[int, int, int, int]
    after: Tuple[int, int, int, int]

    def to_dict(self) -> dict:
        return {"t": self.t, "x": self.x, "kind": self.kind}


def free_step(config_: BitConfig) -> BitConfig:
    """Transport half-step: right movers one site right, left movers one site left."""
    return BitConfig(config_.spec, transport(config_.index, config_.spec))


def interaction_step(config_: BitConfig) -> BitConfig:
    """Scatter half-step: R1+L1 <-> R2+L2 and R1+L2 <-> R2+L1 on singly occupied pairs."""
    return BitConfig(config_.spec, scatter(config_.index, config_.spec))


def automaton_step(config_: BitConfig) -> BitConfig:
    return interaction_step(free_step(config_))


def inverse_step(config_: BitConfig) -> BitConfig:
    scattered_back = scatter(config_.index, config_.spec)
    return BitConfig(config_.spec, transport(scattered_back, config_.spec, direction=-1))


def scatter_sites(config_: BitConfig) -> List[int]:
    """Sites where the exchange acts on this configuration."""
    flags = scatter_flags(config_.index, config_.spec)
    return [x for x in range(config_.spec.M_x) if (flags >> (NIBBLE * x)) & 1]


def trajectory(
    config_: BitConfig, n_steps: int
) -> Tuple[List[BitConfig], List[TrajectoryEvent]]:
    """Iterate the automaton and log every exchange with its (t, x)."""
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")

    configs = [config_]
    events: List[TrajectoryEvent] = []
    current = config_
    for t in range(1, n_steps + 1):
        moved = free_step(current)
        current = interaction_step(moved)
        for x in scatter_sites(moved):
            before = local_nibble(moved, x)
            events.append(
                TrajectoryEvent(
                    t=t,
                    x=x,
                    kind=EVENT_KINDS[nibble_value(before)],
                    before=before,
                    after=local_nibble(current, x),
                )
            )
        configs.append(current)
    return configs, events


def replay_events(configs: List[BitConfig]) -> List[Tuple[int, int]]:
    """Brute-force (t, x) of exchanges from consecutive configurations, site by site."""
    points = []
    for t in range(1, len(configs)):
        spec = configs[t].spec
        previous = configs[t - 1]
        for x in range(spec.M_x):
            # occupation arriving at x from the transport half-step
            arriving = [
                previous.occupation((x - 1) % spec.M_x, s)
                if s.mover == "R"
                else previous.occupation((x + 1) % spec.M_x, s)
                for s in Species
            ]
            n_right = arriving[0] + arriving[1]
            n_left = arriving[2] + arriving[3]
            if n_right == 1 and n_left == 1:
                points.append((t, x))
    return points


def sublattice_counts(config_: BitConfig, t: int) -> Tuple[int, int]:
    """Particle counts on the even and odd (t + x) sublattices."""
    even = odd = 0
    for x, _ in config_.particles():
        if (t + x) % 2 == 0:
            even += 1
        else:
            odd += 1
    return even, odd


def step_table(spec: LatticeSpec, which: str = "full") -> np.ndarray:
    """Target configuration index for every source index, for the whole configuration space."""
    if spec.dimension > config.budgets.MAX_TABLE_DIM:
        raise BudgetExceededError(
            f"Step table of dimension {spec.dimension} exceeds MAX_TABLE_DIM "
            f"{config.budgets.MAX_TABLE_DIM}"
        )
    words = words_for(spec, np.arange(spec.dimension, dtype=np.uint64))
    if which == "free":
        targets = transport(words, spec)
    elif which == "int":
        targets = scatter(words, spec)
    elif which == "full":
        targets = scatter(transport(words, spec), spec)
    elif which == "translation":
        targets = rotate_sites(words, spec, 1 % spec.M_x)
    else:
        raise ValueError(f"Unknown step factor '{which}'")
    return targets.astype(np.int64)


@dataclass(frozen=True)
class Ensemble:
    """Probability distribution over configurations, stored on its support."""

    spec: LatticeSpec
    weights: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        cleaned = {int(tau): float(p) for tau, p in self.weights.items() if p != 0}
        for tau, p in cleaned.items():
            if p < 0:
                raise ValueError(f"Negative probability {p} for configuration {tau}")
            if not 0 <= tau < self.spec.dimension:
                raise ValueError(f"Configuration index {tau} out of range")
        total = sum(cleaned.values())
        if abs(total - 1.0) > config.tolerances.NORM_TOL:
            raise ValueError(f"Probabilities sum to {total}, expected 1")
        object.__setattr__(self, "weights", cleaned)

    @property
    def support(self) -> List[int]:
        return sorted(self.weights)

    @classmethod
    def point_mass(cls, config_: BitConfig) -> "Ensemble":
        return cls(config_.spec, {config_.index: 1.0})

    @classmethod
    def uniform(cls, spec: LatticeSpec) -> "Ensemble":
        if spec.dimension > config.budgets.MAX_DENSE_DIM:
            raise BudgetExceededError("Uniform ensemble exceeds MAX_DENSE_DIM")
        p = 1.0 / spec.dimension
        return cls(spec, {tau: p for tau in range(spec.dimension)})

    def probability(self, tau: int) -> float:
        return self.weights.get(int(tau), 0.0)

    def max_deviation(self, other: "Ensemble") -> float:
        keys = set(self.weights) | set(other.weights)
        return max((abs(self.probability(k) - other.probability(k)) for k in keys), default=0.0)


def ensemble_step(e: Ensemble) -> Ensemble:
    """Move every weight along the automaton; weights are relabeled, never mixed."""
    taus = list(e.weights)
    if e.spec.M_x <= config.budgets.MAX_BIT_KERNEL_SITES:
        words = words_for(e.spec, taus)
        targets = scatter(transport(words, e.spec), e.spec).tolist()
    else:
        targets = [scatter(transport(tau, e.spec), e.spec) for tau in taus]
    return Ensemble(e.spec, {int(t): e.weights[s] for s, t in zip(taus, targets)})


def evolve_ensemble(e: Ensemble, n_steps: int) -> List[Ensemble]:
    history = [e]
    for _ in range(n_steps):
        history.append(ensemble_step(history[-1]))
    return history


def expectation(e: Ensemble, obs: Callable[[BitConfig], float]) -> float:
    return sum(p * obs(BitConfig(e.spec, tau)) for tau, p in e.weights.items())


def charge_observable(which: Charge) -> Callable[[BitConfig], float]:
    return lambda c: float(charge(c, which))


def random_ensemble(spec: LatticeSpec, support_size: int, seed: int) -> Ensemble:
    """Random ensemble from numpy's PCG64 generator seeded with `seed`."""
    if support_size < 1:
        raise ValueError("support_size must be at least 1")
    rng = np.random.default_rng(seed)
    if spec.dimension <= config.budgets.MAX_TABLE_DIM:
        support = rng.choice(spec.dimension, size=min(support_size, spec.dimension), replace=False)
    else:
        n_words = -(-spec.n_bits // 32)
        support = set()
        while len(support) < support_size:
            words = rng.integers(0, 2**32, size=n_words, dtype=np.uint64)
            tau = sum(int(w) << (32 * i) for i, w in enumerate(words))
            support.add(tau & spec.full_mask)
        support = sorted(support)
    weights = rng.random(len(support)) + 1e-3
    weights = weights / weights.sum()
    # absorb rounding in the last entry so the sum is 1 to machine precision
    weights[-1] = 1.0 - weights[:-1].sum()
    if config.debug:
        logger.info("🎲 Random ensemble: %d configurations, seed %d", len(support), seed)
    return Ensemble(spec, {int(tau): float(p) for tau, p in zip(support, weights)})


def is_bijection(targets: np.ndarray) -> bool:
    return np.array_equal(np.sort(targets), np.arange(len(targets)))


def conserved_charges_violations(spec: LatticeSpec, taus: Iterable[int]) -> List[int]:
    """Configurations whose charges change under one automaton step."""
    bad = []
    for tau in taus:
        before = BitConfig(spec, int(tau))
        after = automaton_step(before)
        if any(charge(before, c) != charge(after, c) for c in Charge):
            bad.append(int(tau))
    return bad


def cycle_lengths(targets: np.ndarray) -> Dict[int, int]:
    """Histogram of cycle lengths of a permutation table."""
    seen = np.zeros(len(targets), dtype=bool)
    histogram: Dict[int, int] = {}
    for start in range(len(targets)):
        if seen[start]:
            continue
        length, node = 0, start
        while not seen[node]:
            seen[node] = True
            node = int(targets[node])
            length += 1
        histogram[length] = histogram.get(length, 0) + 1
    return histogram
