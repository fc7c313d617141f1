"""
Lattice geometry, species indexing and the bit encoding of configurations.

A configuration of the periodic chain with M_x sites is a word of 4 * M_x bits.
Bit b(x, gamma) = 4 * x + gamma holds the occupation number of species gamma at
site x, and the configuration index is tau = sum_b n_b 2**b. Every sign convention
in the fock and grassmann modules is stated relative to this order.

The word kernels at the bottom of the module operate on either a Python int (any
lattice size) or a numpy uint64 array of many configurations at once (M_x <= 16).
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .config import config

NIBBLE = 4

Words = Union[int, np.ndarray]


class Species(Enum):
    """The four fermion species; the value is the canonical index gamma."""

    R1 = 0
    R2 = 1
    L1 = 2
    L2 = 3

    @property
    def mover(self) -> str:
        return "R" if self.value < 2 else "L"

    @property
    def color(self) -> int:
        return 1 + self.value % 2

    @property
    def velocity(self) -> int:
        return 1 if self.mover == "R" else -1

    @classmethod
    def from_label(cls, label: str) -> "Species":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"Unknown species label '{label}'")


class Charge(str, Enum):
    N_TOTAL = "N_total"
    N_R = "N_R"
    N_L = "N_L"
    N_COLOR1_PARITY = "N_color1_parity"


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic chain of M_x sites with spacing epsilon (velocity 1, so time step = epsilon)."""

    M_x: int
    epsilon: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self):
        if not isinstance(self.M_x, (int, np.integer)) or self.M_x < 1:
            raise ValueError(f"M_x must be a positive integer, got {self.M_x!r}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.boundary != "periodic":
            raise ValueError("Only periodic boundary conditions are supported")

    @property
    def n_bits(self) -> int:
        return NIBBLE * self.M_x

    @property
    def dimension(self) -> int:
        return 1 << self.n_bits

    @property
    def t_tilde(self) -> float:
        """Half-step between neighbouring time slices of the functional integral."""
        return self.epsilon / 2

    def site(self, x: int) -> int:
        return x % self.M_x

    def bit(self, x: int, species: Species) -> int:
        if not 0 <= x < self.M_x:
            raise ValueError(f"Site {x} outside 0..{self.M_x - 1}")
        return NIBBLE * x + species.value

    def locate(self, b: int) -> Tuple[int, Species]:
        """Inverse of bit(): the (site, species) owning bit b."""
        if not 0 <= b < self.n_bits:
            raise ValueError(f"Bit {b} outside 0..{self.n_bits - 1}")
        return b // NIBBLE, Species(b % NIBBLE)

    @cached_property
    def full_mask(self) -> int:
        return self.dimension - 1

    def species_mask(self, species: Species) -> int:
        return sum(1 << (NIBBLE * x + species.value) for x in range(self.M_x))

    @cached_property
    def right_mask(self) -> int:
        return self.species_mask(Species.R1) | self.species_mask(Species.R2)

    @cached_property
    def left_mask(self) -> int:
        return self.species_mask(Species.L1) | self.species_mask(Species.L2)

    @cached_property
    def color1_mask(self) -> int:
        return self.species_mask(Species.R1) | self.species_mask(Species.L1)

    @cached_property
    def site_floor_mask(self) -> int:
        """Bit 4x of every site, used to carry one flag per site."""
        return self.species_mask(Species.R1)


@dataclass(frozen=True)
class BitConfig:
    """One configuration of the automaton, stored as its configuration index."""

    spec: LatticeSpec
    index: int

    def __post_init__(self):
        if not 0 <= self.index < self.spec.dimension:
            raise ValueError(
                f"Configuration index {self.index} outside 0..{self.spec.dimension - 1}"
            )

    @property
    def bits(self) -> str:
        """0/1 string of length 4 * M_x, bit 0 first."""
        return "".join("1" if (self.index >> b) & 1 else "0" for b in range(self.spec.n_bits))

    def occupation(self, x: int, species: Species) -> int:
        return (self.index >> self.spec.bit(x, species)) & 1

    def particles(self) -> List[Tuple[int, Species]]:
        return [
            self.spec.locate(b) for b in range(self.spec.n_bits) if (self.index >> b) & 1
        ]

    @classmethod
    def from_bits(cls, spec: LatticeSpec, bits: str) -> "BitConfig":
        if len(bits) != spec.n_bits or set(bits) - {"0", "1"}:
            raise ValueError(f"Expected a 0/1 string of length {spec.n_bits}")
        return cls(spec, sum(1 << b for b, ch in enumerate(bits) if ch == "1"))

    @classmethod
    def from_particles(
        cls, spec: LatticeSpec, particles: Iterable[Tuple[int, Species]]
    ) -> "BitConfig":
        index = 0
        for x, species in particles:
            index |= 1 << spec.bit(spec.site(x), species)
        return cls(spec, index)

    @classmethod
    def empty(cls, spec: LatticeSpec) -> "BitConfig":
        return cls(spec, 0)

    def __str__(self) -> str:
        return " ".join(
            "".join(str(n) for n in local_nibble(self, x)) for x in range(self.spec.M_x)
        )


def config_from_index(tau: int, spec: LatticeSpec) -> BitConfig:
    return BitConfig(spec, int(tau))


def index_of(config: BitConfig) -> int:
    return config.index


def local_nibble(config: BitConfig, x: int) -> Tuple[int, int, int, int]:
    """Occupation numbers (n_R1, n_R2, n_L1, n_L2) at site x."""
    if not 0 <= x < config.spec.M_x:
        raise ValueError(f"Site {x} outside 0..{config.spec.M_x - 1}")
    value = (config.index >> (NIBBLE * x)) & 0xF
    return tuple((value >> g) & 1 for g in range(NIBBLE))


def nibble_value(nibble: Sequence[int]) -> int:
    return sum(int(n) << g for g, n in enumerate(nibble))


def charge(config: BitConfig, which: Union[Charge, str]) -> int:
    which = Charge(which)
    spec, tau = config.spec, config.index
    if which is Charge.N_TOTAL:
        return tau.bit_count()
    if which is Charge.N_R:
        return (tau & spec.right_mask).bit_count()
    if which is Charge.N_L:
        return (tau & spec.left_mask).bit_count()
    return (tau & spec.color1_mask).bit_count() % 2


def charges(config: BitConfig) -> Tuple[int, int, int, int]:
    return tuple(charge(config, c) for c in Charge)


def translate(config: BitConfig, shift: int = 1) -> BitConfig:
    """Relabel sites x -> x + shift (mod M_x)."""
    spec = config.spec
    return BitConfig(spec, rotate_sites(config.index, spec, shift % spec.M_x))


# Word kernels -------------------------------------------------------------


def words_for(spec: LatticeSpec, indices) -> np.ndarray:
    """Pack configuration indices into uint64 words for the vectorized kernels."""
    if spec.M_x > config.budgets.MAX_BIT_KERNEL_SITES:
        raise ValueError(
            f"Vectorized kernels support M_x <= {config.budgets.MAX_BIT_KERNEL_SITES}"
        )
    return np.asarray(indices, dtype=np.uint64)


def _const(value: int, words: Words):
    return np.uint64(value) if isinstance(words, np.ndarray) else value


def _shl(words: Words, n: int) -> Words:
    return words << _const(n, words)


def _shr(words: Words, n: int) -> Words:
    return words >> _const(n, words)


def rotate_sites(words: Words, spec: LatticeSpec, shift: int) -> Words:
    """Move every nibble from site x to site x + shift (0 <= shift < M_x)."""
    if shift == 0:
        return words
    full = _const(spec.full_mask, words)
    width = NIBBLE * shift
    return (_shl(words, width) & full) | _shr(words, spec.n_bits - width)


def transport(words: Words, spec: LatticeSpec, direction: int = 1) -> Words:
    """Right movers hop by +direction sites, left movers by -direction (periodic)."""
    right = words & _const(spec.right_mask, words)
    left = words & _const(spec.left_mask, words)
    forward = 1 % spec.M_x
    backward = (spec.M_x - 1) % spec.M_x
    if direction == 1:
        return rotate_sites(right, spec, forward) | rotate_sites(left, spec, backward)
    if direction == -1:
        return rotate_sites(right, spec, backward) | rotate_sites(left, spec, forward)
    raise ValueError("direction must be +1 or -1")


def scatter_flags(words: Words, spec: LatticeSpec) -> Words:
    """Bit 4x set iff site x holds exactly one right mover and exactly one left mover."""
    floor = _const(spec.site_floor_mask, words)
    right_one = (words ^ _shr(words, 1)) & floor
    left_one = (_shr(words, 2) ^ _shr(words, 3)) & floor
    return right_one & left_one


def scatter(words: Words, spec: LatticeSpec) -> Words:
    """Apply the local exchange 9 <-> 6, 5 <-> 10 at every site at once."""
    flags = scatter_flags(words, spec)
    flip = flags | _shl(flags, 1) | _shl(flags, 2) | _shl(flags, 3)
    return words ^ flip


def popcount(words: np.ndarray) -> np.ndarray:
    """Number of set bits of each uint64 word."""
    as_bytes = np.ascontiguousarray(words, dtype=np.uint64).view(np.uint8)
    return np.unpackbits(as_bytes.reshape(-1, 8), axis=1).sum(axis=1).astype(np.int64)
