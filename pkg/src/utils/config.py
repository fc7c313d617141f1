import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from .errors import ConfigurationError

# Load environment variables from .env file
load_dotenv()


@dataclass
class ToleranceConfig:
    """Numerical tolerances used by every check in the package."""

    NORM_TOL: float = 1e-12  # probability normalization and wave-function norm
    UNITARY_TOL: float = 1e-10
    HERMITIAN_TOL: float = 1e-12
    ANTICOMMUTATOR_TOL: float = 1e-14
    ROUNDTRIP_TOL: float = 1e-10  # exp(-i eps H) against the source step operator
    SCHRODINGER_TOL: float = 1e-9
    PERMUTATION_TOL: float = 1e-12  # Fock exponentials against permutations
    BRANCH_CUT_TOL: float = 1e-9  # eigenphases this close to -pi are moved to +pi
    SPECTRUM_TOL: float = 1e-12


@dataclass
class BudgetConfig:
    """Resource caps; exceeding one raises BudgetExceededError."""

    MAX_DENSE_DIM: int = int(os.getenv("FA_MAX_DIM", str(2**16)))
    MAX_TABLE_DIM: int = int(os.getenv("FA_MAX_TABLE_DIM", str(2**24)))
    MAX_FOCK_SITES: int = 4  # normal-ordered expansion of the transport exponent
    MAX_EXPANSION_TERMS: int = 200_000
    MAX_PROJECTION_TERMS: int = 2_000_000  # monomial pairs visited by one Grassmann product
    MAX_GRASSMANN_GENERATORS: int = 32
    MAX_SECTOR_DIM: int = 2**18
    MAX_BIT_KERNEL_SITES: int = 16  # numpy uint64 words hold 4 * 16 bits


@dataclass
class OutputConfig:
    """Where artifacts are written."""

    OUTPUT_DIR: str = os.getenv("FA_OUTPUT_DIR", "data/runs")
    SVG_HASH_SALT: str = "fermion-automaton"


class Config:
    """Main configuration class."""

    def __init__(self):
        # Numerical tolerances
        self.tolerances = ToleranceConfig()

        # Resource budgets
        self.budgets = BudgetConfig()

        # Artifact locations
        self.output = OutputConfig()

        # Debug mode
        self.debug: bool = os.getenv("DEBUG", "false").lower() == "true"

    def validate(self) -> bool:
        """Validate the configuration."""
        if any(getattr(self.tolerances, f.name) <= 0 for f in fields(self.tolerances)):
            return False
        if self.budgets.MAX_DENSE_DIM < 16 or self.budgets.MAX_SECTOR_DIM < 1:
            return False
        return True

    def override_tolerances(self, overrides: Dict[str, float]):
        """Apply tolerance overrides from a run configuration."""
        known = {f.name for f in fields(self.tolerances)}
        for key, value in overrides.items():
            name = key.upper()
            if name not in known:
                raise ConfigurationError(f"Unknown tolerance '{key}'")
            if not isinstance(value, (int, float)) or value <= 0:
                raise ConfigurationError(f"Tolerance '{key}' must be a positive number")
            setattr(self.tolerances, name, float(value))

    def set_max_dim(self, max_dim: int):
        if max_dim < 16:
            raise ConfigurationError("max_dim must be at least 16")
        self.budgets.MAX_DENSE_DIM = int(max_dim)


# Create a global config instance
config = Config()


SCHEMA_VERSION = 1
RUN_MODES = ("trajectory", "ensemble", "wavefunction", "verify", "spectrum", "trotter")


@dataclass
class TrotterSettings:
    """Packet parameters for the continuum-trend comparison."""

    M_x: int = 256
    widths: List[float] = field(default_factory=lambda: [2.0, 4.0, 8.0])
    n_steps: int = 4
    separation: int = 128
    # colliding pair: R1 left of L1, meeting after collision_separation / 2 steps
    collision_separation: int = 32
    collision_steps: int = 32


@dataclass
class EnsembleSettings:
    support: int = 8
    count: int = 1


@dataclass
class RunConfig:
    """One batch run of the simulator, loaded from a versioned JSON document."""

    mode: str = "verify"
    M_x: int = 2
    epsilon: float = 1.0
    steps: int = 8
    seed: int = 0
    input: Optional[str] = None
    output_dir: str = field(default_factory=lambda: config.output.OUTPUT_DIR)
    tolerances: Dict[str, float] = field(default_factory=dict)
    max_dim: Optional[int] = None
    initial_bits: Optional[str] = None
    ensemble: EnsembleSettings = field(default_factory=EnsembleSettings)
    trotter: TrotterSettings = field(default_factory=TrotterSettings)
    schema_version: int = SCHEMA_VERSION

    _TOP_LEVEL_KEYS = (
        "schema_version",
        "mode",
        "lattice",
        "steps",
        "seed",
        "input",
        "output_dir",
        "tolerances",
        "max_dim",
        "initial",
        "ensemble",
        "trotter",
    )

    def __post_init__(self):
        if self.mode not in RUN_MODES:
            raise ConfigurationError(
                f"Unknown mode '{self.mode}', expected one of {', '.join(RUN_MODES)}"
            )
        if not isinstance(self.M_x, int) or self.M_x < 1:
            raise ConfigurationError("lattice.M_x must be a positive integer")
        if not isinstance(self.epsilon, (int, float)) or self.epsilon <= 0:
            raise ConfigurationError("lattice.epsilon must be positive")
        if not isinstance(self.steps, int) or self.steps < 0:
            raise ConfigurationError("steps must be a non-negative integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"Unsupported schema_version {self.schema_version} (expected {SCHEMA_VERSION})"
            )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """Build a RunConfig from a parsed JSON document, rejecting unknown keys."""
        if not isinstance(data, dict):
            raise ConfigurationError("Configuration document must be a JSON object")
        unknown = set(data) - set(cls._TOP_LEVEL_KEYS)
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {sorted(unknown)}")

        lattice = data.get("lattice", {})
        _reject_unknown(lattice, ("M_x", "epsilon"), "lattice")
        initial = data.get("initial", {})
        _reject_unknown(initial, ("bits",), "initial")
        ensemble = data.get("ensemble", {})
        _reject_unknown(ensemble, ("support", "count"), "ensemble")
        trotter = data.get("trotter", {})
        _reject_unknown(trotter, [f.name for f in fields(TrotterSettings)], "trotter")

        kwargs: Dict[str, Any] = {
            "mode": data.get("mode", "verify"),
            "M_x": lattice.get("M_x", 2),
            "epsilon": lattice.get("epsilon", 1.0),
            "steps": data.get("steps", 8),
            "seed": data.get("seed", 0),
            "input": data.get("input"),
            "tolerances": dict(data.get("tolerances", {})),
            "max_dim": data.get("max_dim"),
            "initial_bits": initial.get("bits"),
            "ensemble": EnsembleSettings(**ensemble),
            "trotter": TrotterSettings(**trotter),
            "schema_version": data.get("schema_version", SCHEMA_VERSION),
        }
        if "output_dir" in data:
            kwargs["output_dir"] = data["output_dir"]
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Could not read configuration {path}: {e}") from e
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "mode": self.mode,
            "lattice": {"M_x": self.M_x, "epsilon": self.epsilon},
            "steps": self.steps,
            "seed": self.seed,
            "input": self.input,
            "output_dir": self.output_dir,
            "tolerances": dict(self.tolerances),
            "max_dim": self.max_dim,
            "initial": {"bits": self.initial_bits},
            "ensemble": asdict(self.ensemble),
            "trotter": asdict(self.trotter),
        }


def _reject_unknown(section: Any, allowed, name: str):
    if not isinstance(section, dict):
        raise ConfigurationError(f"'{name}' must be a JSON object")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigurationError(f"Unknown keys in '{name}': {sorted(unknown)}")
