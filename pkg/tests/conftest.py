"""Pytest configuration file for the fermion automaton tests."""

import os
import sys

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from dataclasses import replace

import pytest
from src.utils.config import config
from src.utils.evolution_utils import build_step_operator
from src.utils.lattice_utils import LatticeSpec


@pytest.fixture
def site():
    """Single-site lattice."""
    return LatticeSpec(1)


@pytest.fixture
def pair():
    """Two-site lattice (256 configurations)."""
    return LatticeSpec(2)


@pytest.fixture
def triple():
    """Three-site lattice (4096 configurations)."""
    return LatticeSpec(3)


@pytest.fixture
def step_operators(pair):
    """Full, free and interaction step operators of the two-site lattice."""
    return {which: build_step_operator(pair, which) for which in ("full", "free", "int")}


@pytest.fixture
def output_dir(tmp_path):
    """Fresh directory for run artifacts."""
    path = tmp_path / "run"
    path.mkdir()
    return str(path)


@pytest.fixture(autouse=True)
def fresh_config():
    """Undo tolerance and budget overrides made by a test."""
    tolerances, budgets = replace(config.tolerances), replace(config.budgets)
    yield
    config.tolerances, config.budgets = tolerances, budgets
