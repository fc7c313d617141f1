import pytest

from src.utils.automaton_utils import trajectory
from src.utils.lattice_utils import BitConfig, LatticeSpec, Species
from src.utils.render_utils import (
    DOUBLE_OFFSET,
    Segment,
    render_trajectory,
    trajectory_drawing,
)


@pytest.fixture
def spec():
    return LatticeSpec(4)


def test_empty_trajectory_renders():
    drawing = trajectory_drawing([], [])
    assert drawing.is_empty()
    assert "<svg" in render_trajectory([], [])


def test_single_right_mover(spec):
    configs, events = trajectory(BitConfig.from_particles(spec, [(0, Species.R1)]), 2)
    drawing = trajectory_drawing(events, configs)
    assert drawing.segments == [
        Segment(0, 0, 1, 1, Species.R1),
        Segment(1, 1, 2, 2, Species.R1),
    ]
    assert drawing.squares == []


def test_wrap_segment_is_split(spec):
    configs, events = trajectory(BitConfig.from_particles(spec, [(3, Species.R1)]), 1)
    drawing = trajectory_drawing(events, configs)
    assert drawing.segments == [
        Segment(3, 0, 3.5, 0.5, Species.R1),
        Segment(-0.5, 0.5, 0, 1, Species.R1),
    ]


def test_same_direction_pair_is_double_line(spec):
    start = BitConfig.from_particles(spec, [(0, Species.R1), (0, Species.R2)])
    configs, events = trajectory(start, 1)
    drawing = trajectory_drawing(events, configs)
    by_species = {s.species: s for s in drawing.segments}
    assert by_species[Species.R1].x0 == pytest.approx(-DOUBLE_OFFSET)
    assert by_species[Species.R2].x0 == pytest.approx(DOUBLE_OFFSET)
    assert by_species[Species.R1].x1 == pytest.approx(1 - DOUBLE_OFFSET)


def test_exchange_marked_by_square(spec):
    start = BitConfig.from_particles(spec, [(0, Species.R1), (2, Species.L1)])
    configs, events = trajectory(start, 1)
    assert [(e.t, e.x) for e in events] == [(1, 1)]
    assert trajectory_drawing(events, configs).squares == [(1, 1)]


def test_svg_is_deterministic(spec, output_dir):
    start = BitConfig.from_particles(spec, [(0, Species.R1), (2, Species.L1)])
    configs, events = trajectory(start, 4)
    first = render_trajectory(events, configs, title="crossing")
    second = render_trajectory(events, configs, title="crossing")
    assert first == second

    path = f"{output_dir}/crossing.svg"
    render_trajectory(events, configs, path)
    with open(path, encoding="utf-8") as f:
        assert f.read().startswith("<?xml")


if __name__ == "__main__":
    pytest.main([__file__])
