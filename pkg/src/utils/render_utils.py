"""
Space-time diagrams of automaton trajectories.

Time runs upwards, space to the right. Color-1 particles (R1, L1) are thin red
lines, color-2 particles (R2, L2) thick green lines. Two movers of the same
direction on one site are drawn as a straight double line, and every exchange is
marked by a square at its (x, t).
"""

import io
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .automaton_utils import TrajectoryEvent  # noqa: E402
from .config import config  # noqa: E402
from .lattice_utils import BitConfig, Species  # noqa: E402

logger = logging.getLogger("fermion_automaton")

STYLE = {
    1: {"color": "#d62728", "linewidth": 1.0},
    2: {"color": "#2ca02c", "linewidth": 3.0},
}
DOUBLE_OFFSET = 0.12


@dataclass(frozen=True)
class Segment:
    x0: float
    t0: float
    x1: float
    t1: float
    species: Species


@dataclass
class TrajectoryDrawing:
    M_x: int
    n_steps: int
    segments: List[Segment] = field(default_factory=list)
    squares: List[tuple] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not self.segments and not self.squares


def _offset(config_: BitConfig, x: int, species: Species) -> float:
    partner = Species(species.value ^ 1)
    if config_.occupation(x, partner):
        return -DOUBLE_OFFSET if species.color == 1 else DOUBLE_OFFSET
    return 0.0


def trajectory_drawing(
    events: Sequence[TrajectoryEvent], configs: Sequence[BitConfig]
) -> TrajectoryDrawing:
    """Line segments and squares of a trajectory; segments crossing the wrap bond are split."""
    if not configs:
        return TrajectoryDrawing(0, 0)
    M_x = configs[0].spec.M_x
    drawing = TrajectoryDrawing(M_x, len(configs) - 1)
    for t in range(len(configs) - 1):
        current, following = configs[t], configs[t + 1]
        for x, species in current.particles():
            v = species.velocity
            target = (x + v) % M_x
            start = x + _offset(current, x, species)
            # the transported particle lands on `target` before any exchange
            end = float(target)
            if following.occupation(target, species):
                end += _offset(following, target, species)
            if 0 <= x + v < M_x:
                drawing.segments.append(Segment(start, t, end, t + 1, species))
            else:
                drawing.segments.append(Segment(start, t, x + v / 2, t + 0.5, species))
                drawing.segments.append(Segment(target - v / 2, t + 0.5, end, t + 1, species))
    drawing.squares = [(e.x, e.t) for e in events]
    return drawing


def render_svg(drawing: TrajectoryDrawing, title: Optional[str] = None) -> str:
    matplotlib.rcParams["svg.hashsalt"] = config.output.SVG_HASH_SALT
    width = max(3.0, 0.5 * drawing.M_x + 1)
    height = max(3.0, 0.35 * drawing.n_steps + 1)
    fig, ax = plt.subplots(figsize=(width, height))
    for segment in drawing.segments:
        style = STYLE[segment.species.color]
        ax.plot(
            [segment.x0, segment.x1],
            [segment.t0, segment.t1],
            color=style["color"],
            linewidth=style["linewidth"],
            solid_capstyle="butt",
        )
    if drawing.squares:
        xs, ts = zip(*drawing.squares)
        ax.scatter(xs, ts, marker="s", s=60, facecolors="none", edgecolors="black", zorder=3)
    ax.set_xlim(-0.5, max(drawing.M_x, 1) - 0.5)
    ax.set_ylim(0, max(drawing.n_steps, 1))
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    if title:
        ax.set_title(title)
    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buffer.getvalue()


def render_trajectory(
    events: Sequence[TrajectoryEvent],
    configs: Sequence[BitConfig],
    output_file: Optional[str] = None,
    title: Optional[str] = None,
) -> str:
    """SVG document of the trajectory, written to `output_file` when given."""
    drawing = trajectory_drawing(events, configs)
    svg = render_svg(drawing, title)
    if output_file:
        try:
            with open(output_file, "w", encoding="utf-8") as f:
                f.write(svg)
        except Exception as e:
            print(f"Error writing {output_file}: {str(e)}")
            raise
    if config.debug:
        logger.info("🖼️ Rendered %d segments, %d squares", len(drawing.segments), len(drawing.squares))
    return svg
