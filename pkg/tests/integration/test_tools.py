import os

import pandas as pd

from src.utils.io_utils import load_events_jsonl
from tools.render_figure import render_figure
from tools.scan_widths import scan_widths


def test_render_figure(output_dir):
    """Test that the figure's squares match the brute-force replay."""
    assert render_figure(16, 16, output_dir)
    assert os.path.exists(os.path.join(output_dir, "figure.svg"))
    events = load_events_jsonl(os.path.join(output_dir, "figure_events.jsonl"))
    assert events
    assert all(0 <= e["x"] < 16 for e in events)


def test_render_figure_from_bits(output_dir):
    bits = "1010" + "0000" * 3
    assert render_figure(4, 4, output_dir, bits)


def test_scan_widths_decreasing(output_dir):
    """Test that receding packets approach the continuum as they widen."""
    assert scan_widths(256, [2.0, 4.0, 8.0], 4, 128, output_dir)
    table = pd.read_csv(os.path.join(output_dir, "widths_receding.csv"))
    assert list(table["width"]) == [2.0, 4.0, 8.0]
    assert set(table["geometry"]) == {"receding"}


def test_scan_widths_colliding(output_dir):
    scan_widths(128, [2.0, 4.0], 32, 32, output_dir, "colliding")
    table = pd.read_csv(os.path.join(output_dir, "widths_colliding.csv"))
    assert (table["automaton_vs_continuum"] > 1.0).all()
