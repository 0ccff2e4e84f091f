import re

import numpy as np
import pytest

from beastal.svg import emit_svg_curve


def test_single_series(tmp_path):
    path = emit_svg_curve([np.full(10, 0.5)], ["flat"], tmp_path / "a.svg")
    text = path.read_text()
    assert text.lstrip().startswith("<?xml") and "</svg>" in text
    assert "flat" in text


def test_two_series_with_legend_and_log(tmp_path):
    path = emit_svg_curve([np.logspace(0, -3, 20), np.logspace(0, -1, 20)], ["fast", "slow"],
                          tmp_path / "b.svg", logy=True, markers_every=5)
    text = path.read_text()
    assert "fast" in text and "slow" in text
    assert len(re.findall(r'id="line2d_', text)) >= 2


def test_output_is_byte_stable(tmp_path):
    a = emit_svg_curve([np.arange(5.0)], ["x"], tmp_path / "a.svg").read_bytes()
    b = emit_svg_curve([np.arange(5.0)], ["x"], tmp_path / "b.svg").read_bytes()
    assert a == b


def test_preconditions(tmp_path):
    with pytest.raises(ValueError):
        emit_svg_curve([], [], tmp_path / "c.svg")
    with pytest.raises(ValueError):
        emit_svg_curve([np.array([])], ["e"], tmp_path / "c.svg")
    with pytest.raises(ValueError):
        emit_svg_curve([np.ones(3)], ["a", "b"], tmp_path / "c.svg")
    with pytest.raises(OSError):
        emit_svg_curve([np.ones(3)], ["a"], tmp_path / "missing" / "c.svg")
