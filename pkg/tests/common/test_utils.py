"""Tests for qpp.common.utils."""

import pandas as pd
import pytest

from qpp.common.utils import atomic_write_text, format_float, map_ordered, num_threads, write_csv


def test_format_float():
    """Test 17-digit formatting and the non-finite spellings."""
    assert format_float(0.25) == "0.25"
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(float("nan")) == "nan"
    assert format_float(float("inf")) == "inf"
    assert format_float(float("-inf")) == "-inf"


def test_map_ordered_keeps_input_order():
    """Test that results come back in input order."""
    items = list(range(20))
    assert map_ordered(lambda x: x * x, items, max_workers=4) == [x * x for x in items]
    assert map_ordered(lambda x: x + 1, [], max_workers=4) == []


def test_map_ordered_propagates_errors():
    """Test that worker exceptions reach the caller."""

    def fail(x):
        raise ValueError(f"bad item {x}")

    with pytest.raises(ValueError):
        map_ordered(fail, [1, 2, 3], max_workers=2)


def test_num_threads(monkeypatch):
    """Test the QPP_NUM_THREADS override."""
    monkeypatch.setenv("QPP_NUM_THREADS", "3")
    assert num_threads() == 3
    monkeypatch.setenv("QPP_NUM_THREADS", "0")
    assert num_threads() == 1
    monkeypatch.setenv("QPP_NUM_THREADS", "many")
    assert num_threads() >= 1


def test_atomic_write_text(tmp_path):
    """Test that files are written completely and parents are created."""
    path = atomic_write_text(tmp_path / "nested" / "out.txt", "a=1\n")
    assert path.read_text() == "a=1\n"
    atomic_write_text(path, "a=2\n")
    assert path.read_text() == "a=2\n"
    assert [p.name for p in path.parent.iterdir()] == ["out.txt"]


def test_write_csv(tmp_path):
    """Test CSV output with full precision."""
    frame = pd.DataFrame({"t": [0.0, 0.1], "vx": [1.0 / 3.0, 0.5]})
    path = write_csv(frame, tmp_path / "out.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t,vx"
    assert lines[1] == "0,0.33333333333333331"
    assert lines[2] == "0.10000000000000001,0.5"
