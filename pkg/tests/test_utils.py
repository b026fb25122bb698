"""
Unit tests for utility functions.
"""

import math

import pytest
from hypothesis import given, strategies as st

from vmspod.utils import (
    atomic_write_bytes,
    atomic_write_text,
    checksum,
    format_bytes,
    format_cell,
    format_float,
    format_seconds,
    parse_float_list,
    parse_int_list,
    read_csv,
    render_csv,
    write_csv,
)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_reparses_exactly(value):
    """Test that formatted floats parse back to the same number."""
    assert float(format_float(value)) == value


def test_format_float_non_finite():
    """Test the spelling of non-finite values."""
    assert format_float(math.nan) == 'nan'
    assert format_float(math.inf) == 'inf'
    assert format_float(-math.inf) == '-inf'


def test_format_cell():
    """Test CSV cell formatting."""
    assert format_cell(None) == ''
    assert format_cell(True) == 'true'
    assert format_cell(0.1) == '0.10000000000000001'
    assert format_cell(7) == '7'
    assert format_cell('pod-g') == 'pod-g'


def test_parse_lists():
    """Test comma-separated number lists."""
    assert parse_float_list('1e-2, 1e-4') == [0.01, 0.0001]
    assert parse_int_list('5, 10,20') == [5, 10, 20]
    assert parse_int_list('') == []
    with pytest.raises(ValueError):
        parse_int_list('5, ten')


def test_checksum():
    """Test that the checksum is a stable 64-bit value sensitive to every byte."""
    assert checksum(b'abc') == checksum(b'abc')
    assert checksum(b'abc') != checksum(b'abd')
    assert 0 <= checksum(b'') < 2 ** 64


def test_atomic_write_leaves_no_temporaries(tmp_path):
    """Test atomic writes create parents and replace the target in place."""
    target = tmp_path / 'nested' / 'data.bin'
    atomic_write_bytes(target, b'first')
    atomic_write_bytes(target, b'second')
    assert target.read_bytes() == b'second'
    assert [p.name for p in target.parent.iterdir()] == ['data.bin']

    text = tmp_path / 'note.txt'
    atomic_write_text(text, 'ε = 1e-4\n')
    assert text.read_text(encoding='utf-8') == 'ε = 1e-4\n'


def test_csv_round_trip(tmp_path):
    """Test that written tables read back with the header order and cell text."""
    rows = [{'r': 10, 'e': 0.125}, {'r': 20, 'e': None}]
    path = write_csv(tmp_path / 'table.csv', ('r', 'e'), rows)
    assert path.read_text().splitlines() == ['r,e', '10,0.125', '20,']
    assert read_csv(path) == [{'r': '10', 'e': '0.125'}, {'r': '20', 'e': ''}]


def test_render_csv_ignores_extra_keys():
    """Test that only the requested columns are rendered."""
    text = render_csv(('a',), [{'a': 1, 'b': 2}])
    assert text == 'a\n1\n'


def test_format_bytes():
    """Test byte size formatting."""
    assert format_bytes(512) == '512.0 B'
    assert format_bytes(1536) == '1.5 KB'
    assert format_bytes(5 * 1024 ** 3) == '5.0 GB'


def test_format_seconds():
    """Test wall-clock duration formatting."""
    assert format_seconds(12.34) == '12.3s'
    assert format_seconds(245) == '4m 05s'
    assert format_seconds(7380) == '2h 03m'
