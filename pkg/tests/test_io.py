import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from matspec.io import CsvParseError, read_json, read_series_csv, write_json, write_series_csv


@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 4)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_series_round_trip_is_exact(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("io") / "s.csv"
    write_series_csv(p, values)
    assert np.array_equal(read_series_csv(p), values)


def test_header_detection(tmp_path):
    p = tmp_path / "h.csv"
    write_series_csv(p, np.array([[1.0, 2.0], [3.0, 4.0]]), header=True)
    assert p.read_text().splitlines()[0] == "z1,z2"
    assert read_series_csv(p).shape == (2, 2)
    assert read_series_csv(p, header=True).shape == (2, 2)
    q = tmp_path / "n.csv"
    write_series_csv(q, np.array([1.0, 2.0, 3.0]))
    assert read_series_csv(q).shape == (3, 1)


@pytest.mark.parametrize("text,row,col", [
    ("1,2\n3\n", 2, None),
    ("1,2\n3,abc\n", 2, 2),
    ("1,2\nnan,4\n", 2, 1),
    ("1,2\n\n3,4\n", 2, None),
    ("a,b\n", 2, None),
])
def test_parse_errors_carry_location(tmp_path, text, row, col):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(CsvParseError) as exc:
        read_series_csv(p)
    assert exc.value.row == row and exc.value.col == col
    assert f"row {row}" in str(exc.value)


def test_json_is_deterministic(tmp_path):
    p, q = tmp_path / "a.json", tmp_path / "b.json"
    write_json(p, {"b": 1, "a": [1.5, 2]})
    write_json(q, {"a": [1.5, 2], "b": 1})
    assert p.read_bytes() == q.read_bytes()
    assert p.read_text().endswith("\n")
    assert read_json(p) == {"a": [1.5, 2], "b": 1}
