import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from edham import csvio
from edham.errors import ConfigError

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.data(), hnp.array_shapes(min_dims=2, max_dims=2, max_side=5))
def test_round_trip(data, shape):
    M = np.empty(shape, dtype=complex)
    M.real = data.draw(hnp.arrays(np.float64, shape, elements=finite))
    M.imag = data.draw(hnp.arrays(np.float64, shape, elements=finite))
    assert np.array_equal(csvio.parse_matrix(csvio.format_matrix(M)), M)


def test_layout():
    assert csvio.format_matrix([[1, 2j]]) == "1,2\n1.0,0.0,0.0,2.0\n"


def test_flat_layout_accepted():
    M = csvio.parse_matrix("2,2\n1,0\n0,1\n0,-1\n2,0\n")
    assert np.array_equal(M, [[1, 1j], [-1j, 2]])


@pytest.mark.parametrize("text", ["", "2,2\n1,0\n", "x,y\n1,0\n", "2,2\n1,0,0,0\n0,0,a,0\n"])
def test_malformed(text):
    with pytest.raises(ConfigError):
        csvio.parse_matrix(text)


def test_file_io(tmp_path):
    p = tmp_path / "m.csv"
    csvio.write_matrix(p, np.eye(2))
    assert np.array_equal(csvio.read_matrix(p), np.eye(2))
    with pytest.raises(ConfigError):
        csvio.read_matrix(tmp_path / "missing.csv")
