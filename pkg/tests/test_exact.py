import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mnadec import exact

small_int = arrays(np.int64, st.tuples(st.integers(0, 7), st.integers(0, 7)),
                   elements=st.integers(-3, 3))
square_int = st.integers(0, 7).flatmap(
    lambda n: arrays(np.int64, (n, n), elements=st.integers(-4, 4)))


class TestAgainstSympy:
    @given(small_int)
    def test_rank(self, a):
        expect = sympy.Matrix(a.tolist()).rank() if a.size else 0
        assert exact.rank(a) == expect

    @given(square_int)
    def test_det(self, a):
        expect = int(sympy.Matrix(a.tolist()).det()) if a.size else 1
        assert exact.det(a) == expect


class TestBasics:
    def test_identity(self):
        assert exact.det(np.eye(5, dtype=int)) == 1
        assert exact.rank(np.eye(5, dtype=int)) == 5

    def test_row_swap_sign(self):
        assert exact.det([[0, 1], [1, 0]]) == -1

    def test_nullities(self):
        a = np.array([[1, -1, 0], [0, 1, -1]])
        assert exact.nullity(a) == 1
        assert exact.nullity_left(a) == 0
        assert exact.is_regular(a[:, :2])

    def test_large_entries_stay_exact(self):
        a = np.array([[10**6, 1], [1, 10**6]])
        assert exact.det(a) == 10**12 - 1

    def test_rejects_fractions(self):
        with pytest.raises(ValueError):
            exact.rank([[0.5, 1.0]])

    def test_non_square_det(self):
        with pytest.raises(ValueError):
            exact.det(np.ones((2, 3), dtype=int))
