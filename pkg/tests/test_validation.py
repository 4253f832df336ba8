import numpy as np
import pytest

from utils.errors import InvalidArgumentError, ShapeError
from utils.validation import as_matrix, as_vector, data_is_valid, require_positive_int


class TestDataIsValid:
    def test_complete(self):
        assert data_is_valid({"task": "identify"}, {"trainer": "sgelm"})

    @pytest.mark.parametrize(
        "main, page", [(None, {}), ({}, None), ({"task": None}, {}), ({}, {"trainer": None})]
    )
    def test_missing_values(self, main, page):
        assert not data_is_valid(main, page)


class TestConversions:
    def test_vector(self):
        np.testing.assert_array_equal(as_vector([[1, 2, 3]], 3), [1.0, 2.0, 3.0])

    def test_vector_length(self):
        with pytest.raises(ShapeError, match="x has length 2"):
            as_vector([1, 2], 3)

    def test_vector_non_finite(self):
        with pytest.raises(InvalidArgumentError):
            as_vector([1, np.inf], 2, name="phi")

    def test_matrix_promotes_vectors(self):
        assert as_matrix([1.0, 2.0]).shape == (2, 1)

    def test_matrix_columns(self):
        with pytest.raises(ShapeError):
            as_matrix(np.zeros((3, 2)), columns=3)

    def test_matrix_rank(self):
        with pytest.raises(ShapeError):
            as_matrix(np.zeros((2, 2, 2)))

    @pytest.mark.parametrize("value", [0, -3, 2.5])
    def test_positive_int(self, value):
        with pytest.raises(InvalidArgumentError):
            require_positive_int(value, "n")
        assert require_positive_int(4.0, "n") == 4
