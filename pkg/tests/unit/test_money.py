"""Tests for integer money helpers."""

import pytest

from deployers.lib.money import largest_remainder, to_base_units


class TestLargestRemainder:
    def test_parts_sum_to_amount(self):
        parts = largest_remainder(100, [1, 1, 1])
        assert parts == [34, 33, 33]
        assert sum(parts) == 100

    def test_ties_go_to_lower_index(self):
        assert largest_remainder(1, [1, 1]) == [1, 0]

    def test_proportional_split(self):
        assert largest_remainder(10, [3, 1]) == [8, 2]

    def test_negative_amount(self):
        parts = largest_remainder(-100, [1, 1, 1])
        assert parts == [-34, -33, -33]

    def test_zero_weight_gets_nothing(self):
        assert largest_remainder(7, [0, 1]) == [0, 7]

    def test_zero_weights_rejected(self):
        with pytest.raises(ValueError):
            largest_remainder(5, [0, 0])


@pytest.mark.parametrize(
    "value,expected",
    [(0.5, 1), (1.49, 1), (-0.5, -1), (-2.5, -3), (12.0, 12)],
)
def test_to_base_units_rounds_half_away_from_zero(value, expected):
    assert to_base_units(value) == expected
