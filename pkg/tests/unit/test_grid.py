"""Tests for the wraparound neighbourhood grid."""

from deployers.lib.grid import Grid, grid_for_population


def test_neighbourhood_wraps_around_edges():
    grid = Grid(width=5, height=5, radius=1)
    near = grid.neighbourhood(0)
    assert len(near) == 9
    assert near[4] == 0
    assert {4, 20, 24, 1, 5, 6} <= set(near)


def test_neighbourhood_has_no_duplicates_on_small_grids():
    grid = Grid(width=3, height=3, radius=2)
    assert sorted(grid.neighbourhood(4)) == list(range(9))


def test_neighbourhood_is_cached():
    grid = Grid(width=6, height=6, radius=1)
    assert grid.neighbourhood(7) is grid.neighbourhood(7)


def test_grid_for_population_is_at_least_five_wide():
    assert grid_for_population(10, radius=2).n_cells == 25
    big = grid_for_population(2000, radius=2)
    assert (big.width, big.height) == (22, 22)


def test_grid_for_population_respects_explicit_size():
    grid = grid_for_population(2000, radius=1, width=10, height=4)
    assert (grid.width, grid.height, grid.radius) == (10, 4, 1)
