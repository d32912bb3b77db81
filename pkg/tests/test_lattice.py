import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tfwdefect.lattice import Lattice, build_grid, wrap_to_cell


def test_small_grids():
    lat = build_grid(1.0, 1, 4)
    assert lat.npoints == 64
    assert lat.dk == pytest.approx(2 * np.pi)
    lat = build_grid(1.0, 2, 4)
    assert lat.npoints == 512
    assert lat.dk == pytest.approx(np.pi)


def test_volume_by_hand():
    assert build_grid(2.5, 3, 8).volume == pytest.approx(421.875, rel=1e-15)


@pytest.mark.parametrize("args", [(1.0, 1, 5), (1.0, 0, 4), (1.0, 1, 2), (0.0, 1, 4), (-1.0, 1, 4), (1.0, 1.5, 4)])
def test_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        Lattice(*args)


def test_kset_covers_all_modes_and_is_symmetric():
    lat = Lattice(1.0, 2, 4)
    m = lat.kset()
    half = lat.n // 2
    assert np.abs(m).max() == half
    assert len(m) == (lat.n + 1) ** 3
    assert {tuple(r) for r in m} == {tuple(-r) for r in m}


@pytest.mark.parametrize("a,L,n", [(1.0, 2, 4), (3.0, 3, 6), (0.7, 4, 8)])
def test_kset_matches_refined_supercell(a, L, n):
    # the supercell (a, L, n) and the single cell (aL, 1, nL) are the same grid
    sup, single = Lattice(a, L, n), Lattice(a * L, 1, n * L)
    assert np.array_equal(sup.kset(), single.kset())
    assert sup.dk == pytest.approx(single.dk, rel=1e-15)
    np.testing.assert_allclose(sup.k2, single.k2, rtol=1e-14)


def test_kset_differs_from_unit_edge_refinement():
    # (a, 1, nL) has the same index range but spacing 2pi/a, not 2pi/(aL)
    assert Lattice(1.0, 2, 4).dk != pytest.approx(Lattice(1.0, 1, 8).dk)


def test_wrap_examples():
    lat = Lattice(2.0, 3, 4)
    e = lat.edge
    np.testing.assert_array_equal(wrap_to_cell(np.zeros(3), lat), np.zeros(3))
    np.testing.assert_allclose(wrap_to_cell(np.array([e, 0, 0]), lat), [0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(wrap_to_cell(np.array([0.6 * e, 0, 0]), lat), [-0.4 * e, 0, 0], atol=1e-14)


def test_wrap_half_open_boundary():
    lat = Lattice(1.0, 1, 4)
    assert wrap_to_cell(np.array([0.5, -0.5, 1.5]), lat).tolist() == [0.5, 0.5, 0.5]


@settings(max_examples=200, deadline=None)
@given(
    x=st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=3),
    a=st.floats(0.1, 10),
    L=st.integers(1, 5),
)
def test_wrap_lands_in_cell_and_differs_by_periods(x, a, L):
    lat = Lattice(a, L, 4)
    x = np.array(x)
    w = wrap_to_cell(x, lat)
    e = lat.edge
    assert np.all(w > -e / 2 - 1e-9 * e) and np.all(w <= e / 2 + 1e-9 * e)
    k = (x - w) / e
    np.testing.assert_allclose(k, np.round(k), atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(n=st.sampled_from([4, 6, 8, 10]), L=st.integers(1, 3), a=st.floats(0.5, 5))
def test_grid_points_round_trip(n, L, a):
    lat = Lattice(a, L, n)
    idx = np.arange(lat.n)
    x = lat.axis
    assert np.array_equal(wrap_to_cell(x, lat), x)
    # unwrap: grid index recovered from the wrapped coordinate
    back = np.rint(np.mod(x, lat.edge) / lat.spacing).astype(int) % lat.n
    assert np.array_equal(back, idx)
    assert lat.axis[0] == 0.0


def test_mode_index_and_k2_half():
    lat = Lattice(1.0, 1, 6)
    assert lat.mode_index.tolist() == [0, 1, 2, 3, -2, -1]
    assert lat.k2_half.shape == (6, 6, 4)
    np.testing.assert_allclose(lat.k2_half, lat.k2[:, :, :4], rtol=1e-15)
