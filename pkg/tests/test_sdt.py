import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from oracles import brute_boundary, brute_edt_sq, brute_edt_sq_fast, brute_sdf
from tlsdet.errors import EmptySites
from tlsdet.sdt import boundary, edt_sq, sdf


def test_boundary_single_pixel():
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    assert np.array_equal(boundary(m), m)


def test_boundary_full_3x3_is_frame():
    b = boundary(np.ones((3, 3), bool))
    expected = np.ones((3, 3), bool)
    expected[1, 1] = False
    assert np.array_equal(b, expected)
    assert b.sum() == 8


def test_boundary_empty():
    assert not boundary(np.zeros((4, 4), bool)).any()


def test_edt_single_site_corner_value():
    s = np.zeros((5, 5), bool)
    s[2, 2] = True
    assert edt_sq(s)[0, 0] == 8


def test_edt_all_sites_zero():
    assert not edt_sq(np.ones((6, 7), bool)).any()


def test_edt_equidistant_pair():
    s = np.zeros((5, 5), bool)
    s[0, 0] = s[4, 4] = True
    assert edt_sq(s)[2, 2] == 8


def test_edt_requires_sites():
    with pytest.raises(EmptySites):
        edt_sq(np.zeros((3, 3), bool))


@settings(max_examples=150, deadline=None)
@given(hnp.arrays(bool, hnp.array_shapes(min_dims=2, max_dims=2, max_side=17)))
def test_edt_matches_brute_force(sites):
    if not sites.any():
        sites[0, 0] = True
    assert np.array_equal(edt_sq(sites), brute_edt_sq(sites))


def test_edt_degenerate_shapes():
    row = np.zeros((1, 9), bool)
    row[0, 3] = True
    assert edt_sq(row).tolist() == [[9, 4, 1, 0, 1, 4, 9, 16, 25]]
    assert edt_sq(row.T)[:, 0].tolist() == [9, 4, 1, 0, 1, 4, 9, 16, 25]


def test_sdf_single_center_pixel():
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    f = sdf(m).values
    assert f[2, 2] == 0
    assert f[1, 2] == f[3, 2] == f[2, 1] == f[2, 3] == 1
    assert f[1, 1] == f[3, 3] == pytest.approx(math.sqrt(2), abs=0)


def test_sdf_full_3x3():
    f = sdf(np.ones((3, 3), bool)).values
    expected = np.zeros((3, 3))
    expected[1, 1] = -1
    assert np.array_equal(f, expected)


def test_sdf_empty_mask_sentinel():
    f = sdf(np.zeros((4, 4), bool)).values
    assert (f == math.sqrt(32)).all()


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(bool, hnp.array_shapes(min_dims=2, max_dims=2, max_side=12)))
def test_sdf_matches_brute_force(mask):
    assert np.array_equal(boundary(mask), brute_boundary(mask))
    np.testing.assert_array_equal(sdf(mask).values, brute_sdf(mask))


def _rand_mask(rng, shape=(40, 40)):
    return rng.random(shape) < rng.uniform(0.05, 0.9)


def test_sign_partition(rng):
    for _ in range(50):
        m = _rand_mask(rng)
        f = sdf(m).values
        edge = boundary(m)
        assert np.array_equal(f == 0, edge)
        assert np.array_equal(f < 0, m & ~edge)
        assert np.array_equal(f > 0, ~m)


def test_lipschitz_on_neighbours(rng):
    for _ in range(50):
        f = sdf(_rand_mask(rng)).values
        assert (np.abs(np.diff(f, axis=0)) <= 1 + 1e-12).all()
        assert (np.abs(np.diff(f, axis=1)) <= 1 + 1e-12).all()


def test_magnitude_bounded_by_diagonal(rng):
    for _ in range(20):
        m = _rand_mask(rng, (30, 50))
        assert (np.abs(sdf(m).values) <= math.hypot(30, 50)).all()


def test_translation_equivariance():
    m = np.zeros((40, 40), bool)
    m[5:12, 8:20] = True
    shifted = np.roll(np.roll(m, 9, axis=0), 4, axis=1)
    f, g = sdf(m).values, sdf(shifted).values
    # compare away from the frame, where both fields see the same geometry
    assert np.allclose(np.roll(np.roll(f, 9, axis=0), 4, axis=1)[14:21, 12:24], g[14:21, 12:24])
    inner = m & ~boundary(m)
    assert np.array_equal(np.roll(np.roll(f * inner, 9, 0), 4, 1), g * np.roll(np.roll(inner, 9, 0), 4, 1))


def test_compiled_oracle_agrees_with_reference(rng):
    for _ in range(10):
        m = rng.random((17, 23)) < rng.uniform(0.02, 0.6)
        m[0, 0] = True
        assert np.array_equal(brute_edt_sq_fast(m), brute_edt_sq(m))
