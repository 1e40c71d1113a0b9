"""Grid sets: covering numbers, non-concentration, refinement, file IO."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from dlab import algebra as al
from dlab.dset import (
    DSet,
    covering_number,
    is_nonconcentrated,
    make_dset,
    neighborhood,
    read_dset,
    remove_ball,
    uniform_subset,
    uniformity_audit,
    write_dset,
)
from dlab.errors import EmptyInput


def _line(m, step=1):
    R = al.make_algebra("R", m=m)
    return make_dset(R, [(i,) for i in range(0, 2 ** m + 1, step)])


# --- covering numbers -------------------------------------------------------

def test_covering_full_grid_is_power():
    A = _line(5)
    for k in range(6):
        assert covering_number(A, k) == 2 ** k


def test_covering_at_m_is_cardinality():
    A = _line(5, step=4)
    assert covering_number(A, 5) == len(A)


def test_covering_padic_cells():
    Q3 = al.make_algebra("Qp", p=3, m=3)
    A = make_dset(Q3, [(i,) for i in range(27)])
    assert covering_number(A, 1) == 3
    assert covering_number(A, 3) == 27


def test_empty_covering_zero():
    R = al.make_algebra("R", m=4)
    A = make_dset(R, [])
    assert covering_number(A, 2) == 0


@settings(max_examples=40)
@given(hst.sets(hst.integers(0, 63), min_size=1, max_size=40))
def test_covering_monotone_in_scale(pts):
    R = al.make_algebra("R", m=6)
    A = make_dset(R, [(i,) for i in pts])
    covers = [covering_number(A, k) for k in range(7)]
    assert covers == sorted(covers)


@settings(max_examples=40)
@given(hst.sets(hst.integers(0, 63), min_size=1, max_size=30),
       hst.sets(hst.integers(0, 63), min_size=1, max_size=30))
def test_covering_subadditive_under_union(p1, p2):
    R = al.make_algebra("R", m=6)
    A = make_dset(R, [(i,) for i in p1])
    B = make_dset(R, [(i,) for i in p2])
    U = make_dset(R, [(i,) for i in p1 | p2])
    for k in (2, 4, 6):
        assert covering_number(U, k) <= covering_number(A, k) + covering_number(B, k)


# --- non-concentration ------------------------------------------------------

def test_ap_is_nonconcentrated_dim_one():
    A = _line(6)
    rep = is_nonconcentrated(A, 1.0, 4)
    assert rep.passed and rep.best_C <= 2


def test_cluster_fails_nc():
    R = al.make_algebra("R", m=6)
    A = make_dset(R, [(i,) for i in range(5)] + [(64,)])
    rep = is_nonconcentrated(A, 1.0, 2)
    assert not rep.passed


def test_full_grid_2d_best_C_within_box_factor():
    C = al.make_algebra("C", m=4)
    A = make_dset(C, [(x, y) for x in range(17) for y in range(17)])
    rep = is_nonconcentrated(A, 2.0, 4)
    assert rep.passed and rep.best_C <= 4  # 2^d relaxation for grid balls


def test_padic_singleton_cell_nc():
    Q3 = al.make_algebra("Qp", p=3, m=3)
    A = make_dset(Q3, [(i,) for i in range(27)])
    rep = is_nonconcentrated(A, 1.0, 2)
    assert rep.passed


# --- neighborhood / removal -------------------------------------------------

def test_neighborhood_box_around_origin():
    R = al.make_algebra("R", m=4)
    A = make_dset(R, [(0,)])
    N = neighborhood(A, 4)
    assert sorted(int(p[0]) for p in N.points) == [-1, 0, 1]


def test_neighborhood_padic_identity_at_m():
    Q3 = al.make_algebra("Qp", p=3, m=3)
    A = make_dset(Q3, [(5,)])
    assert neighborhood(A, 3) == A


def test_neighborhood_contains_input():
    R = al.make_algebra("R", m=5)
    A = make_dset(R, [(3,), (17,)])
    N = neighborhood(A, 4)
    have = {tuple(p) for p in N.points}
    assert {(3,), (17,)} <= have


def test_remove_ball_keeps_three_quarters():
    A = _line(5)
    out = remove_ball(A, al.zero(A.alg), 2)  # drop B(0, 1/4)
    assert len(out) == 24


def test_remove_ball_at_m_drops_closed_delta_ball():
    # keeps exactly the points strictly further than delta from the center
    A = _line(4)
    out = remove_ball(A, al.element(A.alg, (8,)), 4)
    assert len(out) == len(A) - 3
    kept = {int(p[0]) for p in out.points}
    assert kept == {i for i in range(17) if abs(i - 8) > 1}


# --- uniformization ---------------------------------------------------------

def test_uniform_subset_of_full_grid_is_identity():
    A = _line(5)
    assert uniform_subset(A, T=1) == A


def test_uniform_subset_empty_raises():
    R = al.make_algebra("R", m=3)
    with pytest.raises(EmptyInput):
        uniform_subset(make_dset(R, []))


def test_uniform_subset_selects_heavier_class():
    # dense left half (all 16 points) vs sparse right half (2 points)
    R = al.make_algebra("R", m=5)
    pts = [(i,) for i in range(16)] + [(20,), (28,)]
    U = uniform_subset(make_dset(R, pts), T=1)
    kept = {int(p[0]) for p in U.points}
    assert kept <= set(range(16)) and len(kept) >= 8


@settings(max_examples=30, deadline=None)
@given(hst.integers(0, 10 ** 6))
def test_uniform_subset_audit_and_mass_bound(seed):
    import random
    rnd = random.Random(seed)
    R = al.make_algebra("R", m=6)
    pts = [(i,) for i in range(65) if rnd.random() < 0.5] or [(0,)]
    A = make_dset(R, pts)
    U = uniform_subset(A, T=1)
    audit = uniformity_audit(U, T=1)
    assert all(bool(v[2]) for v in audit.values())
    stages = A.scale_exp
    assert len(U) * (A.alg.d + 1) ** stages >= len(A)


# --- file format ------------------------------------------------------------

def test_dset_roundtrip_bit_exact(tmp_path):
    C = al.make_algebra("C", m=5)
    A = make_dset(C, [(3, -4), (0, 0), (31, 17)])
    path = tmp_path / "a.dset"
    write_dset(A, str(path))
    B = read_dset(str(path))
    assert B == A
    write_dset(B, str(tmp_path / "b.dset"))
    assert (tmp_path / "b.dset").read_bytes() == path.read_bytes()


def test_dset_roundtrip_padic(tmp_path):
    Q5 = al.make_algebra("Qp", p=5, m=3)
    A = make_dset(Q5, [(7,), (124,)], radius_exp=1)
    path = tmp_path / "q.dset"
    write_dset(A, str(path))
    assert read_dset(str(path)) == A
