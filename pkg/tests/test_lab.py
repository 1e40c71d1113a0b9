"""Schedules, generators, counterexamples, and experiment drivers."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from dlab import algebra as al
from dlab import lab
from dlab import setops as so
from dlab.dset import covering_number, is_nonconcentrated, make_dset
from dlab.errors import GenerationFailed, ParameterRangeError, TrappedInput


# --- parameter formulas -----------------------------------------------------

def test_choose_c1_values():
    assert lab.choose_c1(1, 2) == Fraction(1, 8)
    assert lab.choose_c1(Fraction(2, 1), 4) == Fraction(1, 4)  # s = d/2 -> d/16
    with pytest.raises(ParameterRangeError):
        lab.choose_c1(2, 2)


def test_choose_rho_expand():
    rho_exp, exact = lab.choose_rho_expand(1, 2, 9)
    assert exact == Fraction(1, 9) and rho_exp == 1
    with pytest.raises(ParameterRangeError):
        lab.choose_rho_expand(Fraction(199, 100), 2, 6)  # degenerate, rounds to 0


def test_choose_rho_tv():
    rho_exp, c = lab.choose_rho_tv(Fraction(1, 2), Fraction(1, 2), 1, 0, 8)
    assert c == Fraction(1, 4)
    _, c2 = lab.choose_rho_tv(Fraction(1, 2), 1, 1, Fraction(1, 10), 8)
    assert c2 == Fraction(1, 2) * Fraction(1, 10)  # vanishing-with-eps case


def test_iteration_budget_recursion():
    n, N, inner = lab.iteration_budget(Fraction(19, 10), Fraction(39, 20), 2)
    # oracle: run the recursion independently
    s = Fraction(19, 10)
    k = 0
    while s < Fraction(39, 20):
        s += lab.choose_c1(s, 2) / 2
        k += 1
    assert n == k and inner == 20 ** n
    assert N is None or N == 20 ** inner


def test_iteration_budget_noncommutative_base():
    n, _, inner = lab.iteration_budget(Fraction(3, 2), Fraction(8, 5), 4,
                                       commutative=False)
    assert inner == 16 ** n


@settings(max_examples=25, deadline=None)
@given(hst.integers(4, 56), hst.integers(1, 7))
def test_iteration_budget_monotone_terminates(snum, gapnum):
    # coarse start values keep the exact-fraction recursion tractable
    s = Fraction(snum, 64)
    t = s + Fraction(gapnum, 64)
    if t >= 1:
        return
    n, _, _ = lab.iteration_budget(float(s), float(t), 2)
    assert n >= 1
    cur = Fraction(float(s))
    prev = cur - 1
    for _ in range(min(n, 5)):
        assert cur > prev
        prev = cur
        cur += lab.choose_c1(cur, 2) / 2


def test_schedule_validation():
    with pytest.raises(ParameterRangeError):
        lab.Schedule(s=2, sigma=2, t=2, d=2, delta_exp=6)
    with pytest.raises(ParameterRangeError):
        lab.Schedule(s=1, sigma=Fraction(1, 2), t=1, d=2, delta_exp=6)
    sched = lab.Schedule(s=1, sigma=1, t=Fraction(3, 2), d=2, delta_exp=9,
                         rho_exp=2)
    assert sched.rho_exp == 2


# --- generators -------------------------------------------------------------

def test_gen_random_deterministic():
    C = al.make_algebra("C", m=6)
    A1 = lab.gen_random_dset(C, 6, 1.0, seed=42)
    A2 = lab.gen_random_dset(C, 6, 1.0, seed=42)
    assert A1 == A2


def test_gen_random_passes_nc():
    C = al.make_algebra("C", m=7)
    A = lab.gen_random_dset(C, 7, 1.0, seed=3, C=8)
    assert is_nonconcentrated(A, 1.0, 8).passed


def test_gen_random_full_density_is_grid():
    R = al.make_algebra("R", m=4)
    A = lab.gen_random_dset(R, 4, 1.0, seed=0)
    assert len(A) == 16  # every cell kept at s = d


def test_gen_random_padic():
    Q3 = al.make_algebra("Qp", p=3, m=4)
    A = lab.gen_random_dset(Q3, 4, 0.8, seed=7)
    assert is_nonconcentrated(A, 0.8, 8).passed


def test_counterexample_one_shapes():
    G, X = lab.gen_counterexample("One", 5)
    assert len(G) == 33 ** 2
    assert len(X) == 34


def test_counterexample_one_projection_dichotomy():
    G, X = lab.gen_counterexample("One", 5)
    m = 5
    i_coords = (0, 32)
    bound = 2 * math.isqrt(len(G)) + 1
    for x in X.elements():
        cnt = covering_number(so.project(x, G), m)
        if x.coords == i_coords:
            assert cnt == 33 ** 2
        else:
            assert cnt <= bound


def test_counterexample_two_alternative():
    G0, G1, X = lab.gen_counterexample_parts("Two", 5)
    m = 5
    total = len(G0) + len(G1)
    bound = 2 * math.isqrt(total) + 1
    for x in X.elements():
        c0 = covering_number(so.project(x, G0), m)
        c1 = covering_number(so.project(x, G1), m)
        assert min(c0, c1) <= bound
    # the large alternative at x = i on the flat block
    i_el = al.element(G0.alg, (0, 32))
    assert covering_number(so.project(i_el, G0), m) == 33 ** 2


def test_circle_net_exponent_near_one():
    C = al.make_algebra("C", m=7)
    net = lab.circle_net(C, 7)
    expo = math.log(len(net)) / (7 * math.log(2))
    assert 1.0 <= expo <= 1.6


# --- experiment drivers -----------------------------------------------------

def test_projection_profile_matches_direct_composition():
    C = al.make_algebra("C", m=5)
    import random
    rnd = random.Random(12)
    A = make_dset(C, [(rnd.randrange(16), rnd.randrange(16)) for _ in range(6)])
    B = make_dset(C, [(rnd.randrange(16), rnd.randrange(16)) for _ in range(6)])
    G = so.product_pairs(A, B)
    X = make_dset(C, [(32, 0), (0, 32)])
    recs = lab.measure_projection_profile(G, X)
    for rec in recs:
        x = al.element(C, tuple(int(t) for t in rec.x_coords.split()))
        direct = so.sumset(A, so.scalar_image(x, B, "Left"))
        assert rec.count == covering_number(direct, 5)


def test_run_expansion_trapped_input():
    C = al.make_algebra("C", m=6)
    A = make_dset(C, [(k, 0) for k in range(0, 65, 8)])
    sched = lab.Schedule(s=1, sigma=1, t=Fraction(3, 2), d=2, delta_exp=6)
    with pytest.raises(TrappedInput):
        lab.run_expansion(A, sched)


def test_run_expansion_circle_net_grows():
    m = 6
    C = al.make_algebra("C", m=m)
    net = lab.circle_net(C, m)
    sched = lab.Schedule(s=1, sigma=1, t=Fraction(3, 2), d=2, delta_exp=m,
                         n_iters=1, C=4)
    recs = lab.run_expansion(net, sched, seed=0)
    assert len(recs) == 2
    assert recs[1].exponent > recs[0].exponent
    assert recs[1].exponent <= C.d


def test_full_grid_expansion_capped_at_dim():
    m = 4
    C = al.make_algebra("C", m=m)
    full = make_dset(C, [(x, y) for x in range(16) for y in range(16)])
    sched = lab.Schedule(s=Fraction(199, 100), sigma=2, t=Fraction(199, 100) + Fraction(1, 1000),
                         d=2, delta_exp=m, n_iters=1, C=8)
    recs = lab.run_expansion(full, sched, seed=0)
    assert all(r.exponent <= 2.0 for r in recs)


def test_probe_babyproj_recount():
    C = al.make_algebra("C", m=5)
    A = make_dset(C, [(k, 0) for k in range(0, 33, 4)])
    X = make_dset(C, [(32, 0), (0, 32)])
    rec, x = lab.probe_babyproj(A, X)
    S = so.sumset(A, so.scalar_image(x, A, "Left"))
    assert rec.count == covering_number(S, 5)
    # the imaginary direction spreads the AP into a product grid
    assert x.coords == (0, 32) and rec.count == len(A) ** 2


def test_fibre_profile_product_structure():
    C = al.make_algebra("C", m=5)
    A = make_dset(C, [(k, 0) for k in range(8)])
    G = so.product_pairs(A, A)
    X = make_dset(C, [(0, 0)])
    rep = lab.fibre_profile(G, X, rho_exp=5)
    # x = 0 projects to the first factor: every delta-fibre holds |A| pairs
    assert rep[(0, 0)]["max_fibre"] == len(A)


def test_records_csv_schema(tmp_path):
    rec = lab.ExperimentRecord("e1", "C", None, 2, 6, 1.0, 1.0, 1.5, "proj",
                               "0 1", 33, 0.84, 7)
    path = tmp_path / "r.csv"
    lab.write_records_csv([rec], str(path), header_comment="cfg")
    lines = path.read_text().splitlines()
    assert lines[0] == "# cfg"
    assert lines[1] == "exp_id,algebra,p,d,m,s,sigma,t,op,x_coords,count,exponent,seed"
    assert lines[2].startswith("e1,C,,2,6,")
