"""Counting engines: additive energy, quintuple/quadruple incidence counts,
graph-based structure extraction, and exact sumset-inequality ledgers.

Tolerance convention: |y| <= delta means the rounded grid representatives
agree up to an adjacent cell (real base, l-infinity) or lie in the same
residue class (p-adic).  Counts are exact for that convention.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import algebra as al
from . import setops as so
from .dset import DSet, covering_number, point_budget
from .errors import (
    AlgebraMismatch,
    BudgetExceeded,
    DivisionByNegligible,
    EmptyGraph,
)


@dataclass
class CountReport:
    total: int
    breakdown: dict
    bound: float | None
    ratio: float | None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"total": self.total, "breakdown": self.breakdown,
                "bound": self.bound, "ratio": self.ratio, "extra": self.extra}

    def to_json(self):
        return json.dumps(self.to_dict(), default=str)


@dataclass
class BsgResult:
    A_sub: DSet
    B_sub: DSet
    density_A: float
    density_B: float
    sumset_count: int
    guarantee: dict

    def to_dict(self):
        return {"A_sub": len(self.A_sub), "B_sub": len(self.B_sub),
                "density_A": self.density_A, "density_B": self.density_B,
                "sumset_count": self.sumset_count, "guarantee": self.guarantee}


# ---------------------------------------------------------------------------
# additive energy

def _sum_counter(A: DSet, B: DSet) -> Counter:
    """Multiset of pairwise sums a+b with multiplicities."""
    so._check_compat(A, B)
    alg = A.alg
    r = max(A.radius_exp, B.radius_exp)
    a = so._at_radius(A, r)
    b = so._at_radius(B, r)
    if len(a) * len(b) > point_budget():
        raise BudgetExceeded("energy pair count too large",
                             {"pairs": len(a) * len(b)})
    sums = (a[:, None, :] + b[None, :, :]).reshape(-1, alg.d)
    if not alg.is_real_base:
        sums %= alg.p ** (A.scale_exp + r)
    vals, counts = np.unique(sums, axis=0, return_counts=True)
    return Counter({tuple(map(int, v)): int(c) for v, c in zip(vals, counts)})


def additive_energy(A: DSet, B: DSet) -> int:
    """|{(a, a', b, b') : a + b = a' + b'}|, exactly."""
    r = _sum_counter(A, B)
    return sum(c * c for c in r.values())


# ---------------------------------------------------------------------------
# rounded scalar products on coordinate arrays

def _rounded_products(A: DSet, x: al.Element, side: str = "Left"):
    """Grid representatives of x*a (or a*x) for all a in A; exact (p-adic) or
    rounded once (real).  Returns (pts, radius_exp)."""
    alg = A.alg
    raw, unit = so.mul_elem_array(alg, x, A.points, A.unit_exp(), A.scale_exp,
                                  side)
    if alg.is_real_base:
        shift = unit - A.scale_exp
        pts = raw * 2 ** (-shift) if shift <= 0 else so._round_div_arr(raw, 2 ** shift)
        return pts, A.radius_exp + max(0, so._norm_ceil_exp(alg, x))
    return raw % alg.p ** (A.scale_exp + unit), unit


def _diff_counter(A: DSet):
    """Counter of coordinate differences a - a' with multiplicity."""
    alg = A.alg
    diffs = (A.points[:, None, :] - A.points[None, :, :]).reshape(-1, alg.d)
    if not alg.is_real_base:
        diffs %= alg.p ** (A.scale_exp + A.radius_exp)
    vals, counts = np.unique(diffs, axis=0, return_counts=True)
    return Counter({tuple(map(int, v)): int(c) for v, c in zip(vals, counts)})


def _neighbor_offsets(alg):
    if alg.is_real_base:
        return list(itertools.product((-1, 0, 1), repeat=alg.d))
    return [tuple([0] * alg.d)]


# ---------------------------------------------------------------------------
# quintuple count (projection-energy form)

def quintuple_count_tv(A: DSet, X: DSet, rho_exp: int,
                       s=None, sigma=None, t=None, eps=Fraction(0),
                       symmetric: bool = False) -> CountReport:
    """Exact count of (a,b,c,d,x) in A^4 x X with |a + xb - (c - xd)| <= delta
    (as printed; symmetric=True counts |a + xb - (c + xd)| <= delta), broken
    down at the |b - d| threshold radix^-rho_exp."""
    alg = A.alg
    if alg != X.alg:
        raise AlgebraMismatch("A and X live in different algebras")
    n = len(A)
    if len(X) * n ** 2 * 3 ** alg.d > 100 * point_budget():
        raise BudgetExceeded("quintuple count too large; reduce m or |A|",
                             {"work": len(X) * n ** 2})
    offsets = _neighbor_offsets(alg)
    D = _diff_counter(A)  # (a, c) differences
    elems = A.elements()
    mod = None if alg.is_real_base else alg.p ** (A.scale_exp + A.radius_exp)
    near_count = far_count = 0
    rho_sq = Fraction(1, 4 ** rho_exp)
    for x in X.elements():
        R, _ = _rounded_products(A, x, "Left")
        for ib in range(n):
            for id_ in range(n):
                # target for (a - c): the printed form needs a - c = -(xb + xd)
                if symmetric:
                    tvec = R[id_] - R[ib]
                else:
                    tvec = -(R[ib] + R[id_])
                cnt = 0
                for off in offsets:
                    key = tuple(int(tvec[k] + off[k]) % mod if mod
                                else int(tvec[k] + off[k])
                                for k in range(alg.d))
                    cnt += D.get(key, 0)
                if cnt:
                    bd = al.sub(alg, elems[ib], elems[id_])
                    if alg.is_real_base:
                        is_near = al.norm_sq(alg, bd) <= rho_sq
                    else:
                        ne = al.norm_exp(alg, bd)
                        is_near = ne is None or ne >= rho_exp
                    if is_near:
                        near_count += cnt
                    else:
                        far_count += cnt
    total = near_count + far_count
    bound = ratio = None
    if None not in (s, sigma, t):
        c_exp = Fraction(s) * (Fraction(t) - Fraction(sigma) + Fraction(eps)) / Fraction(t)
        bound = float(Fraction(alg.radix) ** (-A.scale_exp * c_exp)
                      * n ** 3 * len(X))
        ratio = total / bound if bound else None
    return CountReport(total,
                       {"near": near_count, "far": far_count},
                       bound, ratio,
                       {"rho_exp": rho_exp, "symmetric": symmetric,
                        "tolerance": "adjacent-cell (real) / same-cell (p-adic)"})


# ---------------------------------------------------------------------------
# quadruple count (sparse-case form)

def quadruple_count_sparse(A: DSet, p: al.Element, q: al.Element,
                           s=None, rho_exp: int | None = None) -> CountReport:
    """Exact |{(a1,a2,a3,a4) : |a1 q + a3 p - a2 q - a4 p| <= delta}| with the
    once-rounded products (a1-a2)q and (a3-a4)p; reports the Cauchy-Schwarz
    corollary |A|^4 / |Y| <= N(Aq + Ap) alongside the measured count."""
    alg = A.alg
    if rho_exp is not None:
        if alg.is_real_base:
            small = al.norm_sq(alg, q) < Fraction(1, 4 ** rho_exp)
        else:
            ne = al.norm_exp(alg, q)
            small = ne is None or ne > rho_exp
        if small:
            raise DivisionByNegligible("|q| below the rho floor")
    n = len(A)
    D = _diff_counter(A)
    offsets = _neighbor_offsets(alg)
    mod = None if alg.is_real_base else alg.p ** (A.scale_exp + A.radius_exp)

    def rounded_mult(counter, x):
        """Push the difference counter through u -> rounded(u x)."""
        out = Counter()
        unit = A.scale_exp if alg.is_real_base else A.radius_exp
        for u, cnt in counter.items():
            e = al.element(alg, u, unit_exp=unit)
            prod = al.mul_exact(alg, e, x)
            vals = al.value_coords(alg, prod)
            if alg.is_real_base:
                key = tuple(al.round_half_away(v.numerator * 2 ** A.scale_exp,
                                               v.denominator) for v in vals)
            else:
                key = tuple(int(c) * alg.p ** (A.radius_exp - prod.unit_exp) % mod
                            if prod.unit_exp <= A.radius_exp else None
                            for c in prod.coords)
                if None in key:
                    key = ("overflow",) + tuple(prod.coords)
            out[key] += cnt
        return out

    Rq = rounded_mult(D, q)
    Rp = rounded_mult(D, p)
    total = 0
    for uq, cq in Rq.items():
        if uq and uq[0] == "overflow":
            continue
        for off in offsets:
            key = tuple((-uq[k] + off[k]) % mod if mod else -uq[k] + off[k]
                        for k in range(alg.d))
            total += cq * Rp.get(key, 0)
    bound = ratio = None
    if s is not None and rho_exp is not None:
        bound = float(Fraction(alg.radix) ** (-A.scale_exp * Fraction(s))
                      * Fraction(alg.radix) ** (-rho_exp * Fraction(s)) * n ** 4)
        ratio = total / bound if bound else None
    extra = {"cs_lower_bound": n ** 4 / total if total else None}
    try:
        S = so.sumset(so.scalar_image(q, A, "Right"), so.scalar_image(p, A, "Right"))
        extra["measured_sumset"] = covering_number(S, A.scale_exp)
    except BudgetExceeded:
        extra["measured_sumset"] = None
    return CountReport(total, {"all": total}, bound, ratio, extra)


# ---------------------------------------------------------------------------
# graph extraction (popular sums)

def bsg_extract(H: so.PairSet, A: DSet, B: DSet) -> BsgResult:
    """Dense-subgraph extraction along popular sums: keep edges whose sum
    value has at least half-average multiplicity, then high-degree left
    vertices, then right vertices popular within the kept edges."""
    if len(H) == 0:
        raise EmptyGraph("no edges")
    alg = H.alg
    d = alg.d
    edges = [tuple(map(int, row)) for row in H.pairs]
    mod = None if alg.is_real_base else alg.p ** (H.scale_exp + H.radius_exp)

    def edge_sum(e):
        return tuple((e[k] + e[d + k]) % mod if mod else e[k] + e[d + k]
                     for k in range(d))

    mult = Counter(edge_sum(e) for e in edges)
    avg_mult = len(edges) / len(mult)
    popular = [e for e in edges if mult[edge_sum(e)] >= avg_mult / 2]
    if not popular:
        raise EmptyGraph("no popular edges")
    deg = Counter(e[:d] for e in popular)
    avg_deg = len(popular) / len(deg)
    a_keep = {a for a, c in deg.items() if c >= avg_deg / 2}
    kept = [e for e in popular if e[:d] in a_keep]
    bdeg = Counter(e[d:] for e in kept)
    avg_bdeg = len(kept) / len(bdeg)
    b_keep = {b for b, c in bdeg.items() if c >= avg_bdeg / 2}

    A_sub = DSet(alg, H.scale_exp, H.radius_exp,
                 np.array(sorted(a_keep), dtype=np.int64).reshape(-1, d))
    B_sub = DSet(alg, H.scale_exp, H.radius_exp,
                 np.array(sorted(b_keep), dtype=np.int64).reshape(-1, d))
    S = so.sumset(A_sub, B_sub)
    sum_count = len(S)
    K = (len(A) * len(B)) / len(edges)
    C0, kexp = 16.0, 5
    bound = C0 * K ** kexp * (len(A) * len(B)) ** 0.5
    return BsgResult(A_sub, B_sub, len(A_sub) / max(len(A), 1),
                     len(B_sub) / max(len(B), 1), sum_count,
                     {"K": K, "constant": C0, "K_exponent": kexp,
                      "bound": bound, "holds": sum_count <= bound,
                      "degenerate": K >= min(len(A), len(B)) / 2})


# ---------------------------------------------------------------------------
# exact sumset-inequality ledger

def eval_expr(env: dict, expr):
    """Evaluate a composition tree of sums/differences/scalar images.

    Nodes: ("set", name) | ("sum", e1, e2) | ("diff", e1, e2)
         | ("scal", Element, e, side).
    """
    op = expr[0]
    if op == "set":
        return env[expr[1]]
    if op == "sum":
        return so.sumset(eval_expr(env, expr[1]), eval_expr(env, expr[2]))
    if op == "diff":
        return so.difference_set(eval_expr(env, expr[1]), eval_expr(env, expr[2]))
    if op == "scal":
        return so.scalar_image(expr[1], eval_expr(env, expr[2]),
                               expr[3] if len(expr) > 3 else "Left")
    raise ValueError(f"unknown expression node {op!r}")


@dataclass(frozen=True)
class RuzsaInstance:
    """Inequality |lhs| <= prod|num| / prod|den| over the grid group."""
    name: str
    lhs: tuple
    num: tuple
    den: tuple = ()


def ledger_rows(env: dict, instances) -> list:
    rows = []
    for inst in instances:
        lhs = len(eval_expr(env, inst.lhs))
        num = 1
        for e in inst.num:
            num *= len(eval_expr(env, e))
        den = 1
        for e in inst.den:
            den *= len(eval_expr(env, e))
        rhs = Fraction(num, den)
        slack = rhs / lhs if lhs else None
        rows.append({"instance": inst.name, "lhs": lhs, "rhs": float(rhs),
                     "slack": float(slack) if slack is not None else None})
    return rows


def ruzsa_triangle_instance(a="A", b="B", c="C") -> RuzsaInstance:
    """|A-C| <= |A-B| |B-C| / |B|."""
    return RuzsaInstance("ruzsa_triangle",
                         ("diff", ("set", a), ("set", c)),
                         (("diff", ("set", a), ("set", b)),
                          ("diff", ("set", b), ("set", c))),
                         (("set", b),))


def plunnecke_row(A: DSet, B: DSet) -> dict:
    """With K = |A+B|/|A|: checks |B+B-B| <= K^3 |A| exactly."""
    K = Fraction(len(so.sumset(A, B)), len(A))
    lhs = len(so.difference_set(so.sumset(B, B), B))
    rhs = K ** 3 * len(A)
    return {"instance": "plunnecke_2B-B", "lhs": lhs, "rhs": float(rhs),
            "slack": float(Fraction(rhs) / lhs) if lhs else None}


def energy_cs_row(A: DSet) -> dict:
    """E(A,A) |A+A| >= |A|^4 (Cauchy-Schwarz), reported as slack >= 1."""
    E = additive_energy(A, A)
    s = len(so.sumset(A, A))
    lhs = len(A) ** 4
    rhs = E * s
    return {"instance": "energy_cauchy_schwarz", "lhs": lhs, "rhs": float(rhs),
            "slack": rhs / lhs if lhs else None}


def write_ledger_csv(rows, path: str) -> None:
    import csv
    import os
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["instance", "lhs", "rhs", "slack"])
        w.writeheader()
        for r in rows:
            w.writerow(r)
    os.replace(tmp, path)
