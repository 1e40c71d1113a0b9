"""Set calculus: sums, differences, products, iterated expressions, scalar
actions, projections, quotient sets and linear coordinate changes.

Real-base composites are rounded to the grid once per operation
(half-away-from-zero); p-adic composites are exact.  Large sumsets fall
back to an FFT indicator convolution; everything else is pairwise with a
point budget.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import algebra as al
from .algebra import AlgebraDescriptor, Element
from .dset import DSet, make_dset, point_budget
from .errors import (
    AlgebraMismatch,
    BudgetExceeded,
    DivisionByNegligible,
    NoAdmissiblePairs,
    ParameterRangeError,
    ScaleMismatch,
    SingularMap,
)

PAIRWISE_CAP = 4_000_000
FFT_CELL_CAP = 1 << 24


@dataclass(frozen=True)
class PairSet:
    """Finite subset of E x E on the grid; columns are (a, b) coordinates."""
    alg: AlgebraDescriptor
    scale_exp: int
    radius_exp: int
    pairs: np.ndarray = field(compare=False)

    def __post_init__(self):
        arr = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2 * self.alg.d)
        if len(arr):
            arr = np.unique(arr, axis=0)
        object.__setattr__(self, "pairs", arr)

    def __len__(self):
        return len(self.pairs)

    def __eq__(self, other):
        return (isinstance(other, PairSet) and self.alg == other.alg
                and self.scale_exp == other.scale_exp
                and self.radius_exp == other.radius_exp
                and np.array_equal(self.pairs, other.pairs))

    def left(self) -> DSet:
        return DSet(self.alg, self.scale_exp, self.radius_exp,
                    self.pairs[:, :self.alg.d])

    def right(self) -> DSet:
        return DSet(self.alg, self.scale_exp, self.radius_exp,
                    self.pairs[:, self.alg.d:])

    def unit_exp(self) -> int:
        return self.scale_exp if self.alg.is_real_base else self.radius_exp


def make_pairset(alg, pairs, scale_exp=None, radius_exp=0) -> PairSet:
    if scale_exp is None:
        scale_exp = alg.m
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                     dtype=np.int64).reshape(-1, 2 * alg.d)
    if not alg.is_real_base:
        arr = arr % alg.p ** (scale_exp + radius_exp)
    return PairSet(alg, scale_exp, radius_exp, arr)


def product_pairs(A: DSet, B: DSet) -> PairSet:
    """Cartesian product A x B as a PairSet."""
    _check_compat(A, B)
    r = max(A.radius_exp, B.radius_exp)
    a = _at_radius(A, r)
    b = _at_radius(B, r)
    n, k = len(a), len(b)
    if n * k > point_budget():
        raise BudgetExceeded("cartesian product too large", {"pairs": n * k})
    left = np.repeat(a, k, axis=0)
    right = np.tile(b, (n, 1))
    return PairSet(A.alg, A.scale_exp, r, np.hstack([left, right]))


# ---------------------------------------------------------------------------
# shared helpers

def _check_compat(A, B):
    if A.alg != B.alg:
        raise AlgebraMismatch("operands live in different algebras")
    if A.scale_exp != B.scale_exp:
        raise ScaleMismatch(f"scale {A.scale_exp} vs {B.scale_exp}")


def _at_radius(A, r):
    """Points of A re-expressed at p-adic radius_exp r >= A.radius_exp
    (real base: unchanged)."""
    pts = A.points if isinstance(A, DSet) else A.pairs
    if A.alg.is_real_base or r == A.radius_exp:
        return pts
    f = A.alg.p ** (r - A.radius_exp)
    return pts * f


def _round_div_arr(v: np.ndarray, q: int) -> np.ndarray:
    """Vectorized round-half-away-from-zero of v/q."""
    av = np.abs(v)
    r = (2 * av + q) // (2 * q)
    return np.where(v >= 0, r, -r)


def _mod(A_alg, scale_exp, radius_exp):
    return A_alg.p ** (scale_exp + radius_exp)


def _negate_points(alg, pts, scale_exp, radius_exp):
    if alg.is_real_base:
        return -pts
    return (-pts) % _mod(alg, scale_exp, radius_exp)


# ---------------------------------------------------------------------------
# sums and differences

def _fft_support_sum(a_pts, b_pts, cyclic_mod=None):
    """Support of the sumset via indicator convolution.

    cyclic_mod None: linear convolution on the bounding boxes (real base).
    Otherwise circular convolution modulo cyclic_mod per axis (p-adic).
    """
    d = a_pts.shape[1]
    if cyclic_mod is None:
        amin = a_pts.min(axis=0)
        bmin = b_pts.min(axis=0)
        ash = a_pts - amin
        bsh = b_pts - bmin
        shape = tuple(int(ash[:, t].max() + bsh[:, t].max() + 1) for t in range(d))
    else:
        ash, bsh = a_pts, b_pts
        shape = (cyclic_mod,) * d
    if int(np.prod(shape)) > FFT_CELL_CAP:
        raise BudgetExceeded("sumset grid too large for FFT", {"cells": int(np.prod(shape))})
    ga = np.zeros(shape)
    ga[tuple(ash.T)] = 1.0
    gb = np.zeros(shape)
    gb[tuple(bsh.T)] = 1.0
    axes = tuple(range(d))
    conv = np.fft.irfftn(np.fft.rfftn(ga, shape, axes) * np.fft.rfftn(gb, shape, axes),
                         shape, axes)
    out = np.argwhere(conv > 0.5).astype(np.int64)
    if cyclic_mod is None:
        out = out + amin + bmin
    return out


def sumset(A: DSet, B: DSet) -> DSet:
    """{a + b} on the grid."""
    _check_compat(A, B)
    if len(A) == 0 or len(B) == 0:
        return DSet(A.alg, A.scale_exp, max(A.radius_exp, B.radius_exp),
                    np.zeros((0, A.alg.d), dtype=np.int64))
    alg = A.alg
    r = max(A.radius_exp, B.radius_exp)
    a = _at_radius(A, r)
    b = _at_radius(B, r)
    out_r = r + 1 if alg.is_real_base else r
    if len(a) * len(b) <= PAIRWISE_CAP:
        pts = (a[:, None, :] + b[None, :, :]).reshape(-1, alg.d)
        if not alg.is_real_base:
            pts %= _mod(alg, A.scale_exp, r)
        return DSet(alg, A.scale_exp, out_r, pts)
    if alg.is_real_base:
        pts = _fft_support_sum(a, b)
    else:
        pts = _fft_support_sum(a, b, cyclic_mod=_mod(alg, A.scale_exp, r))
    return DSet(alg, A.scale_exp, out_r, pts)


def negate(A: DSet) -> DSet:
    return DSet(A.alg, A.scale_exp, A.radius_exp,
                _negate_points(A.alg, A.points, A.scale_exp, A.radius_exp))


def difference_set(A: DSet, B: DSet) -> DSet:
    """{a - b}, implemented as a sumset with negation."""
    return sumset(A, negate(B))


# ---------------------------------------------------------------------------
# products and scalar images

def _pairwise_products(alg, a_pts, b_pts, unit_a, unit_b, scale_exp, radius_out):
    """All products a*b via the structure constants; one rounding (real)."""
    C = np.asarray(alg.structure_constants, dtype=np.int64)
    raw = np.einsum("ni,kj,ijl->nkl", a_pts, b_pts, C).reshape(-1, alg.d)
    if alg.is_real_base:
        shift = unit_a + unit_b - scale_exp
        if shift <= 0:
            return raw * 2 ** (-shift)
        return _round_div_arr(raw, 2 ** shift)
    return raw % _mod(alg, scale_exp, radius_out)


def product_set(A: DSet, B: DSet, side: str = "Left") -> DSet:
    """{ab} (Left) or {ba} (Right) on the grid."""
    _check_compat(A, B)
    if side not in ("Left", "Right"):
        raise ParameterRangeError(f"side must be Left or Right, got {side!r}")
    if side == "Right":
        A, B = B, A
    alg = A.alg
    if len(A) == 0 or len(B) == 0:
        return DSet(alg, A.scale_exp, 0, np.zeros((0, alg.d), dtype=np.int64))
    if len(A) * len(B) > min(PAIRWISE_CAP, point_budget()):
        raise BudgetExceeded("product set too large",
                             {"pairs": len(A) * len(B)})
    r_out = A.radius_exp + B.radius_exp
    pts = _pairwise_products(alg, A.points, B.points, A.unit_exp(), B.unit_exp(),
                             A.scale_exp, r_out)
    return DSet(alg, A.scale_exp, r_out, pts)


def _elem_units(alg, x: Element, scale_exp):
    """Coordinates of x in the operand units used by array kernels."""
    return np.asarray(x.coords, dtype=np.int64), x.unit_exp


def mul_elem_array(alg, x: Element, pts: np.ndarray, unit_pts: int,
                   scale_exp: int, side: str = "Left"):
    """x*pts (Left) or pts*x (Right): raw products and the combined unit."""
    C = np.asarray(alg.structure_constants, dtype=np.int64)
    xc, ux = _elem_units(alg, x, scale_exp)
    if side == "Left":
        raw = np.einsum("i,nj,ijl->nl", xc, pts, C)
    else:
        raw = np.einsum("ni,j,ijl->nl", pts, xc, C)
    return raw, ux + unit_pts


def scalar_image(x: Element, A: DSet, side: str = "Left") -> DSet:
    """{xa} or {ax} on the grid."""
    alg = A.alg
    if len(A) == 0:
        return A
    raw, unit = mul_elem_array(alg, x, A.points, A.unit_exp(), A.scale_exp, side)
    if alg.is_real_base:
        shift = unit - A.scale_exp
        pts = raw * 2 ** (-shift) if shift <= 0 else _round_div_arr(raw, 2 ** shift)
        return DSet(alg, A.scale_exp, A.radius_exp + max(0, _norm_ceil_exp(alg, x)),
                    pts)
    # p-adic: raw coordinates carry the combined unit p^-(unit)
    r_out = unit
    pts = raw % _mod(alg, A.scale_exp, r_out)
    return DSet(alg, A.scale_exp, r_out, pts)


def _norm_ceil_exp(alg, x: Element) -> int:
    """Smallest e with |x| <= 2^e (real base)."""
    ns = al.norm_sq(alg, x)
    e = 0
    while Fraction(4) ** e < ns:
        e += 1
    return e


# ---------------------------------------------------------------------------
# projections

def project(x: Element, G: PairSet) -> DSet:
    """pi_x(G) = {a + x b}, rounded once (real) / exact (p-adic)."""
    alg = G.alg
    if len(G) == 0:
        return DSet(alg, G.scale_exp, G.radius_exp,
                    np.zeros((0, alg.d), dtype=np.int64))
    d = alg.d
    a = G.pairs[:, :d]
    b = G.pairs[:, d:]
    raw, unit = mul_elem_array(alg, x, b, G.unit_exp(), G.scale_exp, "Left")
    if alg.is_real_base:
        # a is on the grid, so rounding a + xb once equals a + round(xb)
        shift = unit - G.scale_exp
        xb = raw * 2 ** (-shift) if shift <= 0 else _round_div_arr(raw, 2 ** shift)
        pts = a + xb
        return DSet(alg, G.scale_exp, G.radius_exp + 1 + max(0, _norm_ceil_exp(alg, x)),
                    pts)
    r_out = max(G.radius_exp + max(x.unit_exp, 0), G.radius_exp)
    f = alg.p ** (r_out - G.radius_exp)
    aa = a * f
    xb = raw * alg.p ** (r_out - unit) if r_out >= unit else None
    if xb is None:
        raise ParameterRangeError("projection direction finer than representable")
    pts = (aa + xb) % _mod(alg, G.scale_exp, r_out)
    return DSet(alg, G.scale_exp, r_out, pts)


# ---------------------------------------------------------------------------
# iterated sum/product expressions

def ball_intersect(A: DSet, radius_exp: int = 0) -> DSet:
    """A ∩ B(0, radix^radius_exp) (closed Euclidean ball / ultrametric ball)."""
    alg = A.alg
    if len(A) == 0:
        return DSet(alg, A.scale_exp, radius_exp, A.points)
    if alg.is_real_base:
        bound = 4 ** (A.scale_exp + radius_exp)
        keep = np.array([int(np.dot(row.astype(object), row.astype(object))) <= bound
                         for row in A.points])
        return DSet(alg, A.scale_exp, radius_exp, A.points[keep])
    p = alg.p
    if radius_exp >= A.radius_exp:
        return A
    f = p ** (A.radius_exp - radius_exp)
    keep = np.all(A.points % f == 0, axis=1)
    pts = (A.points[keep] // f) % _mod(alg, A.scale_exp, radius_exp)
    return DSet(alg, A.scale_exp, radius_exp, pts)


def iterated(A: DSet, n_sum: int, n_prod: int, clip: bool = True) -> DSet:
    """n_sum*(A^(n_prod) - A^(n_prod)), intersected with B(0,1) when clip."""
    if n_sum < 1 or n_prod < 1:
        raise ParameterRangeError("n_sum and n_prod must be >= 1")
    P = A
    for _ in range(n_prod - 1):
        P = product_set(P, A, "Left")
    D = difference_set(P, P)
    S = D
    for _ in range(n_sum - 1):
        S = sumset(S, D)
    return ball_intersect(S, 0) if clip else S


# ---------------------------------------------------------------------------
# quotient sets

def inv_value_coords(alg, x: Element):
    """Exact rational coordinates of x^-1 (raises DivisionByNegligible)."""
    vals = al.value_coords(alg, x)
    d = alg.d
    cols = []
    for j in range(d):
        col = [Fraction(0)] * d
        for i in range(d):
            if vals[i]:
                c = alg.structure_constants[i][j]
                for k in range(d):
                    if c[k]:
                        col[k] += vals[i] * c[k]
        cols.append(col)
    mat = [[cols[j][k] for j in range(d)] for k in range(d)]
    sol = al._solve_fraction(mat, [Fraction(1)] + [Fraction(0)] * (d - 1))
    if sol is None:
        raise DivisionByNegligible("singular left-multiplication matrix")
    return tuple(sol)


def mul_value_coords(alg, xv, yv):
    """Product of two exact rational coordinate vectors."""
    d = alg.d
    out = [Fraction(0)] * d
    for i in range(d):
        if xv[i]:
            for j in range(d):
                if yv[j]:
                    c = alg.structure_constants[i][j]
                    w = xv[i] * yv[j]
                    for k in range(d):
                        if c[k]:
                            out[k] += w * c[k]
    return tuple(out)


def _value_to_grid(alg, vals, scale_exp, radius_exp):
    """Snap exact rational coordinates onto a DSet grid (single rounding)."""
    if alg.is_real_base:
        scale = 2 ** scale_exp
        return tuple(al.round_half_away(v.numerator * scale, v.denominator)
                     for v in vals)
    p = alg.p
    mod = _mod(alg, scale_exp, radius_exp)
    out = []
    for v in vals:
        num, den = v.numerator, v.denominator
        kv = al.vp(den, p) if den % p == 0 else 0
        if kv > radius_exp:
            raise ParameterRangeError("value below representable radius")
        unit = den // p ** kv
        out.append(num * p ** (radius_exp - kv) * pow(unit, -1, mod) % mod)
    return tuple(out)


def _distinct_differences(A: DSet):
    """Map difference value-coords -> lex-smallest witness pair (a, b)."""
    elems = A.elements()
    order = sorted(range(len(elems)), key=lambda i: elems[i].coords)
    diffs = {}
    alg = A.alg
    for i in order:
        for j in order:
            dv = tuple(x - y for x, y in
                       zip(al.value_coords(alg, elems[i]), al.value_coords(alg, elems[j])))
            if dv not in diffs:
                diffs[dv] = (elems[i], elems[j])
    return diffs


def _value_norm_gt(alg, vals, rho_exp) -> bool:
    """|v| > radix^-rho_exp, exactly."""
    if alg.is_real_base:
        s = sum(v * v for v in vals)
        return s > Fraction(1, 4 ** rho_exp)
    if all(v == 0 for v in vals):
        return False
    p = alg.p
    vmin = min((al.vp(v.numerator, p) - (al.vp(v.denominator, p) if v.denominator % p == 0 else 0))
               for v in vals if v != 0)
    return vmin < rho_exp


def quotient_set(A: DSet, rho_exp: int, side: str = "Left",
                 with_witnesses: bool = False):
    """Delta-separated representatives of {(a-b)(c-d)^-1 : |c-d| > rho}
    (Left) or {(c-d)^-1(a-b)} (Right), Delta = delta/rho^3.

    Representative per Delta-cell is the one with the lexicographically
    smallest witness quadruple (a, b, c, d).
    """
    alg = A.alg
    m = A.scale_exp
    if not (0 < rho_exp and m - 3 * rho_exp >= 1):
        raise ParameterRangeError("need 0 < rho_exp < m/3 so Delta is a scale")
    scale_out = m - 3 * rho_exp
    if alg.is_real_base:
        radius_out = A.radius_exp + 1 + rho_exp
    else:
        radius_out = A.radius_exp + rho_exp
    diffs = _distinct_differences(A)
    dens = {dv: w for dv, w in diffs.items() if _value_norm_gt(alg, dv, rho_exp)}
    if not dens:
        raise NoAdmissiblePairs("all pairwise differences are <= rho")
    if len(diffs) * len(dens) > point_budget():
        raise BudgetExceeded("quotient set too large",
                             {"pairs": len(diffs) * len(dens)})
    cells = {}
    for dv in sorted(diffs, key=lambda v: diffs[v][0].coords + diffs[v][1].coords):
        wa, wb = diffs[dv]
        for ev in sorted(dens, key=lambda v: dens[v][0].coords + dens[v][1].coords):
            wc, wd = dens[ev]
            inv_ev = _inv_of_value(alg, ev)
            if side == "Left":
                q = mul_value_coords(alg, dv, inv_ev)
            else:
                q = mul_value_coords(alg, inv_ev, dv)
            cell = _value_to_grid(alg, q, scale_out, radius_out)
            key = (wa.coords, wb.coords, wc.coords, wd.coords)
            if cell not in cells or key < cells[cell]:
                cells[cell] = key
    pts = np.array(sorted(cells), dtype=np.int64)
    Q = DSet(alg, scale_out, radius_out, pts)
    if with_witnesses:
        wit = {tuple(int(v) for v in c): cells[c] for c in cells}
        return Q, wit
    return Q


def _inv_of_value(alg, vals):
    """Exact rational inverse of an element given by value coordinates."""
    d = alg.d
    cols = []
    for j in range(d):
        col = [Fraction(0)] * d
        for i in range(d):
            if vals[i]:
                c = alg.structure_constants[i][j]
                for k in range(d):
                    if c[k]:
                        col[k] += vals[i] * c[k]
        cols.append(col)
    mat = [[cols[j][k] for j in range(d)] for k in range(d)]
    sol = al._solve_fraction(mat, [Fraction(1)] + [Fraction(0)] * (d - 1))
    if sol is None:
        raise DivisionByNegligible("difference is a zero divisor")
    return tuple(sol)


# ---------------------------------------------------------------------------
# linear coordinate changes on E^2

def _linear_map_matrix(alg, L):
    """(2d)x(2d) rational matrix of (a,b) -> (L11 a + L12 b, L21 a + L22 b)."""
    d = alg.d
    cols = []
    for pos in range(2):
        for k in range(d):
            e = al.basis_element(alg, k)
            if pos == 0:
                top = al.mul_exact(alg, L[0][0], e)
                bot = al.mul_exact(alg, L[1][0], e)
            else:
                top = al.mul_exact(alg, L[0][1], e)
                bot = al.mul_exact(alg, L[1][1], e)
            col = list(al.value_coords(alg, top)) + list(al.value_coords(alg, bot))
            cols.append(col)
    return [[cols[j][i] for j in range(2 * d)] for i in range(2 * d)]


def _check_invertible(alg, L):
    mat = _linear_map_matrix(alg, L)
    det = al.det_fraction(mat)
    if det == 0:
        raise SingularMap("linear map is singular")
    floor_exp = alg.m // 2
    if alg.is_real_base:
        if abs(det) < Fraction(1, 2 ** floor_exp):
            raise SingularMap("determinant below the invertibility floor")
    else:
        p = alg.p
        v = al.vp(det.numerator, p) - (al.vp(det.denominator, p)
                                       if det.denominator % p == 0 else 0)
        if v > floor_exp:
            raise SingularMap("determinant below the invertibility floor")
    return det


def apply_linear_map(L, G: PairSet) -> PairSet:
    """Image of G under the 2x2 matrix L of algebra elements (left action)."""
    alg = G.alg
    _check_invertible(alg, L)
    d = alg.d
    a = G.pairs[:, :d]
    b = G.pairs[:, d:]
    rows = []
    unit = G.unit_exp()
    for idx in range(len(G)):
        av = _units_to_values(alg, a[idx], unit)
        bv = _units_to_values(alg, b[idx], unit)
        top = _vec_add(mul_value_coords(alg, al.value_coords(alg, L[0][0]), av),
                       mul_value_coords(alg, al.value_coords(alg, L[0][1]), bv))
        bot = _vec_add(mul_value_coords(alg, al.value_coords(alg, L[1][0]), av),
                       mul_value_coords(alg, al.value_coords(alg, L[1][1]), bv))
        r_out = G.radius_exp + 2
        rows.append(_value_to_grid(alg, top, G.scale_exp, r_out)
                    + _value_to_grid(alg, bot, G.scale_exp, r_out))
    return PairSet(alg, G.scale_exp, G.radius_exp + 2,
                   np.array(rows, dtype=np.int64).reshape(-1, 2 * d))


def apply_dual(L, X: DSet) -> DSet:
    """Induced map on projection directions: x -> w1^-1 w2 for
    (w1, w2) = L(1, x)."""
    alg = X.alg
    _check_invertible(alg, L)
    unit = X.unit_exp()
    onev = al.value_coords(alg, al.one(alg))
    rows = []
    r_out = X.radius_exp + alg.m // 2 + 1
    for idx in range(len(X)):
        xv = _units_to_values(alg, X.points[idx], unit)
        w1 = _vec_add(mul_value_coords(alg, al.value_coords(alg, L[0][0]), onev),
                      mul_value_coords(alg, al.value_coords(alg, L[0][1]), xv))
        w2 = _vec_add(mul_value_coords(alg, al.value_coords(alg, L[1][0]), onev),
                      mul_value_coords(alg, al.value_coords(alg, L[1][1]), xv))
        if not _value_norm_gt(alg, w1, alg.m // 2):
            raise DivisionByNegligible("first component below the inversion floor")
        mapped = mul_value_coords(alg, _inv_of_value(alg, w1), w2)
        rows.append(_value_to_grid(alg, mapped, X.scale_exp, r_out))
    return DSet(alg, X.scale_exp, r_out, np.array(rows, dtype=np.int64))


def _units_to_values(alg, row, unit_exp):
    q = Fraction(1, alg.radix ** unit_exp)
    return tuple(Fraction(int(c)) * q for c in row)


def _vec_add(u, v):
    return tuple(a + b for a, b in zip(u, v))


# ---------------------------------------------------------------------------
# PairSet file format

def write_pairset(G: PairSet, path: str, extra_comments=()) -> None:
    alg = G.alg
    base = "R" if alg.is_real_base else "Qp"
    p = "-" if alg.p is None else str(alg.p)
    lines = [f"#dlab v1 base={base} p={p} d={alg.d} m={G.scale_exp} "
             f"Rexp={G.radius_exp}"]
    lines.extend(str(c) for c in extra_comments)
    for row in G.pairs:
        lines.append(" ".join(str(int(v)) for v in row))
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_pairset(path: str, alg: AlgebraDescriptor | None = None) -> PairSet:
    from .dset import _parse_header
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    kv = _parse_header(lines[0])
    d = int(kv["d"])
    m = int(kv["m"])
    rexp = int(kv["Rexp"])
    if alg is None:
        if kv["base"] == "R":
            alg = al.make_algebra({1: "R", 2: "C", 4: "H"}[d], m=m)
        else:
            alg = al.make_algebra("Qp" if d == 1 else "Qp_ext",
                                  p=int(kv["p"]), d=d, m=m)
    rows = [[int(t) for t in ln.split()] for ln in lines[1:]
            if not ln.startswith("#")]
    return make_pairset(alg, rows, scale_exp=m, radius_exp=rexp)
