"""Delta-discretized sets: storage, covering numbers, non-concentration,
neighborhoods, uniformization, and the text file format.

A DSet stores grid points of a normed division algebra inside the ball
B(0, radix^radius_exp) at grid scale radix^-scale_exp.  Coordinates:

* real base: integers in units of 2^-scale_exp;
* p-adic base: integers in units of p^-radius_exp, reduced modulo
  p^(scale_exp + radius_exp).  radius_exp = 0 recovers plain residues
  mod p^m.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import algebra as al
from .algebra import AlgebraDescriptor, Element
from .errors import BudgetExceeded, EmptyInput, ParameterRangeError, ScaleOutOfRange

DEFAULT_POINT_BUDGET = 10_000_000


def point_budget() -> int:
    env = os.environ.get("DLAB_BUDGET_POINTS")
    return int(env) if env else DEFAULT_POINT_BUDGET


def _canon_points(arr: np.ndarray, d: int) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.int64).reshape(-1, d)
    if len(arr) == 0:
        return arr
    return np.unique(arr, axis=0)


@dataclass(frozen=True)
class DSet:
    alg: AlgebraDescriptor
    scale_exp: int
    radius_exp: int
    points: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", _canon_points(self.points, self.alg.d))

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return (isinstance(other, DSet) and self.alg == other.alg
                and self.scale_exp == other.scale_exp
                and self.radius_exp == other.radius_exp
                and np.array_equal(self.points, other.points))

    def element(self, idx: int) -> Element:
        unit = self.scale_exp if self.alg.is_real_base else self.radius_exp
        return al.element(self.alg, tuple(int(c) for c in self.points[idx]), unit)

    def elements(self):
        return [self.element(i) for i in range(len(self))]

    def unit_exp(self) -> int:
        return self.scale_exp if self.alg.is_real_base else self.radius_exp


def make_dset(alg, points, scale_exp=None, radius_exp=0) -> DSet:
    if scale_exp is None:
        scale_exp = alg.m
    pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points,
                     dtype=np.int64).reshape(-1, alg.d)
    if not alg.is_real_base:
        mod = alg.p ** (scale_exp + radius_exp)
        pts = pts % mod
    return DSet(alg, scale_exp, radius_exp, pts)


def from_elements(alg, elements, scale_exp=None, radius_exp=0) -> DSet:
    """Build a DSet from Elements, snapping them onto the set's grid."""
    if scale_exp is None:
        scale_exp = alg.m
    rows = []
    if alg.is_real_base:
        for e in elements:
            # rescale from units 2^-unit_exp to units 2^-scale_exp
            if e.unit_exp <= scale_exp:
                rows.append([c * 2 ** (scale_exp - e.unit_exp) for c in e.coords])
            else:
                q = 2 ** (e.unit_exp - scale_exp)
                rows.append([al.round_half_away(c, q) for c in e.coords])
    else:
        p = alg.p
        for e in elements:
            if e.unit_exp > radius_exp:
                raise ParameterRangeError(
                    f"element at unit_exp {e.unit_exp} exceeds radius_exp {radius_exp}")
            rows.append([c * p ** (radius_exp - e.unit_exp) for c in e.coords])
    return make_dset(alg, rows, scale_exp, radius_exp)


# ---------------------------------------------------------------------------
# covering numbers and cells

def cell_ids(A: DSet, k: int) -> np.ndarray:
    """Cell labels of every point at scale radix^-k (half-open boxes / residues)."""
    if k < 0 or k > A.scale_exp:
        raise ScaleOutOfRange(f"k={k} outside [0, {A.scale_exp}]")
    if A.alg.is_real_base:
        # half-open boxes; the right endpoint of the bounding ball joins
        # the last cell by clamping
        top = 2 ** (A.scale_exp + A.radius_exp)
        pts = np.where(A.points == top, A.points - 1, A.points)
        return pts // (2 ** (A.scale_exp - k))
    mod = A.alg.p ** (k + A.radius_exp)
    return A.points % mod


def covering_number(A: DSet, k: int) -> int:
    if len(A) == 0:
        return 0
    ids = cell_ids(A, k)
    return len(np.unique(ids, axis=0))


# ---------------------------------------------------------------------------
# non-concentration verification

@dataclass
class NCReport:
    passed: bool
    s: float
    C: float
    worst_center: tuple
    worst_radius_exp: int
    worst_count: int
    best_C: float

    def to_dict(self):
        return {
            "pass": self.passed, "s": self.s, "C": self.C,
            "worst_center": list(self.worst_center),
            "worst_radius_exp": self.worst_radius_exp,
            "worst_count": self.worst_count, "best_C": self.best_C,
        }


def _real_ball_counts(A: DSet, k: int):
    """For each point, the number of set points in the open linf ball of
    radius 2^-k around it (cell-bucketed scan)."""
    u = 2 ** (A.scale_exp - k)  # radius in grid units
    pts = A.points
    shifted = pts // u
    buckets = {}
    for i, key in enumerate(map(tuple, shifted)):
        buckets.setdefault(key, []).append(i)
    d = A.alg.d
    counts = np.zeros(len(pts), dtype=np.int64)
    offs = list(itertools.product((-1, 0, 1), repeat=d))
    for i, key in enumerate(map(tuple, shifted)):
        x = pts[i]
        c = 0
        for off in offs:
            nb = tuple(key[t] + off[t] for t in range(d))
            for j in buckets.get(nb, ()):
                if np.max(np.abs(pts[j] - x)) < u:
                    c += 1
        counts[i] = c
    return counts


def is_nonconcentrated(A: DSet, s: float, C: float) -> NCReport:
    """Check N(A ∩ B(x,r)) <= C r^s N(A) over centers x in A and radii
    r = radix^-k, delta <= r <= 1.

    Real base uses open linf balls; p-adic base uses the ultrametric cells.
    Returns the worst witness and the smallest constant that would pass.
    """
    if len(A) == 0:
        raise EmptyInput("empty set")
    n = len(A)
    best_C = 0.0
    worst = (0, 0, n)
    for k in range(0, A.scale_exp + 1):
        if A.alg.is_real_base:
            counts = _real_ball_counts(A, k)
        else:
            ids = cell_ids(A, k)
            _, inverse, cnt = np.unique(ids, axis=0, return_inverse=True,
                                        return_counts=True)
            counts = cnt[inverse]
        i = int(np.argmax(counts))
        ratio = counts[i] * float(A.alg.radix) ** (k * s) / n
        if ratio > best_C:
            best_C = ratio
            worst = (i, k, int(counts[i]))
    i, k, cnt = worst
    return NCReport(best_C <= C, s, C, tuple(int(v) for v in A.points[i]),
                    k, cnt, best_C)


# ---------------------------------------------------------------------------
# neighborhoods and ball removal

def neighborhood(A: DSet, k: int) -> DSet:
    """All grid points within radix^-k of the set (linf boxes / p-adic cells)."""
    if k > A.scale_exp:
        raise ScaleOutOfRange(f"k={k} beyond scale_exp {A.scale_exp}")
    if len(A) == 0:
        return A
    d = A.alg.d
    if A.alg.is_real_base:
        u = 2 ** (A.scale_exp - k)
        n_off = (2 * u + 1) ** d
        if len(A) * n_off > point_budget():
            raise BudgetExceeded("neighborhood blowup", {"points": len(A), "offsets": n_off})
        offs = np.array(list(itertools.product(range(-u, u + 1), repeat=d)),
                        dtype=np.int64)
        pts = (A.points[:, None, :] + offs[None, :, :]).reshape(-1, d)
        return DSet(A.alg, A.scale_exp, A.radius_exp + 1, pts)
    p = A.alg.p
    step = p ** (k + A.radius_exp)
    reps = np.unique(A.points % step, axis=0)
    n_fill = p ** ((A.scale_exp - k) * d)
    if len(reps) * n_fill > point_budget():
        raise BudgetExceeded("neighborhood blowup", {"cells": len(reps), "fill": n_fill})
    fills = np.array(list(itertools.product(range(p ** (A.scale_exp - k)), repeat=d)),
                     dtype=np.int64)
    pts = (reps[:, None, :] + step * fills[None, :, :]).reshape(-1, d)
    return DSet(A.alg, A.scale_exp, A.radius_exp, pts)


def remove_ball(A: DSet, center: Element, k: int) -> DSet:
    """Points at distance > radix^-k from the center."""
    if len(A) == 0:
        return A
    alg = A.alg
    if alg.is_real_base:
        # express center in the set's units
        vals = al.value_coords(alg, center)
        cu = np.array([al.round_half_away(v.numerator * 2 ** A.scale_exp,
                                          v.denominator) for v in vals],
                      dtype=np.int64)
        diff = A.points - cu
        dist_sq = np.sum(diff.astype(object) ** 2, axis=1)
        thresh = 4 ** (A.scale_exp - k)  # (2^(scale-k))^2 grid units squared
        keep = np.array([ds > thresh for ds in dist_sq])
        return DSet(alg, A.scale_exp, A.radius_exp, A.points[keep])
    p = alg.p
    if center.unit_exp > A.radius_exp:
        raise ParameterRangeError("center finer than set resolution")
    cu = np.array([c * p ** (A.radius_exp - center.unit_exp) for c in center.coords],
                  dtype=np.int64)
    mod = p ** (k + A.radius_exp)
    keep = np.any((A.points - cu) % mod != 0, axis=1)
    return DSet(alg, A.scale_exp, A.radius_exp, A.points[keep])


# ---------------------------------------------------------------------------
# uniformization (up-the-tree pigeonholing)

def _radix_class(count: int, radix: int) -> int:
    cls = 0
    while count >= radix:
        count //= radix
        cls += 1
    return cls


def uniform_subset(A: DSet, T: int = 1) -> DSet:
    """Refine A so all nonempty cells at every stage scale carry counts in a
    single radix-power class; keeps the heaviest class at each stage."""
    if len(A) == 0:
        raise EmptyInput("cannot uniformize an empty set")
    if T < 1:
        raise ParameterRangeError("stage size T must be >= 1")
    radix = A.alg.radix
    keep = np.ones(len(A), dtype=bool)
    scales = list(range(A.scale_exp - T, -1, -T))
    if scales and scales[-1] != 0:
        scales.append(0)
    for k in scales:
        idx = np.flatnonzero(keep)
        if len(idx) == 0:
            break
        ids = cell_ids(DSet(A.alg, A.scale_exp, A.radius_exp, A.points[idx]), k)
        _, inverse, counts = np.unique(ids, axis=0, return_inverse=True,
                                       return_counts=True)
        # class of a cell: floor(log_radix(count)), exact integer arithmetic
        classes = np.array([_radix_class(int(c), radix) for c in counts])
        mass = {}
        for cls, cnt in zip(classes, counts):
            mass[cls] = mass.get(cls, 0) + int(cnt)
        best = max(sorted(mass), key=lambda c: (mass[c], c))
        cell_keep = classes[inverse] == best
        keep[idx[~cell_keep]] = False
    return DSet(A.alg, A.scale_exp, A.radius_exp, A.points[keep])


def uniformity_audit(A: DSet, T: int = 1):
    """Max/min nonempty cell-count ratio at every stage scale; uniform sets
    satisfy ratio <= radix^T everywhere."""
    radix = A.alg.radix
    out = {}
    scales = list(range(A.scale_exp - T, -1, -T))
    if scales and scales[-1] != 0:
        scales.append(0)
    for k in scales:
        ids = cell_ids(A, k)
        _, counts = np.unique(ids, axis=0, return_counts=True)
        out[k] = (int(counts.max()), int(counts.min()),
                  counts.max() / counts.min() <= radix ** T)
    return out


# ---------------------------------------------------------------------------
# file format

def _header(A: DSet) -> str:
    alg = A.alg
    base = "R" if alg.is_real_base else "Qp"
    p = "-" if alg.p is None else str(alg.p)
    return (f"#dlab v1 base={base} p={p} d={alg.d} m={A.scale_exp} "
            f"Rexp={A.radius_exp}")


def write_dset(A: DSet, path: str, extra_comments=()) -> None:
    lines = [_header(A)]
    lines.extend(str(c) for c in extra_comments)
    for row in A.points:
        lines.append(" ".join(str(int(v)) for v in row))
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _parse_header(line: str):
    if not line.startswith("#dlab v1 "):
        raise ParameterRangeError(f"bad dlab header: {line!r}")
    kv = dict(tok.split("=", 1) for tok in line.split()[2:])
    return kv


def read_dset(path: str, alg: AlgebraDescriptor | None = None) -> DSet:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    kv = _parse_header(lines[0])
    d = int(kv["d"])
    m = int(kv["m"])
    rexp = int(kv["Rexp"])
    if alg is None:
        if kv["base"] == "R":
            spec = {1: "R", 2: "C", 4: "H"}[d]
            alg = al.make_algebra(spec, m=m)
        else:
            alg = al.make_algebra("Qp" if d == 1 else "Qp_ext",
                                  p=int(kv["p"]), d=d, m=m)
    rows = [[int(t) for t in ln.split()] for ln in lines[1:]
            if not ln.startswith("#")]
    return make_dset(alg, rows, scale_exp=m, radius_exp=rexp)
