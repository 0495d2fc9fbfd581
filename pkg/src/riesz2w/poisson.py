"""Poisson-type averages, the energy functional in its three equivalent
forms, the dyadic Poisson surrogate over 1/3-shifted families, and the
energy-constant audit over bounded-overlap partitions.

The three averages share the shape integral of |f| * numer/(l^p + dist^p):
reproducing (numer l^d, p = 2d), gradient (l, d+1), gradient-plus (l^2, d+2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import DegenerateEnclosureError, EmptyRegionError, InputError, PartitionError
from .geometry import Cube, Difference, DiscreteMeasure, RieszDimension, center_of_mass, cube_mass
from .grids import GridCube, martingale_decompose

_KINDS = {
    # kind -> (numerator exponent on l, denominator power offset from d)
    "reproducing": ("d", "2d"),
    "gradient": (1, 1),
    "gradient_plus": (2, 2),
}


def poisson_avg(kind: str, rd: RieszDimension, mu: DiscreteMeasure, Q: Cube,
                fvals=None) -> float:
    """One of the three Poisson averages of |f| d(mu) against the cube Q."""
    if kind not in _KINDS:
        raise InputError(f"unknown Poisson kind {kind!r}")
    if mu.dim != Q.dim:
        raise InputError("measure and cube dimensions differ")
    if mu.is_empty:
        return 0.0
    d = rd.d
    ell = Q.ell
    if kind == "reproducing":
        numer, power = ell**d, 2.0 * d
    elif kind == "gradient":
        numer, power = ell, d + 1.0
    else:
        numer, power = ell**2, d + 2.0
    wts = mu.masses
    if fvals is not None:
        f = np.asarray(fvals, dtype=np.float64).ravel()
        if f.shape[0] != len(mu):
            raise InputError("fvals length must equal the atom count")
        wts = wts * np.abs(f)
    return _backend.box_poisson_sum(mu.points, wts, Q.low, Q.high, numer, power, ell**power)


class EnergyValue(NamedTuple):
    squared: float
    root: float


def energy(w: DiscreteMeasure, K, form: int = 1, grid=None) -> EnergyValue:
    """E(w, K)^2 by one of the three equivalent formulas.

    Form 1 is the normalized pairwise second moment, form 2 subtracts the
    center of mass, form 3 sums coordinate Haar differences (K must then be
    a cube of an admissible grid).
    """
    if form not in (1, 2, 3):
        raise InputError(f"form must be 1, 2 or 3, got {form}")
    gc = None
    if isinstance(K, GridCube):
        gc, K = K, K.cube
    inside = w.restrict(K)
    total = inside.total_mass
    if len(inside) <= 1 or total <= 0.0:
        return EnergyValue(0.0, 0.0)
    ell2 = K.ell**2
    if form == 1:
        e2 = _backend.pair_moment2(inside.points, inside.masses) / (total**2 * ell2)
    elif form == 2:
        com = center_of_mass(inside, K)
        dev = inside.points - com
        e2 = 2.0 * float(inside.masses @ np.einsum("in,in->i", dev, dev)) / (total * ell2)
    else:
        if gc is None or grid is None:
            raise InputError("form 3 requires a grid cube and its grid")
        hc = martingale_decompose(inside, grid, gc, fvals=inside.points / K.ell)
        e2 = 2.0 * hc.total_diff_norm2 / total
    return EnergyValue(e2, math.sqrt(max(e2, 0.0)))


@dataclass
class PartitionSpec:
    """Root cube, disjoint cells, dilation factor C0 and overlap bound C1."""

    root: Cube
    cells: list
    C0: float = 16.0
    C1: float | None = None

    def __post_init__(self):
        self.cells = [c.cube if isinstance(c, GridCube) else c for c in self.cells]

    def overlap_counts(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        counts = np.zeros(pts.shape[0], dtype=np.int64)
        for cell in self.cells:
            counts += cell.dilate(self.C0).contains(pts)
        return counts

    def sample_points(self, per_axis: int = 32) -> np.ndarray:
        axes = [
            np.linspace(lo, hi, per_axis, endpoint=False)
            for lo, hi in zip(self.root.low, self.root.high)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        centers = np.array([c.center for c in self.cells]) if self.cells else pts[:0]
        return np.concatenate([pts, centers])

    def validate(self, pts=None) -> None:
        if not self.cells:
            return
        lo, hi = self.root.low, self.root.high
        lows = np.array([c.low for c in self.cells])
        highs = np.array([c.high for c in self.cells])
        if np.any(lows < lo) or np.any(highs > hi):
            bad = int(np.argmax(np.any(lows < lo, axis=1) | np.any(highs > hi, axis=1)))
            raise PartitionError(f"cell {bad} is not contained in the root")
        for i in range(len(self.cells)):
            meets = np.all(lows[i] < highs, axis=1) & np.all(lows < highs[i], axis=1)
            meets[i] = False
            if np.any(meets):
                raise PartitionError(f"cells {i} and {int(np.argmax(meets))} overlap")
        if self.C1 is not None:
            counts = self.overlap_counts(pts if pts is not None else self.sample_points())
            worst = int(counts.max()) if counts.size else 0
            if worst > self.C1:
                raise PartitionError(f"overlap bound violated: {worst} > C1 = {self.C1}")


def central_partition(root: Cube, depth: int, C0: float) -> PartitionSpec:
    """Uniform dyadic tiling of the root at 2^-depth, keeping only cells whose
    C0-dilate stays inside the root.

    A finite valid partition family: disjoint cells with overlap bound
    (C0+1)^n (a point meets the C0-dilates of at most that many same-scale
    disjoint cells). Cells near the boundary are excluded because their
    dilates escape the root.
    """
    n = root.dim
    m = 2**depth
    side = root.side / m
    cells = []
    for off in np.ndindex(*(m,) * n):
        center = tuple(root.low[a] + (off[a] + 0.5) * side for a in range(n))
        cell = Cube(center, side)
        big = cell.dilate(C0)
        if np.all(big.low >= root.low - 1e-12 * side) and np.all(
            big.high <= root.high + 1e-12 * side
        ):
            cells.append(cell)
    return PartitionSpec(root, cells, C0=C0, C1=float((math.floor(C0) + 1) ** n))


@dataclass
class EnergyAuditResult:
    value: float
    dual_value: float
    per_cell: list = field(default_factory=list)


def _energy_audit_one_side(rd, outer, inner, spec) -> tuple:
    root_mass = cube_mass(outer, spec.root)
    if root_mass <= 0.0:
        raise EmptyRegionError("outer measure assigns no mass to the root cube")
    total = 0.0
    cells = []
    for K in spec.cells:
        restricted = outer.restrict(Difference(spec.root, K.dilate(spec.C0)))
        pg = poisson_avg("gradient", rd, restricted, K)
        e2 = energy(inner, K, form=2).squared
        wk = cube_mass(inner, K)
        term = pg * pg * e2 * wk
        total += term
        cells.append(term)
    return total / root_mass, cells


def energy_constant_audit(rd: RieszDimension, sigma: DiscreteMeasure, w: DiscreteMeasure,
                          spec: PartitionSpec) -> EnergyAuditResult:
    """Witnessed squared energy constant for one partition, plus its dual."""
    spec.validate()
    value, cells = _energy_audit_one_side(rd, sigma, w, spec)
    dual, _ = _energy_audit_one_side(rd, w, sigma, spec)
    return EnergyAuditResult(value, dual, cells)


class _ThirdShiftFamily:
    """One 1/3-shifted dyadic family: axis offsets (-1)^k * u_a / 3 at scale k.

    Nested like a dyadic grid; for any cube R there is a family containing a
    cube L with 3R inside L and 9 l(R) <= l(L) <= 18 l(R).
    """

    def __init__(self, u: tuple):
        self.u = u

    def offset(self, k: int) -> np.ndarray:
        sign = 1.0 if k % 2 == 0 else -1.0
        return sign * np.asarray(self.u, dtype=np.float64) / 3.0

    def low(self, k: int, idx) -> np.ndarray:
        return (np.asarray(idx, dtype=np.float64) + self.offset(k)) * 2.0**k

    def enclosing(self, R: Cube):
        """(k, idx) for the family cube with 3R inside and side 16-ish l(R), or None."""
        k = math.ceil(math.log2(9.0 * R.ell))
        if not 9.0 * R.ell <= 2.0**k <= 18.0 * R.ell:
            return None
        c = np.asarray(R.center)
        idx = tuple(int(i) for i in np.floor(c / 2.0**k - self.offset(k)))
        lo = self.low(k, idx)
        hi = lo + 2.0**k
        tlo, thi = c - 1.5 * R.ell, c + 1.5 * R.ell
        if np.all(tlo >= lo) and np.all(thi <= hi):
            return (k, idx)
        return None

    def parent(self, k: int, idx) -> tuple:
        s = 1 if k % 2 == 0 else -1
        return (k + 1, tuple((i + s * ua) // 2 for i, ua in zip(idx, self.u)))

    def mass_in(self, mu, fwts, k, idx) -> float:
        lo = self.low(k, idx)
        hi = lo + 2.0**k
        mask = np.all((mu.points >= lo) & (mu.points < hi), axis=1)
        return float(fwts[mask].sum())


@dataclass
class DyadicPoissonResult:
    per_family: dict
    total: float
    surrogate: float
    tail_bound: float
    j_max: int

    @property
    def ratio(self) -> float:
        """Continuous surrogate over the summed dyadic operators."""
        return self.surrogate / self.total if self.total > 0 else math.inf


def dyadic_poisson(rd: RieszDimension, mu: DiscreteMeasure, R: Cube, fvals=None,
                   j_max: int = 60) -> DyadicPoissonResult:
    """Dyadic surrogate sums Q_u(phi, pi_u R) and the continuous comparison term.

    The continuous term drops the side-length numerator:
    P~(phi, R) = int phi / (l(R)^(d+1) + dist(x, R)^(d+1)) d(mu).
    """
    if mu.dim != R.dim:
        raise InputError("measure and cube dimensions differ")
    d = rd.d
    fwts = mu.masses.copy()
    if fvals is not None:
        f = np.asarray(fvals, dtype=np.float64).ravel()
        if f.shape[0] != len(mu):
            raise InputError("fvals length must equal the atom count")
        fwts = fwts * np.abs(f)
    surrogate = _backend.box_poisson_sum(
        mu.points, fwts, R.low, R.high, 1.0, d + 1.0, R.ell ** (d + 1.0)
    )
    per = {}
    for u in np.ndindex(*(3,) * rd.n):
        fam = _ThirdShiftFamily(tuple(int(x) for x in u))
        anchor = fam.enclosing(R)
        if anchor is None:
            continue
        k, idx = anchor
        val = 0.0
        for _ in range(j_max + 1):
            m = fam.mass_in(mu, fwts, k, idx)
            if m > 0.0:
                val += m / (2.0**k) ** (d + 1.0)  # 2^k = 2^j * l(anchor)
            k, idx = fam.parent(k, idx)
        per["".join(map(str, u))] = val
    if not per:
        raise DegenerateEnclosureError("no shifted family encloses the cube")
    total = float(sum(per.values()))
    k0 = math.ceil(math.log2(9.0 * R.ell))
    tail = (
        float(fwts.sum())
        * (2.0**k0) ** (-(d + 1.0))
        * 2.0 ** (-(j_max + 1) * (d + 1.0))
        / (1.0 - 2.0 ** (-(d + 1.0)))
        * len(per)
    )
    return DyadicPoissonResult(per, total, surrogate, tail, j_max)
