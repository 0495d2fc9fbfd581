"""Random shifted dyadic lattices, (eps, r)-goodness, martingale (Haar)
decompositions, good/bad projections, and Whitney collections.

A grid over the scale window [k_min, k_max] stores one shift bit per axis
per scale transition; the side of a scale-k cube is lam * 2^k and children
partition their parent exactly. Cube identity is integer lattice index, so
parent/child/ancestor arithmetic is exact. Goodness and admissibility are
relative to the finite window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import (
    AdmissibilityError,
    ConfigurationError,
    EmptyRegionError,
    InputError,
)
from .geometry import Cube, DiscreteMeasure, boundary_distance


@dataclass(frozen=True)
class GoodnessParams:
    epsilon: float
    r: int

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise InputError(f"epsilon must lie in (0,1), got {self.epsilon}")
        if not (isinstance(self.r, int) and self.r >= 1):
            raise InputError(f"r must be a positive integer, got {self.r}")


class ShiftedGrid:
    """Random dyadic lattice: per-axis binary shift sequence over a scale window."""

    def __init__(self, dim, k_min, k_max, bits, lam=1.0, seed=None):
        if k_min >= k_max:
            raise InputError(f"scale window needs k_min < k_max, got [{k_min}, {k_max}]")
        if not 1.0 <= lam <= 2.0:
            raise InputError(f"dilation must lie in [1, 2], got {lam}")
        bits = np.asarray(bits, dtype=np.int64)
        if bits.shape != (dim, k_max - k_min):
            raise InputError(f"bits must have shape ({dim}, {k_max - k_min})")
        if np.any((bits != 0) & (bits != 1)):
            raise InputError("shift bits must be 0 or 1")
        self.dim = dim
        self.k_min = k_min
        self.k_max = k_max
        self.bits = bits
        self.lam = float(lam)
        self.seed = seed
        # shift at scale k: sum_{j >= k} 2^j * bit_j, anchored to 0 at k_max
        shifts = np.zeros((k_max - k_min + 1, dim))
        for k in range(k_max - 1, k_min - 1, -1):
            shifts[k - k_min] = shifts[k - k_min + 1] + (2.0**k) * bits[:, k - k_min]
        self._shifts = shifts

    def shift(self, k) -> np.ndarray:
        self._check_scale(k)
        return self._shifts[k - self.k_min]

    def _check_scale(self, k):
        if not self.k_min <= k <= self.k_max:
            raise ConfigurationError(f"scale {k} outside window [{self.k_min}, {self.k_max}]")

    def side(self, k) -> float:
        return self.lam * 2.0**k

    def cube_containing(self, x, k) -> "GridCube":
        self._check_scale(k)
        x = np.asarray(x, dtype=np.float64)
        idx = np.floor((x / self.lam - self.shift(k)) / 2.0**k).astype(np.int64)
        return GridCube(self, k, tuple(int(i) for i in idx))

    def atom_indices(self, pts, k) -> np.ndarray:
        """Lattice index of the scale-k cube containing each point; shape (N, dim)."""
        self._check_scale(k)
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return np.floor((pts / self.lam - self.shift(k)) / 2.0**k).astype(np.int64)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "lam": self.lam,
            "seed": self.seed,
            "bits": self.bits.tolist(),
        }

    @classmethod
    def from_json(cls, obj) -> "ShiftedGrid":
        return cls(obj["dim"], obj["k_min"], obj["k_max"], obj["bits"], obj["lam"], obj["seed"])


def build_grid(dim, scale_range, seed, lam=1.0) -> ShiftedGrid:
    """Deterministic random grid from a seed (or a numpy SeedSequence)."""
    k_min, k_max = scale_range
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(dim, k_max - k_min))
    label = seed if isinstance(seed, int) else None
    return ShiftedGrid(dim, k_min, k_max, bits, lam=lam, seed=label)


@dataclass(frozen=True)
class GridCube:
    """A cube of a shifted grid, identified by scale and integer lattice index."""

    grid: ShiftedGrid = field(compare=False, repr=False)
    k: int = 0
    idx: tuple = ()

    def __post_init__(self):
        if len(self.idx) != self.grid.dim:
            raise InputError("lattice index length must equal the grid dimension")

    def __eq__(self, other):
        return (
            isinstance(other, GridCube)
            and self.grid is other.grid
            and self.k == other.k
            and self.idx == other.idx
        )

    def __hash__(self):
        return hash((id(self.grid), self.k, self.idx))

    @property
    def side(self) -> float:
        return self.grid.side(self.k)

    @property
    def low(self) -> np.ndarray:
        g = self.grid
        return g.lam * (g.shift(self.k) + 2.0**self.k * np.asarray(self.idx))

    @property
    def cube(self) -> Cube:
        lo = self.low
        return Cube(tuple(lo + self.side / 2.0), self.side)

    def parent(self) -> "GridCube":
        g = self.grid
        if self.k >= g.k_max:
            raise ConfigurationError("parent scale outside the grid window")
        b = g.bits[:, self.k - g.k_min]
        idx = tuple(int((i + bi) // 2) for i, bi in zip(self.idx, b))
        return GridCube(g, self.k + 1, idx)

    def ancestor(self, k_target) -> "GridCube":
        gc = self
        while gc.k < k_target:
            gc = gc.parent()
        return gc

    def children(self) -> list:
        g = self.grid
        if self.k <= g.k_min:
            raise ConfigurationError("child scale outside the grid window")
        b = g.bits[:, self.k - 1 - g.k_min]
        axes = [(2 * i - int(bi), 2 * i + 1 - int(bi)) for i, bi in zip(self.idx, b)]
        out = []
        for m in range(2**g.dim):
            idx = tuple(axes[a][(m >> a) & 1] for a in range(g.dim))
            out.append(GridCube(g, self.k - 1, idx))
        return out

    def contains_cube(self, other: "GridCube") -> bool:
        if other.grid is self.grid:
            return other.k <= self.k and other.ancestor(self.k) == self
        slo, shi = self.low, self.low + self.side
        olo, ohi = other.low, other.low + other.side
        return bool(np.all(olo >= slo) and np.all(ohi <= shi))


def is_admissible(mu: DiscreteMeasure, grid: ShiftedGrid) -> bool:
    """True iff no atom lies on a cube face of the grid within the scale window.

    Faces of coarser scales are a subset of the finest-scale faces, so only
    k_min is checked; comparisons are exact in float arithmetic.
    """
    if mu.dim != grid.dim:
        raise InputError("measure and grid dimensions differ")
    if mu.is_empty:
        return True
    step = 2.0**grid.k_min
    rel = np.mod(mu.points / grid.lam - grid.shift(grid.k_min), step)
    return not bool(np.any(rel == 0.0))


def _face_gap(lo, hi, shift, step):
    """Distance from the interval [lo, hi] to the nearest lattice face; 0 if one is inside."""
    a = math.floor((lo - shift) / step)
    b = math.floor((hi - shift) / step)
    if b > a:
        return 0.0
    down = (lo - shift) - a * step
    up = (a + 1) * step - (hi - shift)
    return min(down, up)


def is_good(gc: GridCube, gp: GoodnessParams) -> bool:
    """(eps, r)-goodness of a grid cube, relative to the grid's scale window."""
    g = gc.grid
    lo = gc.low / g.lam
    hi = lo + 2.0**gc.k
    ell_i = g.side(gc.k)
    for kj in range(gc.k + gp.r + 1, g.k_max + 1):
        step = 2.0**kj
        shift = g.shift(kj)
        gap = min(_face_gap(lo[a], hi[a], shift[a], step) for a in range(g.dim))
        if g.lam * gap < ell_i**gp.epsilon * g.side(kj) ** (1.0 - gp.epsilon):
            return False
    return True


@dataclass
class PBadEstimate:
    p: float
    ci_low: float
    ci_high: float
    trials: int
    bad_count: int


def p_bad_mc(gp: GoodnessParams, dim, trials, seed, scales_above=32) -> PBadEstimate:
    """Monte-Carlo badness frequency of a fixed-size cube under random shifts.

    The tested cube has scale 0 and the window reaches r + scales_above above
    it; goodness beyond the window is not observable (and is reported as good).
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(trials)
    k_max = gp.r + scales_above
    bad = 0
    for ss in streams:
        grid = build_grid(dim, (0, k_max), ss)
        if not is_good(GridCube(grid, 0, (0,) * dim), gp):
            bad += 1
    p = bad / trials
    z = 1.959963984540054  # 95% Wilson interval
    den = 1 + z * z / trials
    mid = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return PBadEstimate(p, max(0.0, mid - half), min(1.0, mid + half), trials, bad)


@dataclass
class HaarRecord:
    """Martingale difference on one cube: parent average and per-child data."""

    node: GridCube
    parent_avg: np.ndarray  # (m,)
    children: list  # (child GridCube, atom ids, child avg (m,), child mass)
    norm2: float


class HaarCoefficients:
    """Martingale difference decomposition of f against (mu, grid) below a root cube."""

    def __init__(self, grid, root, measure, fvals, coarse_avg, records):
        self.grid = grid
        self.root = root
        self.measure = measure
        self.fvals = fvals  # (N, m)
        self.coarse_avg = coarse_avg  # (m,)
        self.records = records

    @property
    def total_diff_norm2(self) -> float:
        return float(sum(rec.norm2 for rec in self.records))

    @property
    def f_norm2(self) -> float:
        """||f||^2 in L^2(mu), all components summed."""
        return float(np.einsum("i,im->", self.measure.masses, self.fvals**2))

    @property
    def root_mass(self) -> float:
        return float(self.measure.masses.sum())

    def reconstruct(self) -> np.ndarray:
        """Coarse average plus telescoped differences, evaluated at every atom."""
        out = np.tile(self.coarse_avg, (len(self.measure), 1))
        for rec in self.records:
            for _, ids, avg, _ in rec.children:
                out[ids] += avg - rec.parent_avg
        return out

    def plancherel_residual(self) -> float:
        total = self.coarse_avg @ self.coarse_avg * self.root_mass + self.total_diff_norm2
        return abs(total - self.f_norm2) / max(self.f_norm2, 1e-300)


def _as_fvals(fvals, mu):
    if fvals is None:
        return np.ones((len(mu), 1))
    if callable(fvals):
        fvals = np.asarray([fvals(p) for p in mu.points], dtype=np.float64)
    fvals = np.asarray(fvals, dtype=np.float64)
    if fvals.ndim == 1:
        fvals = fvals[:, None]
    if fvals.shape[0] != len(mu):
        raise InputError("fvals length must equal the atom count")
    return fvals


def martingale_decompose(mu: DiscreteMeasure, grid: ShiftedGrid, root: GridCube,
                         fvals=None) -> HaarCoefficients:
    """Haar coefficients of f down to the scale where every cube holds one atom."""
    if not is_admissible(mu, grid):
        raise AdmissibilityError("grid is not admissible for this measure")
    if mu.is_empty:
        raise EmptyRegionError("cannot decompose against an empty measure")
    inside = root.cube.contains(mu.points)
    if not np.all(inside):
        raise InputError("support of the measure must lie inside the root cube")
    f = _as_fvals(fvals, mu)
    masses = mu.masses
    total = float(masses.sum())
    coarse = masses @ f / total
    records = []
    stack = [(root, np.arange(len(mu)), coarse)]
    while stack:
        node, ids, avg = stack.pop()
        if ids.size <= 1:
            continue
        if node.k <= grid.k_min:
            raise ConfigurationError(
                "scale window too shallow: multiple atoms in a finest-scale cube"
            )
        kidx = grid.atom_indices(mu.points[ids], node.k - 1)
        groups = {}
        for local, key in enumerate(map(tuple, kidx)):
            groups.setdefault(key, []).append(local)
        children = []
        for key in sorted(groups):
            sub = ids[np.asarray(groups[key])]
            child = GridCube(grid, node.k - 1, key)
            cmass = float(masses[sub].sum())
            cavg = masses[sub] @ f[sub] / cmass
            children.append((child, sub, cavg, cmass))
        if len(children) >= 2:
            norm2 = sum(cm * float((ca - avg) @ (ca - avg)) for _, _, ca, cm in children)
            records.append(HaarRecord(node, avg, children, norm2))
        for child, sub, cavg, _ in children:
            stack.append((child, sub, cavg))
    records.sort(key=lambda rec: (-rec.node.k, rec.node.idx))
    return HaarCoefficients(grid, root, mu, f, coarse, records)


@dataclass
class GoodBadSplit:
    good_norm2: float
    bad_norm2: float
    good_records: list
    bad_records: list


def project_good_bad(hc: HaarCoefficients, gp: GoodnessParams) -> GoodBadSplit:
    """Split the coefficient set by cube goodness."""
    good, bad = [], []
    for rec in hc.records:
        (good if is_good(rec.node, gp) else bad).append(rec)
    return GoodBadSplit(
        float(sum(r.norm2 for r in good)),
        float(sum(r.norm2 for r in bad)),
        good,
        bad,
    )


@dataclass
class BadEnergyEstimate:
    mean_fraction: float
    fractions: list


def auto_scale_range(mu: DiscreteMeasure, pad_low=2, pad_high=3) -> tuple:
    """Window covering [atom spacing / 2^pad_low, diameter * 2^pad_high]."""
    if len(mu) == 0:
        raise EmptyRegionError("empty measure")
    bb = mu.bounding_box()
    k_max = math.ceil(math.log2(max(bb.side, 1e-12))) + pad_high
    if len(mu) == 1:
        return (k_max - 8, k_max)
    spacing = _backend.pair_min_dist(mu.points)
    k_min = math.floor(math.log2(spacing)) - pad_low
    return (min(k_min, k_max - 1), k_max)


def root_cube_for(grid: ShiftedGrid, mu: DiscreteMeasure) -> GridCube:
    """Smallest grid cube in the window containing the whole support."""
    if mu.is_empty:
        raise EmptyRegionError("empty measure")
    center = (mu.points.min(axis=0) + mu.points.max(axis=0)) / 2.0
    diam = float(np.max(mu.points.max(axis=0) - mu.points.min(axis=0)))
    k = max(grid.k_min, math.ceil(math.log2(max(diam, 2.0**grid.k_min))))
    while k <= grid.k_max:
        gc = grid.cube_containing(center, k)
        if np.all(gc.cube.contains(mu.points)):
            return gc
        k += 1
    raise ConfigurationError("no grid cube in the window contains the support")


def bad_energy_mc(mu: DiscreteMeasure, fvals, gp: GoodnessParams, trials, seed) -> BadEnergyEstimate:
    """Average over random grids of ||P_bad f||^2 / ||f||^2.

    Trials whose grid is inadmissible or fails to hold the support in one
    window cube are skipped (both are probability-zero events up to the
    finite bit depth)."""
    streams = np.random.SeedSequence(seed).spawn(trials)
    k_lo, k_hi = auto_scale_range(mu, pad_high=5)
    fractions = []
    for ss in streams:
        grid = build_grid(mu.dim, (k_lo, k_hi), ss)
        if not is_admissible(mu, grid):
            continue
        try:
            root = root_cube_for(grid, mu)
        except ConfigurationError:
            continue
        hc = martingale_decompose(mu, grid, root, fvals)
        split = project_good_bad(hc, gp)
        fractions.append(split.bad_norm2 / max(hc.f_norm2, 1e-300))
    if not fractions:
        raise AdmissibilityError("no usable grid encountered")
    return BadEnergyEstimate(float(np.mean(fractions)), fractions)


def _bulk_lows(grid: ShiftedGrid, k: int, idx: np.ndarray) -> np.ndarray:
    return grid.lam * (grid.shift(k)[None, :] + 2.0**k * idx)


def _bulk_children(grid: ShiftedGrid, k: int, idx: np.ndarray) -> np.ndarray:
    """Child indices at scale k-1 for an (M, n) index array; returns (M * 2^n, n)."""
    b = grid.bits[:, k - 1 - grid.k_min]
    base = 2 * idx - b[None, :]
    n = grid.dim
    offs = np.array(list(np.ndindex(*(2,) * n)), dtype=np.int64)
    return (base[:, None, :] + offs[None, :, :]).reshape(-1, n)


def is_good_bulk(grid: ShiftedGrid, k: int, idx: np.ndarray, gp: GoodnessParams) -> np.ndarray:
    """Vectorized (eps, r)-goodness for many cubes of one scale."""
    lows = _bulk_lows(grid, k, idx) / grid.lam
    highs = lows + 2.0**k
    ell_i = grid.side(k)
    good = np.ones(idx.shape[0], dtype=bool)
    for kj in range(k + gp.r + 1, grid.k_max + 1):
        step = 2.0**kj
        shift = grid.shift(kj)
        rel_lo = lows - shift[None, :]
        rel_hi = highs - shift[None, :]
        a = np.floor(rel_lo / step)
        inside = np.floor(rel_hi / step) > a
        gap = np.minimum(rel_lo - a * step, (a + 1) * step - rel_hi)
        gap[inside] = 0.0
        mind = gap.min(axis=1) * grid.lam
        good &= mind >= ell_i**gp.epsilon * grid.side(kj) ** (1.0 - gp.epsilon)
    return good


def whitney(Q, dual_grid: ShiftedGrid, gp: GoodnessParams, C0: float = 16.0,
            mode: str = "full", primary_grid: ShiftedGrid | None = None,
            max_depth: int = 12) -> list:
    """Maximal dual-grid cubes inside Q in good position relative to its boundary.

    `mode="full"` tests the distance condition against every intermediate
    primary-grid cube containing K (the containment reading of the
    quantifier); `mode="boundary"` tests only against Q itself. The descent
    stops max_depth levels below the top admissible scale: the cell family
    is infinite toward the boundary, so a finite window is unavoidable and
    cells still failing at the floor are dropped.
    """
    if 2.0 ** (gp.r * (1.0 - gp.epsilon)) <= 4.0 * C0:
        raise ConfigurationError(
            f"whitney requires 2^(r(1-eps)) > 4*C0; got r={gp.r}, eps={gp.epsilon}, C0={C0}"
        )
    Qbox = Q.cube if isinstance(Q, GridCube) else Q
    if primary_grid is None and isinstance(Q, GridCube):
        primary_grid = Q.grid
    k_top = dual_grid.k_max
    while k_top > dual_grid.k_min and dual_grid.side(k_top) > 2.0 ** (-gp.r) * Qbox.side:
        k_top -= 1
    if dual_grid.side(k_top) > 2.0 ** (-gp.r) * Qbox.side:
        return []
    k_floor = max(dual_grid.k_min, k_top - max_depth)
    qlo, qhi = Qbox.low, Qbox.high
    eps1 = 1.0 - gp.epsilon

    lo_idx = dual_grid.atom_indices(qlo[None, :], k_top)[0]
    hi_idx = dual_grid.atom_indices((qhi - Qbox.side * 1e-12)[None, :], k_top)[0]
    grids_nd = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo_idx, hi_idx)], indexing="ij")
    idx = np.stack([g.ravel() for g in grids_nd], axis=1).astype(np.int64)

    selected = []
    k = k_top
    while idx.shape[0] and k >= k_floor:
        side = dual_grid.side(k)
        lows = _bulk_lows(dual_grid, k, idx)
        highs = lows + side
        meets = np.all(highs > qlo, axis=1) & np.all(lows < qhi, axis=1)
        idx, lows, highs = idx[meets], lows[meets], highs[meets]
        contained = np.all(lows >= qlo, axis=1) & np.all(highs <= qhi, axis=1)
        ok = contained.copy()
        if np.any(ok):
            base_gap = np.minimum(lows - qlo, qhi - highs).min(axis=1)
            ok &= base_gap >= side**gp.epsilon * Qbox.side**eps1
        if mode == "full" and primary_grid is not None and np.any(ok):
            centers = lows + side / 2.0
            for kp in range(primary_grid.k_min, primary_grid.k_max + 1):
                pside = primary_grid.side(kp)
                if pside < (2.0**gp.r) * side:
                    continue
                if pside > Qbox.side:
                    break
                pidx = np.floor(
                    (centers / primary_grid.lam - primary_grid.shift(kp)[None, :]) / 2.0**kp
                )
                plo = primary_grid.lam * (primary_grid.shift(kp)[None, :] + 2.0**kp * pidx)
                phi = plo + pside
                applies = (
                    np.all(lows >= plo, axis=1)
                    & np.all(highs <= phi, axis=1)
                    & np.all(plo >= qlo, axis=1)
                    & np.all(phi <= qhi, axis=1)
                )
                gap = np.minimum(lows - plo, phi - highs).min(axis=1)
                ok &= ~(applies & (gap < side**gp.epsilon * pside**eps1))
        for row in idx[ok]:
            selected.append(GridCube(dual_grid, k, tuple(int(i) for i in row)))
        descend = ~ok
        idx = idx[descend]
        if idx.shape[0] == 0 or k - 1 < k_floor:
            break
        idx = _bulk_children(dual_grid, k, idx)
        k -= 1
    selected.sort(key=lambda gc: (-gc.k, gc.idx))
    return selected
