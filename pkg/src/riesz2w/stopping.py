"""Stopping trees driven by the big-average / big-energy rules, the
sigma-Carleson check, quasi-orthogonal projections, the functional-energy
witness, and the tent-measure size diagnostic.

Stopping nodes live on the r-sublattice of the decomposition grid (scales
congruent to the root scale mod r); candidates are restricted to cubes of
positive sigma-mass, since the average rule is undefined and the energy
rule vacuous on sigma-null cubes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConfigurationError, CoverageError, InputError
from .geometry import Cube, Difference, DiscreteMeasure, RieszDimension, cube_mass
from .grids import GoodnessParams, GridCube, HaarCoefficients, is_good, whitney
from .poisson import energy, poisson_avg


@dataclass
class StoppingThresholds:
    """Average multiplier (gamma), energy multiplier, and the R constant used
    by the energy rule. Pass math.inf to disable a rule."""

    gamma: float = 4.0
    energy_multiplier: float = 10.0
    r_value: float | None = None

    def __post_init__(self):
        if not self.gamma >= 1.0:
            raise InputError(f"gamma must be >= 1, got {self.gamma}")
        if not self.energy_multiplier > 0:
            raise InputError("energy multiplier must be positive")
        if self.r_value is None:
            raise ConfigurationError("the energy rule needs an R value (math.inf disables it)")


@dataclass
class StoppingNode:
    gc: GridCube
    reason: str  # root | big-average | big-energy
    parent: int | None
    children: list = field(default_factory=list)
    sigma_mass: float = 0.0
    avg_abs_f: float = 0.0


class StoppingTree:
    def __init__(self, nodes, grid, gp, thresholds):
        self.nodes = nodes
        self.grid = grid
        self.gp = gp
        self.thresholds = thresholds

    @property
    def root(self) -> StoppingNode:
        return self.nodes[0]

    def __len__(self) -> int:
        return len(self.nodes)

    def deepest_containing(self, gc: GridCube) -> int | None:
        """Index of the minimal node whose cube contains gc (same grid)."""
        if not self.root.gc.contains_cube(gc):
            return None
        cur = 0
        while True:
            nxt = None
            for ci in self.nodes[cur].children:
                if self.nodes[ci].gc.contains_cube(gc):
                    nxt = ci
                    break
            if nxt is None:
                return cur
            cur = nxt

    def assign_r_parent(self, box: Cube, side: float) -> int | None:
        """Minimal node F with box inside F and 2^r * side <= l(F); the root
        accepts any coefficient it contains (shallow coefficients fall back
        to the root rather than erroring)."""
        rootc = self.root.gc.cube
        if not (np.all(box.low >= rootc.low) and np.all(box.high <= rootc.high)):
            return None
        scale_ok = 2.0**self.gp.r * side
        cur, best = 0, 0
        while True:
            nxt = None
            for ci in self.nodes[cur].children:
                c = self.nodes[ci].gc.cube
                if np.all(box.low >= c.low) and np.all(box.high <= c.high):
                    nxt = ci
                    break
            if nxt is None:
                return best
            cur = nxt
            if scale_ok <= self.nodes[cur].gc.side:
                best = cur

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_json(),
            "r": self.gp.r,
            "epsilon": self.gp.epsilon,
            "thresholds": {
                "gamma": self.thresholds.gamma,
                "energy_multiplier": self.thresholds.energy_multiplier,
                "r_value": self.thresholds.r_value,
            },
            "nodes": [
                {
                    "k": nd.gc.k,
                    "idx": list(nd.gc.idx),
                    "reason": nd.reason,
                    "parent": nd.parent,
                    "sigma_mass": nd.sigma_mass,
                }
                for nd in self.nodes
            ],
        }


def build_stopping_tree(hc_f: HaarCoefficients, sigma: DiscreteMeasure, w: DiscreteMeasure,
                        rd: RieszDimension, gp: GoodnessParams,
                        thresholds: StoppingThresholds, C0: float = 16.0,
                        whitney_provider=None) -> StoppingTree:
    """Recursive stopping construction under the root of hc_f.

    Under each minimal node F, the maximal r-sublattice cubes Q (with
    sigma(Q) > 0) firing the big-average or big-energy rule become children.
    """
    grid = hc_f.grid
    root = hc_f.root
    absf = np.abs(hc_f.fvals[:, 0])
    masses = hc_f.measure.masses
    pts = hc_f.measure.points
    if whitney_provider is None:
        def whitney_provider(Q):
            return whitney(Q, grid, gp, C0=C0, mode="boundary", max_depth=6)

    def avg_over(ids):
        m = masses[ids]
        return float(m @ absf[ids] / m.sum())

    def energy_sum(Q: GridCube, Fbox: Cube) -> float:
        total = 0.0
        for K in whitney_provider(Q):
            Kc = K.cube
            restricted = sigma.restrict(Difference(Fbox, Kc.dilate(C0)))
            pg = poisson_avg("gradient", rd, restricted, Kc)
            e2 = energy(w, Kc, form=2).squared
            total += pg * pg * e2 * cube_mass(w, Kc)
        return total

    nodes = [StoppingNode(root, "root", None, sigma_mass=float(masses.sum()),
                          avg_abs_f=avg_over(np.arange(len(pts))))]
    gamma, mult, rval = thresholds.gamma, thresholds.energy_multiplier, thresholds.r_value
    energy_on = math.isfinite(mult) and math.isfinite(rval)
    stack = [(0, np.arange(len(pts)))]
    while stack:
        fi, f_ids = stack.pop()
        fnode = nodes[fi]
        favg = fnode.avg_abs_f
        fbox = fnode.gc.cube
        frontier = [(fnode.gc, f_ids)]
        while frontier:
            holder, ids = frontier.pop()
            k_next = holder.k - gp.r
            if k_next < grid.k_min:
                continue
            kidx = grid.atom_indices(pts[ids], k_next)
            groups = {}
            for local, key in enumerate(map(tuple, kidx)):
                groups.setdefault(key, []).append(local)
            for key in sorted(groups):
                sub = ids[np.asarray(groups[key])]
                Q = GridCube(grid, k_next, key)
                qavg = avg_over(sub)
                fired = None
                if gamma != math.inf and qavg >= gamma * favg:
                    fired = "big-average"
                elif energy_on and energy_sum(Q, fbox) >= mult * rval * rval * float(
                    masses[sub].sum()
                ):
                    fired = "big-energy"
                if fired:
                    nodes.append(
                        StoppingNode(Q, fired, fi, sigma_mass=float(masses[sub].sum()),
                                     avg_abs_f=qavg)
                    )
                    nodes[fi].children.append(len(nodes) - 1)
                    stack.append((len(nodes) - 1, sub))
                else:
                    frontier.append((Q, sub))
    return StoppingTree(nodes, grid, gp, thresholds)


@dataclass
class CarlesonResult:
    max_ratio: float
    ratios: list
    degenerate_nodes: int


def carleson_check(tree: StoppingTree, sigma: DiscreteMeasure) -> CarlesonResult:
    """max over nodes of the summed child sigma-mass fraction."""
    worst, ratios, degenerate = 0.0, [], 0
    for nd in tree.nodes:
        base = cube_mass(sigma, nd.gc.cube)
        if base <= 0.0:
            degenerate += 1
            continue
        child = sum(cube_mass(sigma, tree.nodes[ci].gc.cube) for ci in nd.children)
        ratio = child / base
        ratios.append(ratio)
        worst = max(worst, ratio)
    return CarlesonResult(worst, ratios, degenerate)


@dataclass
class StoppingProjections:
    f_norm2: dict  # node index -> ||P_F f||^2
    g_norm2: dict
    f_avg: dict
    quasi_value: float
    sum_f_norm2: float


def stopping_projections(hc_f: HaarCoefficients, hc_g: HaarCoefficients,
                         tree: StoppingTree) -> StoppingProjections:
    """Partition Haar coefficients by the stopping tree and evaluate the
    quasi-orthogonality sum."""
    f_norm2 = {i: 0.0 for i in range(len(tree))}
    g_norm2 = {i: 0.0 for i in range(len(tree))}
    for rec in hc_f.records:
        ni = tree.deepest_containing(rec.node)
        if ni is None:
            raise CoverageError("an f-coefficient lies outside the stopping root")
        f_norm2[ni] += rec.norm2
    for rec in hc_g.records:
        ni = tree.assign_r_parent(rec.node.cube, rec.node.side)
        if ni is None:
            raise CoverageError("a g-coefficient lies outside the stopping root")
        g_norm2[ni] += rec.norm2
    f_avg = {i: tree.nodes[i].avg_abs_f for i in range(len(tree))}
    sigma_mass = {i: tree.nodes[i].sigma_mass for i in range(len(tree))}
    fn = math.sqrt(hc_f.f_norm2)
    gn = math.sqrt(hc_g.f_norm2)
    quasi = 0.0
    if fn > 0 and gn > 0:
        for i in range(len(tree)):
            quasi += (
                f_avg[i] * math.sqrt(max(sigma_mass[i], 0.0)) + math.sqrt(f_norm2[i])
            ) * math.sqrt(g_norm2[i])
        quasi /= fn * gn
    return StoppingProjections(f_norm2, g_norm2, f_avg, quasi, float(sum(f_norm2.values())))


def _maximal_good(wgrid, Fbox: Cube, pi_side: float, gp: GoodnessParams,
                  max_depth: int = 10) -> list:
    """Maximal good w-grid cubes Q inside Fbox with 2^r l(Q) <= pi_side.

    Vectorized per-scale descent with a depth cap (the family is infinite
    toward the boundary in a deep window)."""
    from .grids import _bulk_children, _bulk_lows, is_good_bulk

    k_top = wgrid.k_max
    while k_top > wgrid.k_min and wgrid.side(k_top) > 2.0 ** (-gp.r) * pi_side:
        k_top -= 1
    if wgrid.side(k_top) > 2.0 ** (-gp.r) * pi_side:
        return []
    k_floor = max(wgrid.k_min, k_top - max_depth)
    flo, fhi = Fbox.low, Fbox.high
    lo_idx = wgrid.atom_indices(flo[None, :], k_top)[0]
    hi_idx = wgrid.atom_indices((fhi - Fbox.side * 1e-12)[None, :], k_top)[0]
    mesh = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo_idx, hi_idx)], indexing="ij")
    idx = np.stack([g.ravel() for g in mesh], axis=1).astype(np.int64)
    out = []
    k = k_top
    while idx.shape[0] and k >= k_floor:
        side = wgrid.side(k)
        lows = _bulk_lows(wgrid, k, idx)
        highs = lows + side
        meets = np.all(highs > flo, axis=1) & np.all(lows < fhi, axis=1)
        idx, lows, highs = idx[meets], lows[meets], highs[meets]
        if idx.shape[0] == 0:
            break
        ok = np.all(lows >= flo, axis=1) & np.all(highs <= fhi, axis=1)
        ok &= is_good_bulk(wgrid, k, idx, gp)
        for row in idx[ok]:
            out.append(GridCube(wgrid, k, tuple(int(i) for i in row)))
        idx = idx[~ok]
        if idx.shape[0] == 0 or k - 1 < k_floor:
            break
        idx = _bulk_children(wgrid, k, idx)
        k -= 1
    out.sort(key=lambda gc: (-gc.k, gc.idx))
    return out


def functional_energy_sum(rd: RieszDimension, sigma: DiscreteMeasure, w: DiscreteMeasure,
                          tree: StoppingTree, hc_coord_w: HaarCoefficients, f) -> float:
    """Left side of the functional-energy inequality divided by ||f||^2_sigma.

    hc_coord_w is the Haar decomposition of the coordinate functions in
    L^2(w); cell weights are the coordinate difference norms (the measure
    eta-tilde of the dual formulation).
    """
    check = carleson_check(tree, sigma)
    if check.max_ratio > 0.5 + 1e-12:
        raise InputError(f"tree is not sigma-Carleson: max child ratio {check.max_ratio}")
    f = np.asarray(f, dtype=np.float64).ravel()
    if f.shape[0] != len(sigma):
        raise InputError("f must assign one value per sigma atom")
    if np.any(f < 0):
        raise InputError("f must be nonnegative")
    fnorm2 = float(sigma.masses @ f**2)
    if fnorm2 == 0.0:
        return 0.0
    gp = tree.gp
    wgrid = hc_coord_w.grid
    assign = [tree.assign_r_parent(rec.node.cube, rec.node.side) for rec in hc_coord_w.records]
    total = 0.0
    for fi, node in enumerate(tree.nodes):
        Fbox = node.gc.cube
        pi_side = tree.nodes[node.parent].gc.side if node.parent is not None else node.gc.side
        outside = ~Fbox.contains(sigma.points)
        wts = sigma.masses * f * outside
        for K in _maximal_good(wgrid, Fbox, pi_side, gp):
            kc = K.cube
            d = rd.d
            pg = _backend.box_poisson_sum(
                sigma.points, wts, kc.low, kc.high, kc.ell, d + 1.0, kc.ell ** (d + 1.0)
            )
            if pg == 0.0:
                continue
            coord2 = 0.0
            for rec, ni in zip(hc_coord_w.records, assign):
                if ni == fi and K.contains_cube(rec.node):
                    coord2 += rec.norm2
            total += pg * pg * coord2 / kc.ell**2
    return total / fnorm2


@dataclass
class TentMeasure:
    """Atoms in the upper half-space weighted by coordinate Haar energies."""

    points: np.ndarray
    heights: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_haar(cls, hc: HaarCoefficients) -> "TentMeasure":
        pts, hts, wts = [], [], []
        for rec in hc.records:
            c = rec.node.cube
            pts.append(c.center)
            hts.append(c.side)
            wts.append(rec.norm2)
        n = hc.grid.dim
        return cls(
            np.array(pts, dtype=np.float64).reshape(len(pts), n),
            np.array(hts, dtype=np.float64),
            np.array(wts, dtype=np.float64),
        )

    def __len__(self) -> int:
        return self.points.shape[0]

    def tent_mass(self, cells) -> float:
        """Mass inside the union of Box_K = K x [0, l(K)) over the cells."""
        if len(self) == 0:
            return 0.0
        hit = np.zeros(len(self), dtype=bool)
        for K in cells:
            kc = K.cube if isinstance(K, GridCube) else K
            hit |= kc.contains(self.points) & (self.heights < kc.side)
        return float(self.weights[hit].sum())


@dataclass
class TentSizeResult:
    value: float
    argmax: Cube | None
    skipped: int


def tent_size(lam: TentMeasure, sigma: DiscreteMeasure, rd: RieszDimension, family,
              whitney_provider, ambient: Cube | None = None) -> TentSizeResult:
    """sup over the family of P^g(f region, Q)^2 lam(Tent_Q) / (sigma(Q) l(Q)^2).

    The Poisson region is the complement of Q (intersected with `ambient`
    when given); sigma-null test cubes are skipped.
    """
    best, arg, skipped = 0.0, None, 0
    for Q in family.cubes if hasattr(family, "cubes") else family:
        box = Q.cube if isinstance(Q, GridCube) else Q
        smass = cube_mass(sigma, box)
        if smass <= 0.0:
            skipped += 1
            continue
        outside = ~box.contains(sigma.points)
        if ambient is not None:
            outside &= ambient.contains(sigma.points)
        wts = sigma.masses * outside
        d = rd.d
        pg = _backend.box_poisson_sum(
            sigma.points, wts, box.low, box.high, box.ell, d + 1.0, box.ell ** (d + 1.0)
        )
        val = pg * pg * lam.tent_mass(whitney_provider(Q)) / (smass * box.ell**2)
        if val > best:
            best, arg = val, box
    return TentSizeResult(best, arg, skipped)
