"""Deterministic weight generators: sampled Lebesgue and power weights,
self-similar Cantor measures, hyperplane-concentrated adversarial weights,
and the constructive near-null counterexample.

All generators are bit-deterministic for fixed parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .geometry import Cube, DiscreteMeasure, RieszDimension
from .kernel import KernelParams, riesz_apply, riesz_field


def _grid_centers(cube: Cube, resolution: int) -> np.ndarray:
    if resolution < 2:
        raise InputError("resolution must be at least 2")
    axes = [
        lo + (np.arange(resolution) + 0.5) * cube.side / resolution for lo in cube.low
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def lebesgue_sample(n: int, resolution: int, cube: Cube | None = None) -> DiscreteMeasure:
    """Uniform grid of atoms, each carrying its cell's Lebesgue measure."""
    cube = cube or Cube((0.5,) * n, 1.0)
    pts = _grid_centers(cube, resolution)
    cell = (cube.side / resolution) ** n
    return DiscreteMeasure(pts, np.full(pts.shape[0], cell), dim=n)


def power_doubling(n: int, alpha: float, resolution: int,
                   cube: Cube | None = None) -> DiscreteMeasure:
    """Sampled |x|^alpha weight; local integrability requires alpha > -n."""
    if alpha <= -n:
        raise InputError(f"power weight needs alpha > -n, got alpha={alpha}")
    cube = cube or Cube((0.5,) * n, 1.0)
    pts = _grid_centers(cube, resolution)
    radii = np.linalg.norm(pts, axis=1)
    if np.any(radii == 0.0) and alpha < 0:
        raise InputError("a cell center sits at the origin; shift the cube or change resolution")
    cell = (cube.side / resolution) ** n
    return DiscreteMeasure(pts, radii**alpha * cell, dim=n)


def cantor_ad(n: int, d: float, depth: int) -> DiscreteMeasure:
    """Four-branch self-similar measure with contraction 4^(-1/d) on [0,1]^2.

    Ahlfors-David regular of dimension d; d = 2 degenerates to the full
    uniform grid and d = 1 is the 1/4-corner Cantor geometry.
    """
    if n != 2:
        raise InputError("cantor_ad supports n = 2")
    if not 0 < d <= 2:
        raise InputError(f"cantor dimension must lie in (0, 2], got {d}")
    if depth < 1 or 4**depth > 4_000_000:
        raise InputError(f"depth {depth} outside the supported budget")
    rho = 4.0 ** (-1.0 / d)
    corners = np.array([[0.0, 0.0], [1.0 - rho, 0.0], [0.0, 1.0 - rho], [1.0 - rho, 1.0 - rho]])
    lows = np.zeros((1, 2))
    scale = 1.0
    for _ in range(depth):
        lows = (lows[:, None, :] + scale * corners[None, :, :]).reshape(-1, 2)
        scale *= rho
    pts = lows + scale / 2.0
    return DiscreteMeasure(pts, np.full(pts.shape[0], 4.0 ** (-depth)), dim=2)


def hyperplane_concentrated(n: int, thickness: float, resolution: int) -> DiscreteMeasure:
    """Atoms within `thickness` of the hyperplane {x_n = 1/2} over a unit patch.

    Columns alternate between offsets +-thickness/4, so the support band has
    width thickness/2; at thickness 0 the measure is exactly coplanar.
    """
    if thickness < 0:
        raise InputError("thickness must be nonnegative")
    if n < 2:
        raise InputError("hyperplane generator needs n >= 2")
    patch = Cube((0.5,) * (n - 1), 1.0)
    base = _grid_centers(patch, resolution)
    parity = np.sum(np.floor(base * resolution).astype(np.int64), axis=1) % 2
    last = 0.5 + (2.0 * parity - 1.0) * (thickness / 4.0)
    pts = np.concatenate([base, last[:, None]], axis=1)
    return DiscreteMeasure(pts, np.full(pts.shape[0], resolution ** -(n - 1)), dim=n)


@dataclass
class CounterexampleRecord:
    eps: float
    lam: float
    radius: float
    mass_per_atom: float
    s_side: float
    support_distance: float
    support_distance_required: float
    riesz_at_origin: list
    gradient_residuals: dict
    sup_riesz_on_s: float
    lhs_exr: float
    rhs_exr: float
    passed: bool
    notes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return dict(self.__dict__)


def counterexample_weight(n: int, d: float, eps: float):
    """Four-atom weight far from a codimension-one square on which the Riesz
    transform is nearly null.

    With lam = eps^-2 and S = [-lam^(-1/2), lam^(-1/2)]^(n-1) x {0}, atoms sit
    at (+-lam/sqrt(d), +-lam); the radius makes the tangential gradient of
    R 1 vanish at the origin, and masses are normalized so that
    int (1 + dist(S, x)^(d+1))^-1 d(sigma) = 1.
    """
    if n != 2:
        raise InputError("the reference counterexample path is implemented for n = 2")
    if not (max(0.0, n - 2.0) < d <= n) or d == n - 1:
        raise InputError(f"need max(0, n-2) < d <= n with d != n-1, got d={d}")
    if not 0 < eps < 1:
        raise InputError(f"eps must lie in (0, 1), got {eps}")
    lam = eps**-2
    half_s = lam**-0.5
    s_side = 2.0 * half_s
    rho = lam / math.sqrt(d)
    atoms = np.array([[rho, lam], [-rho, lam], [rho, -lam], [-rho, -lam]])
    dist_s = np.hypot(np.maximum(np.abs(atoms[:, 0]) - half_s, 0.0), np.abs(atoms[:, 1]))
    mass = 1.0 / float(np.sum(1.0 / (1.0 + dist_s ** (d + 1.0))))
    sigma = DiscreteMeasure(atoms, np.full(4, mass), dim=2)

    rd = RieszDimension(n, d)
    params = KernelParams(rd)
    origin = np.zeros(2)
    r0 = riesz_apply(params, sigma, None, origin)
    h = 1e-3
    grads = {}
    for k in range(n - 1):  # tangential directions only
        e = np.zeros(2)
        e[k] = h
        diff = (riesz_field(params, sigma, None, np.stack([e, -e]))[0]
                - riesz_field(params, sigma, None, np.stack([e, -e]))[1]) / (2 * h)
        for j in range(n):
            grads[f"d{k + 1}R{j + 1}"] = float(diff[j])

    ts = np.linspace(-half_s, half_s, 101)
    grid = np.stack([ts, np.zeros_like(ts)], axis=1)
    vals = riesz_field(params, sigma, None, grid)
    sup_s = float(np.max(np.linalg.norm(vals, axis=1)))
    rhs = float(
        np.sum(sigma.masses * s_side / (s_side ** (d + 1.0) + dist_s ** (d + 1.0)))
    )
    lhs = sup_s / eps
    support_dist = float(dist_s.min())
    required = s_side / eps
    passed = (support_dist >= required) and (lhs <= rhs)
    record = CounterexampleRecord(
        eps=eps,
        lam=lam,
        radius=rho,
        mass_per_atom=mass,
        s_side=s_side,
        support_distance=support_dist,
        support_distance_required=required,
        riesz_at_origin=[float(v) for v in r0],
        gradient_residuals=grads,
        sup_riesz_on_s=sup_s,
        lhs_exr=lhs,
        rhs_exr=rhs,
        passed=bool(passed),
        notes={"balance": "lam^2 = d * rho^2", "taylor_sup_scale": sup_s / max(half_s**2, 1e-300)},
    )
    return sigma, record


def doubling_audit(w: DiscreteMeasure, cubes) -> float:
    """max over the cubes of w(2Q)/w(Q), skipping w-null cubes."""
    from .geometry import cube_mass

    worst = 0.0
    for Q in cubes:
        base = cube_mass(w, Q)
        if base > 0:
            worst = max(worst, cube_mass(w, Q.dilate(2.0)) / base)
    return worst


def doubling_corpus(seed: int = 0, n_pairs: int = 20) -> list:
    """Deterministic corpus of doubling-type weight pairs on the plane.

    Each entry is (name, sigma, w) with at most 500 atoms per measure,
    built from Lebesgue and power-law samples at varied centers and scales.
    """
    rng = np.random.default_rng(seed)
    pairs = []
    alphas = [-0.8, -0.4, 0.0, 0.5, 1.0, 1.6, 2.5]
    for i in range(n_pairs):
        res = int(rng.integers(10, 17))
        cube_a = Cube((float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.2, 0.8))),
                      float(rng.uniform(0.6, 1.6)))
        cube_b = Cube((float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.2, 0.8))),
                      float(rng.uniform(0.6, 1.6)))
        kind = i % 4
        if kind == 0:
            sig = lebesgue_sample(2, res, cube_a)
            ww = lebesgue_sample(2, res + 1, cube_b)
            name = f"leb{res}-leb{res + 1}"
        elif kind == 1:
            a = alphas[i % len(alphas)]
            sig = power_doubling(2, a, res, cube_a)
            ww = lebesgue_sample(2, res, cube_b)
            name = f"pow{a}-leb{res}"
        elif kind == 2:
            a = alphas[i % len(alphas)]
            b = alphas[(i + 3) % len(alphas)]
            sig = power_doubling(2, a, res, cube_a)
            ww = power_doubling(2, b, res + 1, cube_b)
            name = f"pow{a}-pow{b}"
        else:
            sig = lebesgue_sample(2, res, cube_a)
            ww = power_doubling(2, alphas[(i + 1) % len(alphas)], res, cube_b)
            name = f"leb{res}-pow"
        pairs.append((f"{i:02d}-{name}", sig, ww))
    return pairs
