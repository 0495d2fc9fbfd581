"""Points, axis-aligned cubes, and discrete measures.

Cube membership is half-open, [center - side/2, center + side/2) per axis,
so dyadic children partition their parent exactly. Distances use the closed
cube. All objects are immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EmptyRegionError, InputError


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube: geometric center and positive side length."""

    center: tuple
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "side", float(self.side))
        if not self.side > 0:
            raise InputError(f"cube side must be positive, got {self.side}")
        if not all(np.isfinite(self.center)):
            raise InputError("cube center must be finite")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def ell(self) -> float:
        """Scale l(Q) = |Q|^(1/n), i.e. the side length."""
        return self.side

    @property
    def low(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2.0

    @property
    def high(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2.0

    @property
    def volume(self) -> float:
        return self.side**self.dim

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Half-open membership mask for an (N, n) array (or a single point)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        if pts.shape[1] != self.dim:
            raise DimensionMismatchError(f"points have dim {pts.shape[1]}, cube has {self.dim}")
        lo, hi = self.low, self.high
        return np.all((pts >= lo) & (pts < hi), axis=1)

    def dist(self, pts: np.ndarray) -> np.ndarray:
        """Euclidean distance from each point to the closed cube (0 inside)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        if pts.shape[1] != self.dim:
            raise DimensionMismatchError(f"points have dim {pts.shape[1]}, cube has {self.dim}")
        gap = np.maximum(self.low - pts, 0.0) + np.maximum(pts - self.high, 0.0)
        return np.sqrt(np.einsum("in,in->i", gap, gap))

    def dilate(self, c: float) -> "Cube":
        """Concentric cube with side c * l(Q)."""
        if not c > 0:
            raise InputError(f"dilation factor must be positive, got {c}")
        return Cube(self.center, self.side * c)


def dilate(Q: Cube, c: float) -> Cube:
    return Q.dilate(c)


def dist_to_cube(x, Q: Cube) -> float:
    """dist(x, Q) for a single point x."""
    return float(Q.dist(np.asarray(x, dtype=np.float64))[0])


def boundary_distance(K: Cube, P: Cube) -> float:
    """inf over x in K, y on the boundary surface of P of |x - y| (closed boxes)."""
    if K.dim != P.dim:
        raise DimensionMismatchError("cube dimensions differ")
    klo, khi, plo, phi = K.low, K.high, P.low, P.high
    inside = np.all(klo >= plo) and np.all(khi <= phi)
    outside = np.any(khi < plo) or np.any(klo > phi)
    if inside:
        return float(np.minimum(klo - plo, phi - khi).min())
    if outside:
        gap = np.maximum(plo - khi, 0.0) + np.maximum(klo - phi, 0.0)
        return float(np.sqrt(np.sum(gap**2)))
    return 0.0  # K straddles the boundary of P


class Complement:
    """R^n minus the half-open cube."""

    def __init__(self, cube: Cube):
        self.cube = cube

    def contains(self, pts) -> np.ndarray:
        return ~self.cube.contains(pts)


class Difference:
    """Points of `outer` not in `inner` (both half-open)."""

    def __init__(self, outer: Cube, inner: Cube):
        if outer.dim != inner.dim:
            raise DimensionMismatchError("cube dimensions differ")
        self.outer = outer
        self.inner = inner

    def contains(self, pts) -> np.ndarray:
        return self.outer.contains(pts) & ~self.inner.contains(pts)


@dataclass(frozen=True)
class RieszDimension:
    """Ambient dimension n and kernel dimension d, 0 < d <= n."""

    n: int
    d: float

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise InputError(f"ambient dimension must be a positive integer, got {self.n}")
        if not 0 < self.d <= self.n:
            raise InputError(f"kernel dimension must satisfy 0 < d <= n, got d={self.d}")

    @property
    def is_codim_one(self) -> bool:
        """d = n - 1: accepted for kernel evaluation, rejected by theorem audits."""
        return self.d == self.n - 1


class DiscreteMeasure:
    """Finite weighted point cloud. Duplicate locations are merged on load."""

    def __init__(self, points, masses, dim: int | None = None):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ms = np.asarray(masses, dtype=np.float64).ravel()
        if pts.size == 0:
            pts = pts.reshape(0, dim if dim else 1)
        if dim is None:
            dim = pts.shape[1]
        if pts.shape[1] != dim:
            raise DimensionMismatchError(f"points have dim {pts.shape[1]}, expected {dim}")
        if pts.shape[0] != ms.shape[0]:
            raise InputError("points and masses must have equal length")
        if not np.all(np.isfinite(pts)):
            raise InputError("point coordinates must be finite")
        if not np.all(np.isfinite(ms)):
            raise InputError("masses must be finite")
        if np.any(ms <= 0):
            raise InputError("all masses must be positive")
        if pts.shape[0] > 1:
            order = np.lexsort(pts.T[::-1])
            pts, ms = pts[order], ms[order]
            same = np.all(pts[1:] == pts[:-1], axis=1)
            if np.any(same):
                group = np.concatenate([[0], np.cumsum(~same)])
                merged = np.zeros(group[-1] + 1)
                np.add.at(merged, group, ms)
                keep = np.concatenate([[True], ~same])
                pts, ms = pts[keep], merged
        self.points = pts
        self.masses = ms
        self.dim = dim
        self.points.setflags(write=False)
        self.masses.setflags(write=False)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    def bounding_box(self) -> Cube:
        if self.is_empty:
            raise EmptyRegionError("empty measure has no bounding box")
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        side = float(max((hi - lo).max(), 0.0))
        return Cube(tuple((lo + hi) / 2.0), max(side, 1e-300) * (1 + 1e-9))

    def restrict(self, region) -> "DiscreteMeasure":
        """New measure with atoms filtered by region membership; masses unchanged."""
        if region is None:
            return self
        mask = region.contains(self.points) if len(self) else np.zeros(0, dtype=bool)
        return DiscreteMeasure(self.points[mask], self.masses[mask], dim=self.dim)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "points": [{"x": list(p), "m": float(m)} for p, m in zip(self.points, self.masses)],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def from_json(cls, obj: dict) -> "DiscreteMeasure":
        if not isinstance(obj, dict) or "dim" not in obj or "points" not in obj:
            raise InputError('measure JSON must have "dim" and "points" fields')
        dim = obj["dim"]
        if not isinstance(dim, int) or dim < 1:
            raise InputError(f'"dim" must be a positive integer, got {dim!r}')
        pts, ms = [], []
        for i, entry in enumerate(obj["points"]):
            if not isinstance(entry, dict) or "x" not in entry or "m" not in entry:
                raise InputError(f'points[{i}]: each entry needs "x" and "m"')
            x = entry["x"]
            if len(x) != dim:
                raise InputError(f"points[{i}]: coordinate length {len(x)} != dim {dim}")
            m = entry["m"]
            if not (isinstance(m, (int, float)) and m > 0 and np.isfinite(m)):
                raise InputError(f"points[{i}]: mass must be finite and positive, got {m!r}")
            pts.append(x)
            ms.append(m)
        return cls(np.array(pts, dtype=np.float64).reshape(len(pts), dim), ms, dim=dim)

    @classmethod
    def load(cls, path) -> "DiscreteMeasure":
        with open(path) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as e:
                raise InputError(f"{path}: invalid JSON ({e})") from e
        return cls.from_json(obj)


def cube_mass(mu: DiscreteMeasure, Q: Cube) -> float:
    """Total mass of atoms inside the half-open cube."""
    if mu.dim != Q.dim:
        raise DimensionMismatchError(f"measure dim {mu.dim} != cube dim {Q.dim}")
    if mu.is_empty:
        return 0.0
    return float(mu.masses[Q.contains(mu.points)].sum())


def center_of_mass(mu: DiscreteMeasure, Q: Cube) -> np.ndarray:
    """The mu-center of mass of Q; requires positive mass in Q."""
    if mu.dim != Q.dim:
        raise DimensionMismatchError(f"measure dim {mu.dim} != cube dim {Q.dim}")
    mask = Q.contains(mu.points) if len(mu) else np.zeros(0, dtype=bool)
    total = float(mu.masses[mask].sum())
    if total <= 0.0:
        raise EmptyRegionError("center of mass requires positive mass in the cube")
    return mu.masses[mask] @ mu.points[mask] / total


def restrict(mu: DiscreteMeasure, region) -> DiscreteMeasure:
    return mu.restrict(region)


def shared_atoms(a: DiscreteMeasure, b: DiscreteMeasure) -> bool:
    """True if the two measures have an atom at the same location."""
    if a.is_empty or b.is_empty:
        return False
    both = np.concatenate([a.points, b.points])
    tags = np.concatenate([np.zeros(len(a)), np.ones(len(b))])
    order = np.lexsort(both.T[::-1])
    both, tags = both[order], tags[order]
    same = np.all(both[1:] == both[:-1], axis=1)
    return bool(np.any(same & (tags[1:] != tags[:-1])))
