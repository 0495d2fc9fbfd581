"""Characterization constants for a two-weight pair: the Poisson A2 constant
(with or without holes), testing constants, the uniform-full-dimension
constant eta, the monotonicity-inequality ratio audit, and the combined
theorem audit.

Suprema are taken over an explicit finite cube family, so every reported
value is a certified lower bound for the corresponding supremum; the family
and its provenance are recorded in the report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConfigurationError, InputError, UndefinedSupError
from .geometry import (
    Complement,
    Cube,
    DiscreteMeasure,
    RieszDimension,
    cube_mass,
    shared_atoms,
)
from .grids import auto_scale_range, build_grid, root_cube_for
from .kernel import KernelParams, operator_norm, riesz_field
from .poisson import central_partition, energy, energy_constant_audit, poisson_avg


@dataclass
class CubeFamily:
    """Finite cube family over which sup/inf estimates are formed."""

    cubes: list
    provenance: str = "user"

    def __post_init__(self):
        if not self.cubes:
            raise InputError("cube family must be nonempty")


def _cube_key(Q: Cube):
    return (Q.center, Q.side)


def default_family(sigma: DiscreteMeasure, w: DiscreteMeasure, n_grids: int = 4,
                   seed: int = 0) -> CubeFamily:
    """Occupied cubes of a few random grids plus atom-centered cubes at each scale."""
    support = DiscreteMeasure(
        np.concatenate([sigma.points, w.points]),
        np.concatenate([sigma.masses, w.masses]),
        dim=sigma.dim,
    )
    k_lo, k_hi = auto_scale_range(support, pad_low=1, pad_high=2)
    seen = {}
    streams = np.random.SeedSequence(seed).spawn(n_grids)
    for ss in streams:
        grid = build_grid(support.dim, (k_lo, k_hi), ss)
        for k in range(k_lo, k_hi + 1):
            idx = np.unique(grid.atom_indices(support.points, k), axis=0)
            for row in idx:
                from .grids import GridCube

                Q = GridCube(grid, k, tuple(int(i) for i in row)).cube
                seen.setdefault(_cube_key(Q), Q)
    centers = np.unique(support.points, axis=0)
    for k in range(k_lo, k_hi + 1):
        side = 2.0**k
        for c in centers:
            Q = Cube(tuple(c), side)
            seen.setdefault(_cube_key(Q), Q)
    cubes = sorted(seen.values(), key=_cube_key)
    return CubeFamily(cubes, provenance=f"grid-cubes+atom-centered(n_grids={n_grids}, seed={seed})")


@dataclass
class SupResult:
    value: float
    argmax: Cube | None
    tested: int = 0


def a2_constant(rd: RieszDimension, sigma: DiscreteMeasure, w: DiscreteMeasure,
                family: CubeFamily, holes: bool) -> SupResult:
    """Witnessed A2 supremum over the family (reproducing Poisson flavor)."""
    best, arg = -1.0, None
    for Q in family.cubes:
        ld = Q.ell**rd.d
        region = Complement(Q) if holes else None
        term = cube_mass(sigma, Q) / ld * poisson_avg("reproducing", rd, w.restrict(region), Q)
        term += cube_mass(w, Q) / ld * poisson_avg("reproducing", rd, sigma.restrict(region), Q)
        if term > best:
            best, arg = term, Q
    return SupResult(max(best, 0.0), arg, len(family.cubes))


def testing_constant(rd: RieszDimension, sigma: DiscreteMeasure, w: DiscreteMeasure,
                     family: CubeFamily, truncation=None) -> SupResult:
    """sup_Q ( int_Q |R_sigma 1_Q|^2 dw / sigma(Q) )^(1/2) over the family."""
    if truncation is None and shared_atoms(sigma, w):
        raise InputError("shared atom locations require a truncation")
    params = KernelParams(rd, truncation)
    best, arg, tested = -1.0, None, 0
    for Q in family.cubes:
        smask = Q.contains(sigma.points) if len(sigma) else np.zeros(0, dtype=bool)
        s_in = float(sigma.masses[smask].sum())
        if s_in <= 0.0:
            continue
        tested += 1
        wmask = Q.contains(w.points) if len(w) else np.zeros(0, dtype=bool)
        if not np.any(wmask):
            val = 0.0
        else:
            a, b = params.bounds
            fld = _backend.riesz_matvec(
                sigma.points[smask], sigma.masses[smask], w.points[wmask], rd.d, a, b
            )
            val = float(w.masses[wmask] @ np.einsum("kn,kn->k", fld, fld)) / s_in
        if val > best:
            best, arg = val, Q
    if tested == 0:
        raise UndefinedSupError("every family cube carries zero sigma-mass")
    return SupResult(math.sqrt(max(best, 0.0)), arg, tested)


def _exact_direction(t: int, angles: int) -> np.ndarray:
    """Unit vector for angle t*pi/angles with exact cardinal axes."""
    if t % angles == 0:
        return np.array([1.0, 0.0])
    if (2 * t) % angles == 0 and (2 * t) // angles % 2 == 1:
        return np.array([0.0, 1.0])
    th = t * math.pi / angles
    return np.array([math.cos(th), math.sin(th)])


@dataclass
class UfdResult:
    value: float
    argmin: Cube | None
    direction: np.ndarray | None
    tested: int = 0


def ufd_eta(w: DiscreteMeasure, family: CubeFamily, angles: int = 720,
            n_dirs: int = 512, refine_steps: int = 50, seed: int = 0) -> UfdResult:
    """min over family and hyperplane normals of the directional pair average.

    For n = 2 the scan is exhaustive over `angles` directions (pair angles are
    binned once, candidate minima are then re-evaluated exactly, with exact
    axis vectors at the cardinal angles); for n >= 3, seeded random directions
    plus local refinement.
    """
    best, arg, bdir, tested = math.inf, None, None, 0
    nbins = 4096
    for Q in sorted(family.cubes, key=_cube_key):
        sub = w.restrict(Q)
        total = sub.total_mass
        if total <= 0.0:
            continue
        tested += 1
        if len(sub) <= 1:
            val, vdir = 0.0, None
        elif w.dim == 2:
            hist = _backend.pair_angle_hist(sub.points, sub.masses, nbins)
            phi = (np.arange(nbins) + 0.5) * math.pi / nbins
            th = np.arange(angles) * math.pi / angles
            approx = np.abs(np.cos(th[:, None] - phi[None, :])) @ hist
            cand = set(np.argsort(approx)[:4]) | {0, angles // 2}
            dirs = np.array([_exact_direction(t, angles) for t in sorted(cand)])
            vals = _backend.pair_directional_sum(sub.points, sub.masses, dirs) / total**2
            i = int(np.argmin(vals))
            val, vdir = float(vals[i]), dirs[i]
        else:
            rng = np.random.default_rng(seed)
            dirs = rng.standard_normal((n_dirs, w.dim))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            vals = _backend.pair_directional_sum(sub.points, sub.masses, dirs) / total**2
            i = int(np.argmin(vals))
            val, vdir = float(vals[i]), dirs[i]
            step = 0.3
            for _ in range(refine_steps):
                prop = vdir + step * rng.standard_normal(w.dim)
                prop /= np.linalg.norm(prop)
                pv = float(
                    _backend.pair_directional_sum(sub.points, sub.masses, prop[None, :])[0]
                ) / total**2
                if pv < val:
                    val, vdir = pv, prop
                step *= 0.92
        if val < best:
            best, arg, bdir = val, Q, vdir
    if tested == 0:
        raise InputError("no family cube carries w-mass")
    return UfdResult(best, arg, bdir, tested)


@dataclass
class MonotonicityResult:
    max_ratio: float
    ratios: np.ndarray
    anomalies: int
    histogram: tuple

    def to_json(self) -> dict:
        counts, edges = self.histogram
        return {
            "max_ratio": self.max_ratio,
            "anomalies": self.anomalies,
            "trials": int(self.ratios.size),
            "histogram": {"counts": counts.tolist(), "edges": edges.tolist()},
        }


def monotonicity_audit(rd: RieszDimension, trials: int, seed: int = 0,
                       n_sigma: int = 24, n_w: int = 32,
                       shell: float = 40.0) -> MonotonicityResult:
    """Randomized ratio audit of the off-diagonal domination inequality.

    Per trial: g lives on the unit cube Q with w-mean zero, sigma sits outside
    P = 10Q. The ratio compares |<R_sigma f, g>_w| with the gradient and
    gradient-plus Poisson terms of the domination estimate.
    """
    n = rd.n
    Q = Cube((0.0,) * n, 1.0)
    params = KernelParams(rd)
    streams = np.random.SeedSequence(seed).spawn(trials)
    ratios = np.zeros(trials)
    anomalies = 0
    for t, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        pts = []
        while len(pts) < n_sigma:
            x = rng.uniform(-shell, shell, size=n)
            if np.max(np.abs(x)) > 5.05:
                pts.append(x)
        sigma = DiscreteMeasure(np.array(pts), rng.uniform(0.2, 2.0, n_sigma), dim=n)
        fv = rng.uniform(-1.0, 1.0, n_sigma)
        wpts = rng.uniform(-0.5, 0.5, size=(n_w, n)) * 0.999
        wm = rng.uniform(0.2, 2.0, n_w)
        wmeas = DiscreteMeasure(wpts, wm, dim=n)
        g = rng.uniform(-1.0, 1.0, len(wmeas))
        g -= (wmeas.masses @ g) / wmeas.total_mass
        fld = riesz_field(params, sigma, fv, wmeas.points)
        numer = float(np.linalg.norm((wmeas.masses * g) @ fld))
        xg = np.linalg.norm((wmeas.masses * g) @ (wmeas.points / Q.ell))
        g_norm = math.sqrt(float(wmeas.masses @ g**2))
        pg = poisson_avg("gradient", rd, sigma, Q, fvals=fv)
        pgp = poisson_avg("gradient_plus", rd, sigma, Q, fvals=fv)
        ew = energy(wmeas, Q, form=2)
        denom = pg * xg + pgp * ew.root * math.sqrt(wmeas.total_mass) * g_norm
        if denom == 0.0:
            if numer > 1e-14:
                anomalies += 1
            ratios[t] = 0.0
        else:
            ratios[t] = numer / denom
    hist = np.histogram(ratios, bins=20)
    return MonotonicityResult(float(ratios.max()), ratios, anomalies, hist)


@dataclass
class AuditConfig:
    seed: int = 0
    n_grids: int = 4
    epsilon: float = 0.0625
    r: int = 8
    C0: float = 16.0
    gamma: float = 4.0
    energy_multiplier: float = 10.0
    tol: float = 1e-10
    truncation: tuple | None = None
    holes: bool | None = None  # None: decided by d vs n-1
    family: CubeFamily | None = None
    partition_depth: int = 6
    eta_max_cubes: int = 24
    eta_min_atoms: int = 8
    eta_angles: int = 720


@dataclass
class ConstantsReport:
    n: int
    d: float
    N: float
    N_tol: float
    A2: float
    A2_argmax: dict
    T: float
    T_argmax: dict
    Tstar: float
    Tstar_argmax: dict
    eta_sigma: float
    eta_w: float
    E2_audit: float
    E2_partition: str
    ratio_n: float
    ratio_e: float
    holes: bool
    params: dict
    anomalies: list = field(default_factory=list)

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @staticmethod
    def csv_header() -> str:
        return "name,n,d,N,A2,T,Tstar,eta_sigma,eta_w,E2_audit,ratio_n,ratio_e,anomalies"

    def csv_row(self, name: str = "") -> str:
        return (
            f"{name},{self.n},{self.d},{self.N!r},{self.A2!r},{self.T!r},{self.Tstar!r},"
            f"{self.eta_sigma!r},{self.eta_w!r},{self.E2_audit!r},{self.ratio_n!r},"
            f"{self.ratio_e!r},{len(self.anomalies)}"
        )


def _cube_info(Q: Cube | None) -> dict:
    if Q is None:
        return {}
    return {"center": list(Q.center), "side": Q.side}


def _eta_subfamily(family: CubeFamily, meas: DiscreteMeasure, cfg: AuditConfig) -> CubeFamily | None:
    """Macroscopic cubes only: the discrete infimum over arbitrarily small
    cubes is degenerately zero, so eta is reported over cubes holding at
    least eta_min_atoms atoms."""
    scored = []
    for Q in family.cubes:
        count = int(np.count_nonzero(Q.contains(meas.points))) if len(meas) else 0
        if count >= cfg.eta_min_atoms:
            scored.append((-Q.side, _cube_key(Q), Q))
    if not scored:
        return None
    scored.sort(key=lambda s: (s[0], s[1]))
    return CubeFamily([s[2] for s in scored[: cfg.eta_max_cubes]], provenance="eta-macroscopic")


def theorem_audit(rd: RieszDimension, sigma: DiscreteMeasure, w: DiscreteMeasure,
                  config: AuditConfig | None = None) -> ConstantsReport:
    """Compute N, A2, T, T*, eta, and the Whitney energy audit for one pair."""
    cfg = config or AuditConfig()
    if rd.is_codim_one:
        raise ConfigurationError("codimension-one kernel (d = n-1) is excluded by the audit")
    if cfg.epsilon >= 1.0 / (4.0 * rd.d + 4.0):
        raise ConfigurationError(
            f"audit requires epsilon < 1/(4d+4) = {1.0 / (4 * rd.d + 4):.4f}, got {cfg.epsilon}"
        )
    holes = cfg.holes if cfg.holes is not None else (rd.d > rd.n - 1)
    if rd.d <= rd.n - 1:
        if cfg.truncation is None and shared_atoms(sigma, w):
            raise InputError("for d <= n-1 the weights must not share a point mass")
        holes = False
    family = cfg.family or default_family(sigma, w, cfg.n_grids, cfg.seed)
    params = KernelParams(rd, cfg.truncation)

    N = operator_norm(params, sigma, w, tol=cfg.tol, seed=cfg.seed)
    a2 = a2_constant(rd, sigma, w, family, holes)
    T = testing_constant(rd, sigma, w, family, cfg.truncation)
    Ts = testing_constant(rd, w, sigma, family, cfg.truncation)

    etas = {}
    for name, meas in (("sigma", sigma), ("w", w)):
        sub = _eta_subfamily(family, meas, cfg)
        etas[name] = (
            ufd_eta(meas, sub, angles=cfg.eta_angles, seed=cfg.seed).value if sub else 0.0
        )

    support = DiscreteMeasure(
        np.concatenate([sigma.points, w.points]),
        np.concatenate([sigma.masses, w.masses]),
        dim=sigma.dim,
    )
    k_lo, k_hi = auto_scale_range(support, pad_low=2, pad_high=6)
    ss = np.random.SeedSequence(cfg.seed ^ 0x5EED).spawn(4)
    e2_best, e2_id = 0.0, "none"
    for pid, gseed in enumerate(ss):
        try:
            root = root_cube_for(build_grid(rd.n, (k_lo, k_hi), gseed), support)
        except ConfigurationError:
            continue
        spec = central_partition(root.cube, cfg.partition_depth, cfg.C0)
        if not spec.cells:
            continue
        res = energy_constant_audit(rd, sigma, w, spec)
        for val in (res.value, res.dual_value):
            if val > e2_best:
                e2_best, e2_id = val, f"grid{pid}/central-depth{cfg.partition_depth}"

    R = math.sqrt(a2.value) + T.value + Ts.value
    ratio_n = N / R if R > 0 else math.inf
    den_e = a2.value + T.value**2
    ratio_e = e2_best / den_e if den_e > 0 else math.inf

    anomalies = []
    if T.value > N * (1 + 1e-9):
        anomalies.append(f"testing constant exceeds operator norm: {T.value} > {N}")
    if Ts.value > N * (1 + 1e-9):
        anomalies.append(f"dual testing constant exceeds operator norm: {Ts.value} > {N}")

    return ConstantsReport(
        n=rd.n,
        d=rd.d,
        N=N,
        N_tol=cfg.tol,
        A2=a2.value,
        A2_argmax=_cube_info(a2.argmax),
        T=T.value,
        T_argmax=_cube_info(T.argmax),
        Tstar=Ts.value,
        Tstar_argmax=_cube_info(Ts.argmax),
        eta_sigma=etas["sigma"],
        eta_w=etas["w"],
        E2_audit=e2_best,
        E2_partition=e2_id,
        ratio_n=ratio_n,
        ratio_e=ratio_e,
        holes=holes,
        params={
            "seed": cfg.seed,
            "n_grids": cfg.n_grids,
            "epsilon": cfg.epsilon,
            "r": cfg.r,
            "C0": cfg.C0,
            "gamma": cfg.gamma,
            "energy_multiplier": cfg.energy_multiplier,
            "family": family.provenance,
            "family_size": len(family.cubes),
            "backend": _backend.BACKEND,
        },
        anomalies=anomalies,
    )
