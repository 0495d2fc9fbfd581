"""The vector Riesz kernel (x-y)/|x-y|^(d+1), its action on discrete
measures, the two-weight bilinear form, and the operator norm.

The operator norm of the discrete pair is the largest singular value of the
scaled kernel matrix A[(k,c), i] = sqrt(w_k) K_c(y_k, x_i) sqrt(s_i),
estimated by power iteration on the normal system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import ConvergenceError, InputError, SingularityError
from .geometry import DiscreteMeasure, RieszDimension, shared_atoms

#: systems with at most this many kernel-matrix entries are materialized
#: once and iterated with BLAS
_DENSE_LIMIT = 2**24


@dataclass(frozen=True)
class KernelParams:
    """Riesz dimension plus an optional sharp annular truncation a <= |x-y| <= b."""

    rd: RieszDimension
    truncation: tuple | None = None

    def __post_init__(self):
        if self.truncation is not None:
            a, b = self.truncation
            if not (0 < a < b):
                raise InputError(f"truncation radii must satisfy 0 < a < b, got {self.truncation}")

    @property
    def bounds(self) -> tuple:
        return self.truncation if self.truncation is not None else (0.0, np.inf)


def _fvals(f, mu: DiscreteMeasure) -> np.ndarray:
    if f is None:
        return np.ones(len(mu))
    if callable(f):
        return np.asarray([f(p) for p in mu.points], dtype=np.float64)
    arr = np.asarray(f, dtype=np.float64).ravel()
    if arr.shape[0] != len(mu):
        raise InputError(f"function values have length {arr.shape[0]}, measure has {len(mu)} atoms")
    return arr


def kernel_eval(params: KernelParams, x, y) -> np.ndarray:
    """K(x, y) = (x - y)/|x - y|^(d+1); zero outside the truncation annulus."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    diff = x - y
    r = float(np.sqrt(diff @ diff))
    if r == 0.0:
        raise SingularityError("kernel evaluated on the diagonal")
    a, b = params.bounds
    if not (a <= r <= b):
        return np.zeros_like(diff)
    return diff / r ** (params.rd.d + 1.0)


def riesz_field(params: KernelParams, sigma: DiscreteMeasure, f, pts) -> np.ndarray:
    """R_sigma f evaluated at each row of pts; shape (J, n)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    a, b = params.bounds
    coef = _fvals(f, sigma) * sigma.masses
    return _backend.riesz_matvec(sigma.points, coef, pts, params.rd.d, a, b)


def riesz_apply(params: KernelParams, sigma: DiscreteMeasure, f, x) -> np.ndarray:
    """R_sigma f(x) = sum_i f(x_i) K(x, x_i) m_i for a single point x."""
    x = np.asarray(x, dtype=np.float64)
    a, _ = params.bounds
    if a == 0.0 and len(sigma) and np.any(np.all(sigma.points == x, axis=1)):
        raise SingularityError("evaluation point is an atom of sigma and no truncation is active")
    return riesz_field(params, sigma, f, x)[0]


def bilinear_form(params: KernelParams, sigma: DiscreteMeasure, f,
                  w: DiscreteMeasure, g) -> np.ndarray:
    """<R_sigma f, g>_w, one scalar per kernel component."""
    a, _ = params.bounds
    if a == 0.0 and shared_atoms(sigma, w):
        raise SingularityError("sigma and w share an atom and no truncation is active")
    if sigma.is_empty or w.is_empty:
        return np.zeros(max(sigma.dim, w.dim))
    field = riesz_field(params, sigma, f, w.points)
    return (w.masses * _fvals(g, w)) @ field


def _norm_matvecs(params, sigma, w):
    """Return v -> A v and V -> A^T V for the scaled kernel matrix."""
    d = params.rd.d
    a, b = params.bounds
    sq_s = np.sqrt(sigma.masses)
    sq_w = np.sqrt(w.masses)
    size = len(sigma) * len(w) * sigma.dim
    if size <= _DENSE_LIMIT:
        J, n = len(w), sigma.dim
        A = np.empty((J * n, len(sigma)))
        for i in range(len(sigma)):
            col = _backend.riesz_matvec(sigma.points[i : i + 1], sq_s[i : i + 1], w.points, d, a, b)
            A[:, i] = (col * sq_w[:, None]).ravel()
        return (lambda v: A @ v), (lambda V: A.T @ V.ravel())

    def fwd(v):
        out = _backend.riesz_matvec(sigma.points, sq_s * v, w.points, d, a, b)
        return (out * sq_w[:, None]).ravel()

    def bwd(V):
        return sq_s * _backend.riesz_rmatvec(
            sigma.points, w.points, V.reshape(len(w), -1) * sq_w[:, None], d, a, b
        )

    return fwd, bwd


def operator_norm(params: KernelParams, sigma: DiscreteMeasure, w: DiscreteMeasure,
                  tol: float = 1e-10, seed: int = 0, max_iter: int = 100_000) -> float:
    """Best constant in ||R_sigma f||_w <= N ||f||_sigma over the discrete pair."""
    a, _ = params.bounds
    if a == 0.0 and shared_atoms(sigma, w):
        raise SingularityError("sigma and w share an atom and no truncation is active")
    if sigma.is_empty or w.is_empty:
        return 0.0
    fwd, bwd = _norm_matvecs(params, sigma, w)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(len(sigma))
    v /= np.linalg.norm(v)
    prev = np.inf
    for _ in range(max_iter):
        Av = fwd(v)
        est = float(np.linalg.norm(Av))
        if est == 0.0:
            return 0.0
        if abs(est - prev) <= tol * est:
            return est
        prev = est
        u = bwd(Av)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return est
        v = u / nu
    raise ConvergenceError(
        f"power iteration did not converge within {max_iter} iterations", last_value=prev
    )


def divergence_residual(params: KernelParams, y, h: float | None = None) -> float:
    """Central-difference divergence of K at y minus the analytic (n-d-1)/|y|^(d+1)."""
    y = np.asarray(y, dtype=np.float64)
    r = float(np.sqrt(y @ y))
    if r == 0.0:
        raise SingularityError("divergence undefined at the origin")
    if h is None:
        h = 1e-5 * r
    n, d = params.rd.n, params.rd.d
    origin = np.zeros(n)
    div = 0.0
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        div += (kernel_eval(params, y + e, origin)[j] - kernel_eval(params, y - e, origin)[j]) / (2 * h)
    return div - (n - d - 1.0) / r ** (d + 1.0)
