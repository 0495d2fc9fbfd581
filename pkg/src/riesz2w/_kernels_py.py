"""Pure-numpy implementations of the hot pairwise kernels.

Mirrors the compiled ``_fastkern`` extension; ``_backend`` picks one at
import time. All functions are chunked over the first point set so memory
stays bounded on large systems, and summation order is fixed so repeated
calls are deterministic.

Conventions shared with the compiled backend:
  * coincident pairs (r == 0) contribute zero -- callers enforce the
    singularity contract;
  * truncation is the closed annulus a <= r <= b, pass (0.0, inf) for none;
  * pair sums run over ordered pairs i != j.
"""

import numpy as np

_BLOCK = 256


def riesz_matvec(src, coef, tgt, d, a=0.0, b=np.inf):
    """out[k, :] = sum_i coef[i] * (tgt[k] - src[i]) / |tgt[k] - src[i]|^(d+1)."""
    src = np.ascontiguousarray(src, dtype=np.float64)
    tgt = np.ascontiguousarray(tgt, dtype=np.float64)
    coef = np.ascontiguousarray(coef, dtype=np.float64)
    J, n = tgt.shape
    out = np.zeros((J, n))
    a2, b2 = a * a, (b * b if np.isfinite(b) else np.inf)
    for lo in range(0, src.shape[0], _BLOCK):
        s = src[lo : lo + _BLOCK]
        c = coef[lo : lo + _BLOCK]
        diff = tgt[:, None, :] - s[None, :, :]  # (J, blk, n)
        r2 = np.einsum("jbn,jbn->jb", diff, diff)
        ok = (r2 > 0.0) & (r2 >= a2) & (r2 <= b2)
        with np.errstate(divide="ignore", over="ignore"):
            w = np.where(ok, r2 ** (-(d + 1.0) / 2.0), 0.0)
        out += np.einsum("jb,jbn->jn", w * c[None, :], diff)
    return out


def riesz_rmatvec(src, tgt, vmat, d, a=0.0, b=np.inf):
    """out[i] = sum_{k,c} vmat[k,c] * (tgt[k] - src[i])_c / r^(d+1)."""
    src = np.ascontiguousarray(src, dtype=np.float64)
    tgt = np.ascontiguousarray(tgt, dtype=np.float64)
    vmat = np.ascontiguousarray(vmat, dtype=np.float64)
    I = src.shape[0]
    out = np.zeros(I)
    a2, b2 = a * a, (b * b if np.isfinite(b) else np.inf)
    for lo in range(0, I, _BLOCK):
        s = src[lo : lo + _BLOCK]
        diff = tgt[:, None, :] - s[None, :, :]  # (J, blk, n)
        r2 = np.einsum("jbn,jbn->jb", diff, diff)
        ok = (r2 > 0.0) & (r2 >= a2) & (r2 <= b2)
        with np.errstate(divide="ignore", over="ignore"):
            w = np.where(ok, r2 ** (-(d + 1.0) / 2.0), 0.0)
        out[lo : lo + _BLOCK] = np.einsum("jbn,jb,jn->b", diff, w, vmat)
    return out


def pair_moment2(pts, masses):
    """sum over ordered pairs i != j of m_i m_j |x_i - x_j|^2."""
    pts = np.asarray(pts, dtype=np.float64)
    masses = np.asarray(masses, dtype=np.float64)
    total = 0.0
    for lo in range(0, pts.shape[0], _BLOCK):
        p = pts[lo : lo + _BLOCK]
        m = masses[lo : lo + _BLOCK]
        diff = p[:, None, :] - pts[None, :, :]
        r2 = np.einsum("ijn,ijn->ij", diff, diff)
        total += float(np.einsum("i,j,ij->", m, masses, r2))
    return total


def pair_directional_sum(pts, masses, dirs):
    """For each unit row of dirs: sum_{i != j} m_i m_j |nu.(x_i-x_j)| / |x_i-x_j|."""
    pts = np.asarray(pts, dtype=np.float64)
    masses = np.asarray(masses, dtype=np.float64)
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    out = np.zeros(dirs.shape[0])
    for lo in range(0, pts.shape[0], _BLOCK):
        p = pts[lo : lo + _BLOCK]
        m = masses[lo : lo + _BLOCK]
        diff = p[:, None, :] - pts[None, :, :]
        r = np.sqrt(np.einsum("ijn,ijn->ij", diff, diff))
        w = np.where(r > 0.0, m[:, None] * masses[None, :] / np.where(r > 0, r, 1.0), 0.0)
        for dlo in range(0, dirs.shape[0], 32):
            proj = np.abs(np.einsum("ijn,dn->ijd", diff, dirs[dlo : dlo + 32]))
            out[dlo : dlo + 32] += np.einsum("ij,ijd->d", w, proj)
    return out


def pair_angle_hist(pts, masses, nbins):
    """Histogram of pair weights m_i m_j by direction angle mod pi (ordered pairs, n = 2)."""
    pts = np.asarray(pts, dtype=np.float64)
    masses = np.asarray(masses, dtype=np.float64)
    hist = np.zeros(nbins)
    for lo in range(0, pts.shape[0], _BLOCK):
        p = pts[lo : lo + _BLOCK]
        m = masses[lo : lo + _BLOCK]
        dx = p[:, 0][:, None] - pts[:, 0][None, :]
        dy = p[:, 1][:, None] - pts[:, 1][None, :]
        nz = (dx != 0.0) | (dy != 0.0)
        ang = np.mod(np.arctan2(dy, dx), np.pi)
        idx = np.minimum((ang * (nbins / np.pi)).astype(np.int64), nbins - 1)
        w = np.where(nz, m[:, None] * masses[None, :], 0.0)
        hist += np.bincount(idx.ravel(), weights=w.ravel(), minlength=nbins)
    return hist


def pair_min_dist(pts):
    """Minimum distance between two distinct points; inf if fewer than 2 points."""
    pts = np.asarray(pts, dtype=np.float64)
    if pts.shape[0] < 2:
        return np.inf
    best = np.inf
    for lo in range(0, pts.shape[0], _BLOCK):
        p = pts[lo : lo + _BLOCK]
        diff = p[:, None, :] - pts[None, :, :]
        r2 = np.einsum("ijn,ijn->ij", diff, diff)
        r2[r2 == 0.0] = np.inf
        best = min(best, float(np.sqrt(r2.min())))
    return best


def box_poisson_sum(pts, wts, lo, hi, numer, power, ell_pow):
    """sum_i wts[i] * numer / (ell_pow + dist(x_i, box)^power)."""
    pts = np.asarray(pts, dtype=np.float64)
    wts = np.asarray(wts, dtype=np.float64)
    if pts.shape[0] == 0:
        return 0.0
    gap = np.maximum(np.asarray(lo) - pts, 0.0) + np.maximum(pts - np.asarray(hi), 0.0)
    dist = np.sqrt(np.einsum("in,in->i", gap, gap))
    return float(np.sum(wts * numer / (ell_pow + dist**power)))
