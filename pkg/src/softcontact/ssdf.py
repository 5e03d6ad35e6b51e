"""Soft and hard signed distance functions of query points against an AOPC.

The soft variant replaces the nearest-plane argmin with a softmin over
squared point distances, yielding a value that is smooth in the query, the
cloud points, and the normals. The hard variant is the brute-force argmin
oracle realizing the zero-temperature limit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import check_temperature, softmax


@dataclass(frozen=True)
class SsdfResult:
    """value: signed distance estimate(s); weights: softmin distribution over
    the cloud points; squared_distances: the distances the softmin saw.

    For a single (3,) query the fields are scalar / (I,); for an (Q, 3) batch
    they are (Q,) / (Q, I).
    """

    value: np.ndarray
    weights: np.ndarray
    squared_distances: np.ndarray


def _cloud(aopc):
    return np.asarray(aopc.points), np.asarray(aopc.normals)


def _as_batch(p):
    p = np.asarray(p)
    if p.ndim == 1:
        return p[None, :], True
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValueError("query must be (3,) or (Q, 3)")
    return p, False


def plane_distances(aopc, p: np.ndarray) -> np.ndarray:
    """Per-plane signed distances n_i . (p - p_i), shape (Q, I)."""
    pts, nrm = _cloud(aopc)
    q, _ = _as_batch(p)
    return q @ nrm.T - np.sum(pts * nrm, axis=-1)


def squared_distances(aopc, p: np.ndarray) -> np.ndarray:
    """Squared distances |p - p_i|^2, shape (Q, I).

    Uses the expanded form (no (Q, I, 3) intermediate); written with x*x sums
    so complex-step perturbations stay analytic.
    """
    pts, _ = _cloud(aopc)
    q, _ = _as_batch(p)
    qq = np.sum(q * q, axis=-1)
    pp = np.sum(pts * pts, axis=-1)
    return qq[:, None] - 2.0 * (q @ pts.T) + pp[None, :]


def ssdf(aopc, p, eps1: float) -> SsdfResult:
    """Softmin-weighted average of per-plane signed distances.

    eps1 carries units of squared meters (it divides squared distances);
    1e-4 is a reasonable default for meter-scale geometry.
    """
    check_temperature(eps1, "eps1")
    q, single = _as_batch(p)
    d = squared_distances(aopc, q)
    w = softmax(-d, eps1, axis=-1)
    s = plane_distances(aopc, q)
    value = np.sum(w * s, axis=-1)
    if single:
        return SsdfResult(value[0], w[0], d[0])
    return SsdfResult(value, w, d)


def hard_sdf(aopc, p):
    """Nearest-point plane distance: the zero-temperature oracle.

    Returns (value, index) where index is the argmin of |p - p_i|^2 with
    lowest-index tie-breaking (0-based).
    """
    q, single = _as_batch(p)
    d = squared_distances(aopc, q)
    idx = np.argmin(d, axis=-1)
    s = plane_distances(aopc, q)
    value = np.take_along_axis(s, idx[:, None], axis=-1)[:, 0]
    if single:
        return float(value[0]), int(idx[0])
    return value, idx


@dataclass(frozen=True)
class IsotropicGaussianBasis:
    """Per-point isotropic Gaussian kernels exp(-|r|^2 / bandwidth).

    bandwidth: scalar or (I,) positive, units of squared meters. With a
    uniform bandwidth this reproduces the plain softmin form exactly.
    """

    bandwidth: np.ndarray

    def log_weights(self, aopc, q: np.ndarray) -> np.ndarray:
        bw = np.asarray(self.bandwidth, dtype=float)
        if np.any(bw <= 0):
            raise ValueError("bandwidth must be positive")
        d = squared_distances(aopc, q)
        return -d / bw


@dataclass(frozen=True)
class AnisotropicGaussianBasis:
    """Per-point anisotropic Gaussian kernels exp(-r^T P_i r).

    precision: (3, 3) shared or (I, 3, 3) per point; symmetric positive
    definite (checked by Cholesky), units 1/m^2.
    """

    precision: np.ndarray

    def log_weights(self, aopc, q: np.ndarray) -> np.ndarray:
        P = np.asarray(self.precision, dtype=float)
        pts = np.asarray(aopc.points)
        I = pts.shape[0]
        if P.shape == (3, 3):
            P = np.broadcast_to(P, (I, 3, 3))
        if P.shape != (I, 3, 3):
            raise ValueError("precision must be (3, 3) or (I, 3, 3)")
        try:
            np.linalg.cholesky(0.5 * (P + np.swapaxes(P, -1, -2)))
        except np.linalg.LinAlgError:
            raise ValueError("precision matrices must be positive definite") from None
        r = q[:, None, :] - pts[None, :, :]
        return -np.einsum("qia,iab,qib->qi", r, P, r)


def ssdf_general(aopc, p, basis) -> SsdfResult:
    """Basis-function generalization: value = sum B_i s_i / sum B_i.

    The weights are computed through a max-shifted softmax of the kernel
    log-weights, so arbitrarily peaked kernels stay overflow-free.
    """
    q, single = _as_batch(p)
    lw = basis.log_weights(aopc, q)
    # The ratio is invariant to scaling all kernels per query; eps=1 softmax
    # of the log-weights is exactly that normalized ratio.
    w = softmax(lw, 1.0, axis=-1)
    s = plane_distances(aopc, q)
    value = np.sum(w * s, axis=-1)
    d = squared_distances(aopc, q)
    if single:
        return SsdfResult(value[0], w[0], d[0])
    return SsdfResult(value, w, d)


def sample_sdf_grid(aopc, bounds, resolution, eps1: float, slice_axis: int | None = None, slice_value: float = 0.0):
    """Soft signed distances over an axis-aligned lattice.

    bounds: (lo, hi) pair of (3,) corners; resolution: per-axis node counts
    (each >= 2); slice_axis/slice_value optionally pin one coordinate (that
    axis then contributes a single lattice plane). Returns (points, values)
    with points in row-major (x slowest) order, shape (N, 3) and (N,).

    Pure function; lattice chunks are independent, so callers may shard the
    node set across workers and concatenate.
    """
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if lo.shape != (3,) or hi.shape != (3,) or np.any(hi <= lo):
        raise ValueError("bounds must be (lo, hi) with hi > lo on every axis")
    res = [int(r) for r in np.broadcast_to(np.asarray(resolution), (3,))]
    axes = []
    for ax in range(3):
        if slice_axis is not None and ax == int(slice_axis):
            axes.append(np.array([float(slice_value)]))
            continue
        if res[ax] < 2:
            raise ValueError("resolution must be at least 2 per sampled axis")
        axes.append(np.linspace(lo[ax], hi[ax], res[ax]))
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    values = np.empty(pts.shape[0])
    chunk = max(1, int(2_000_000 // max(1, aopc.num_points)))
    for start in range(0, pts.shape[0], chunk):
        sl = slice(start, start + chunk)
        values[sl] = ssdf(aopc, pts[sl], eps1).value
    return pts, values


def grid_to_csv(points: np.ndarray, values: np.ndarray) -> str:
    lines = ["x,y,z,phi"]
    for p, v in zip(points, values):
        lines.append("%.17g,%.17g,%.17g,%.17g" % (p[0], p[1], p[2], v))
    return "\n".join(lines) + "\n"
