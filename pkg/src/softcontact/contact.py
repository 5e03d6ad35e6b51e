"""Soft-minimum contact model: spring-damper-friction point-plane forces,
softly selected over all point-plane pairs of a collision pair.

The normal force is a smooth penalty k * softplus(-phi) modulated by a
velocity-dependent dissipation factor; friction is a regularized Coulomb law
that always opposes sliding and stays inside the cone |f_t| <= mu * f_n.
Because the penalty never reaches exactly zero, bodies exert exponentially
small forces at a distance, which is what gives the dynamics informative
gradients before contact is made.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision import SeparationField
from .core import check_temperature, dot, softmax, softplus, squared_norm


@dataclass(frozen=True)
class ContactParams:
    """Contact material and smoothing constants.

    k        : contact stiffness, N/m
    mu       : Coulomb friction coefficient
    v_d      : dissipation velocity, m/s
    v_s      : stiction velocity, m/s
    eps1     : point-softmin temperature, m^2
    eps2     : separation-field temperature, m
    eps3     : penalty smoothing length, m
    """

    k: float = 1e4
    mu: float = 0.5
    v_d: float = 0.1
    v_s: float = 1e-3
    eps1: float = 1e-4
    eps2: float = 1e-3
    eps3: float = 1e-3

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("stiffness k must be positive")
        if self.mu < 0:
            raise ValueError("friction coefficient must be nonnegative")
        if not (self.v_d > 0 and self.v_s > 0):
            raise ValueError("v_d and v_s must be positive")
        for name in ("eps1", "eps2", "eps3"):
            check_temperature(getattr(self, name), name)


def dissipation_factor(x):
    """Velocity modulation of the normal force, x = v_n / v_d.

    1 - x for x <= 0, (x - 2)^2 / 4 on (0, 2], and 0 beyond: continuous and
    C1 at both joints, nonnegative everywhere.
    """
    x = np.asarray(x)
    xr = x.real
    neg = xr <= 0.0
    return neg * (1.0 - x) + ((~neg) & (xr <= 2.0)) * ((x - 2.0) ** 2 / 4.0)


def point_plane_force(p, v, plane_p, plane_n, params: ContactParams):
    """Spring-damper-friction force on a point moving against a plane.

    All arguments broadcast over leading axes; v is the point velocity
    relative to the plane. Returns the (..., 3) world force on the point.
    """
    p = np.asarray(p)
    v = np.asarray(v)
    plane_p = np.asarray(plane_p)
    plane_n = np.asarray(plane_n)
    phi = dot(plane_n, p - plane_p)
    c = params.k * softplus(-phi, params.eps3)
    v_n = dot(plane_n, v)
    v_t = v - v_n[..., None] * plane_n
    lam_n = c * dissipation_factor(v_n / params.v_d)
    scale = -params.mu * lam_n / np.sqrt(params.v_s**2 + squared_norm(v_t))
    return lam_n[..., None] * plane_n + scale[..., None] * v_t


def _weighted_generalized_force(
    aopc, q_points, q_velocities, q_jacobians, params: ContactParams,
    query_coeff, weights=None, chunk_entries: int = 1_000_000,
):
    """Accumulate sum_q coeff_q * sum_i w_qi (J_q - J_i)^T lambda_qi.

    lambda_qi is the point-plane force on query point q from cloud plane i,
    so the query body receives +J_q^T lambda and the cloud body the reaction
    -J_i^T lambda. The inner softmin weights w_qi are the same weights an
    SSDF query of q_points against the cloud produces; pass them in when
    already available, otherwise they are recomputed chunk-wise
    (chunk_entries bounds the Q*I working-set size). The pair forces are
    assembled with matmul projections rather than a broadcast call of
    point_plane_force: same formula, fewer (Q, I, 3) temporaries.
    """
    pts = np.asarray(aopc.points)
    nrm = np.asarray(aopc.normals)
    vel = np.asarray(aopc.velocities)
    J_cloud = np.asarray(aopc.jacobians)
    I = pts.shape[0]
    n = J_cloud.shape[2]
    Q = q_points.shape[0]
    coeff = np.asarray(query_coeff)
    dtype = np.result_type(pts.dtype, q_points.dtype, q_velocities.dtype, coeff.dtype)
    cloud_force = np.zeros((I, 3), dtype=dtype)
    out = np.zeros(n, dtype=dtype)
    chunk = max(1, int(chunk_entries // max(1, I)))
    pp = np.sum(pts * pts, axis=-1)
    pn = np.sum(pts * nrm, axis=-1)
    vn_cloud = np.sum(vel * nrm, axis=-1)
    for start in range(0, Q, chunk):
        sl = slice(start, min(start + chunk, Q))
        qp = q_points[sl]
        qv = q_velocities[sl]
        if weights is not None:
            w = weights[sl]
        else:
            d = np.sum(qp * qp, axis=-1)[:, None] - 2.0 * (qp @ pts.T) + pp[None, :]
            w = softmax(-d, params.eps1, axis=-1, check=False)
        phi = qp @ nrm.T - pn[None, :]
        v_n = qv @ nrm.T - vn_cloud[None, :]
        lam_n = params.k * softplus(-phi, params.eps3, check=False) * dissipation_factor(v_n / params.v_d)
        v_t = (qv[:, None, :] - vel[None, :, :]) - v_n[..., None] * nrm[None, :, :]
        scale = -params.mu * lam_n / np.sqrt(params.v_s**2 + squared_norm(v_t))
        wl = (coeff[sl][:, None] * w)[..., None] * (
            lam_n[..., None] * nrm[None, :, :] + scale[..., None] * v_t
        )
        cloud_force += wl.sum(axis=0)
        out += np.einsum("qkn,qk->n", q_jacobians[sl], wl.sum(axis=1))
    out -= np.einsum("ikn,ik->n", J_cloud, cloud_force)
    return out


def point_ssdf_force(aopc, p, v, J, params: ContactParams) -> np.ndarray:
    """Generalized force of one moving point against a posed AOPC.

    Each plane of the cloud exerts its point-plane force on the point, and
    the cloud body takes the reaction: the contribution is (J - J_i)^T
    lambda_i, weighted by the same softmin distribution the SSDF query at p
    uses. Returns a vector over the scene's generalized coordinates.
    """
    p = np.asarray(p)
    v = np.asarray(v)
    J = np.asarray(J)
    dtype = np.result_type(p.dtype, v.dtype, J.dtype)
    return _weighted_generalized_force(
        aopc,
        p[None, :],
        v[None, :],
        J[None, :, :],
        params,
        np.ones(1, dtype=dtype),
    )


def ssdf_ssdf_force(a, b, field: SeparationField, params: ContactParams) -> np.ndarray:
    """Total generalized contact force of a collision pair.

    The point-against-cloud forces of b's points in a's field and a's points
    in b's field are combined with the separation distribution, matching the
    field's concatenation order. Every pair force enters the two translation
    blocks as an equal-and-opposite (+lambda, -lambda) couple, so linear
    momentum is conserved by construction.
    """
    Ia, Ib = a.num_points, b.num_points
    if len(field) != Ia + Ib:
        raise ValueError(
            f"separation field length {len(field)} does not match AOPC pair ({Ib} + {Ia} points)"
        )
    if field.eps1 != params.eps1 or field.eps2 != params.eps2:
        raise ValueError("separation field temperatures do not match the contact parameters")
    coeff = field.distribution
    out = _weighted_generalized_force(
        a, np.asarray(b.points), np.asarray(b.velocities), np.asarray(b.jacobians),
        params, coeff[:Ib], weights=field.weights_b_in_a,
    )
    out = out + _weighted_generalized_force(
        b, np.asarray(a.points), np.asarray(a.velocities), np.asarray(a.jacobians),
        params, coeff[Ib:], weights=field.weights_a_in_b,
    )
    return out
