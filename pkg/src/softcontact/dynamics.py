"""Rigid-body scene assembly and explicit time integration.

Bodies are either free (6 DOF: world-frame linear velocity stacked over
world-frame angular velocity) or kinematic (no DOFs, motion prescribed by a
C1 trajectory, modeling position-controlled actuators). The equations of
motion are assembled block-diagonally per free body; contact enters as the
sum of the soft-minimum pair forces, so both forward and inverse dynamics
are single closed-form expressions with no iterative solve.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .collision import separation_field
from .contact import ContactParams, ssdf_ssdf_force
from .core import quat_from_rotvec, quat_multiply, quat_normalize, quat_to_matrix
from .geometry import LocalAopc, Pose, WorldAopc, pose_aopc


class DivergenceError(RuntimeError):
    """Raised when integration produces a non-finite state."""


# ---------------------------------------------------------------------------
# Prescribed motion for kinematic bodies


class StaticMotion:
    """Hold a fixed pose with zero velocity."""

    def __init__(self, pose: Pose):
        self._pose = pose

    def pose(self, t: float) -> Pose:
        return self._pose

    def velocity(self, t: float) -> np.ndarray:
        return np.zeros(6)


class LinearMotion:
    """Constant world spatial velocity from a start pose."""

    def __init__(self, start: Pose, linear_velocity, angular_velocity=(0.0, 0.0, 0.0)):
        self._start = start
        self._v = np.asarray(linear_velocity, dtype=float)
        self._w = np.asarray(angular_velocity, dtype=float)

    def pose(self, t: float) -> Pose:
        trans = self._start.translation + t * self._v
        quat = quat_normalize(quat_multiply(quat_from_rotvec(t * self._w), self._start.quaternion))
        return Pose(trans, quat)

    def velocity(self, t: float) -> np.ndarray:
        return np.concatenate([self._v, self._w])


class SplineMotion:
    """Clamped cubic spline through position waypoints at fixed orientation.

    Clamped boundary conditions give zero velocity at both ends, so holding
    the endpoint poses outside the time range keeps the trajectory C1.
    """

    def __init__(self, times: Sequence[float], positions, quaternion=(1.0, 0.0, 0.0, 0.0)):
        times = np.asarray(times, dtype=float)
        positions = np.asarray(positions, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("spline times must be strictly increasing, length >= 2")
        if positions.shape != (times.size, 3):
            raise ValueError("spline needs one 3D position per timestamp")
        self._t0, self._t1 = float(times[0]), float(times[-1])
        self._spline = CubicSpline(times, positions, bc_type="clamped")
        self._dspline = self._spline.derivative()
        self._quat = quat_normalize(np.asarray(quaternion, dtype=float))

    def pose(self, t: float) -> Pose:
        tc = min(max(t, self._t0), self._t1)
        return Pose(self._spline(tc), self._quat)

    def velocity(self, t: float) -> np.ndarray:
        if t < self._t0 or t > self._t1:
            return np.zeros(6)
        return np.concatenate([self._dspline(t), np.zeros(3)])


# ---------------------------------------------------------------------------
# Scene


@dataclass
class Body:
    """One rigid body. Free bodies need mass and a positive-definite inertia
    tensor (body frame, about the body origin, which must be the center of
    mass); kinematic bodies need a motion trajectory instead."""

    name: str
    aopc: LocalAopc
    kind: str = "free"
    mass: float | None = None
    inertia: np.ndarray | None = None
    motion: object | None = None

    def __post_init__(self):
        if self.kind not in ("free", "kinematic"):
            raise ValueError(f"body {self.name}: kind must be 'free' or 'kinematic'")
        if self.kind == "free":
            if self.mass is None or not self.mass > 0:
                raise ValueError(f"body {self.name}: free bodies need mass > 0")
            inertia = np.asarray(self.inertia, dtype=float)
            if inertia.shape != (3, 3):
                raise ValueError(f"body {self.name}: inertia must be 3x3")
            if not np.allclose(inertia, inertia.T, atol=1e-12):
                raise ValueError(f"body {self.name}: inertia must be symmetric")
            try:
                np.linalg.cholesky(inertia)
            except np.linalg.LinAlgError:
                raise ValueError(f"body {self.name}: inertia must be positive definite") from None
            self.inertia = inertia
        else:
            if self.motion is None:
                self.motion = StaticMotion(Pose.identity())


@dataclass
class Scene:
    """Ordered bodies, collision pairs, gravity, contact parameters, and an
    optional control source tau(t) over the free generalized coordinates."""

    bodies: list[Body]
    pairs: list[tuple[str, str]]
    gravity: np.ndarray = dc_field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    params: ContactParams = dc_field(default_factory=ContactParams)
    controls: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float).reshape(3)
        names = [b.name for b in self.bodies]
        if len(set(names)) != len(names):
            raise ValueError("body names must be unique")
        self._index = {n: i for i, n in enumerate(names)}
        seen = set()
        self.pair_indices: list[tuple[int, int]] = []
        for a, b in self.pairs:
            if a not in self._index or b not in self._index:
                raise ValueError(f"collision pair ({a}, {b}) references an unknown body")
            ia, ib = self._index[a], self._index[b]
            if ia == ib:
                raise ValueError(f"collision pair ({a}, {b}) must reference distinct bodies")
            key = (min(ia, ib), max(ia, ib))
            if key in seen:
                raise ValueError(f"collision pair ({a}, {b}) repeated")
            seen.add(key)
            self.pair_indices.append((ia, ib))
        self.free_indices = [i for i, b in enumerate(self.bodies) if b.kind == "free"]
        self._dof_start = {}
        for k, i in enumerate(self.free_indices):
            self._dof_start[i] = 6 * k

    @property
    def n(self) -> int:
        return 6 * len(self.free_indices)

    def body_index(self, name: str) -> int:
        return self._index[name]

    def dof_start(self, body_index: int) -> int | None:
        return self._dof_start.get(body_index)

    def tau(self, t: float) -> np.ndarray:
        if self.controls is None:
            return np.zeros(self.n)
        out = np.asarray(self.controls(t), dtype=float)
        if out.shape != (self.n,):
            raise ValueError("controls must return a vector over the free DOFs")
        return out


@dataclass
class SceneState:
    """q: one row [tx ty tz qw qx qy qz] per free body; v: stacked world
    [linear; angular] velocities of the free bodies; time in seconds."""

    time: float
    q: np.ndarray
    v: np.ndarray

    def copy(self) -> "SceneState":
        return SceneState(self.time, self.q.copy(), self.v.copy())


def make_state(scene: Scene, poses: dict[str, Pose] | None = None, velocities: dict[str, np.ndarray] | None = None, time: float = 0.0) -> SceneState:
    poses = poses or {}
    velocities = velocities or {}
    nf = len(scene.free_indices)
    q = np.zeros((nf, 7))
    q[:, 3] = 1.0
    v = np.zeros(scene.n)
    for k, i in enumerate(scene.free_indices):
        body = scene.bodies[i]
        if body.name in poses:
            p = poses[body.name]
            q[k, :3] = p.translation
            q[k, 3:] = p.quaternion
        if body.name in velocities:
            v[6 * k : 6 * k + 6] = np.asarray(velocities[body.name], dtype=float).reshape(6)
    return SceneState(time, q, v)


def body_pose(scene: Scene, state: SceneState, body_index: int) -> Pose:
    body = scene.bodies[body_index]
    if body.kind == "kinematic":
        return body.motion.pose(state.time)
    k = scene.free_indices.index(body_index)
    return Pose(state.q[k, :3], state.q[k, 3:])


def pose_all(scene: Scene, state: SceneState) -> list[WorldAopc]:
    """Pose every body's AOPC at the current state (pure; no caching)."""
    out = []
    for i, body in enumerate(scene.bodies):
        ds = scene.dof_start(i)
        if ds is None:
            pose = body.motion.pose(state.time)
            out.append(
                pose_aopc(body.aopc, pose, state.v, None, body_id=body.name,
                          prescribed_velocity=body.motion.velocity(state.time))
            )
        else:
            k = scene.free_indices.index(i)
            pose = Pose(state.q[k, :3], quat_normalize(state.q[k, 3:]))
            out.append(pose_aopc(body.aopc, pose, state.v, ds, body_id=body.name))
    return out


def mass_matrix(scene: Scene, state: SceneState) -> np.ndarray:
    """Block-diagonal generalized inertia: diag(m I3, R I_body R^T) per free
    body."""
    n = scene.n
    dtype = state.q.dtype
    M = np.zeros((n, n), dtype=dtype)
    for k, i in enumerate(scene.free_indices):
        body = scene.bodies[i]
        R = quat_to_matrix(state.q[k, 3:])
        s = 6 * k
        M[s : s + 3, s : s + 3] = body.mass * np.eye(3)
        M[s + 3 : s + 6, s + 3 : s + 6] = R @ body.inertia @ R.T
    return M


def bias_force(scene: Scene, state: SceneState) -> np.ndarray:
    """Gravity and gyroscopic bias, with signs such that free fall gives
    vdot = g when tau and contact are zero."""
    n = scene.n
    dtype = np.result_type(state.q.dtype, state.v.dtype)
    c = np.zeros(n, dtype=dtype)
    for k, i in enumerate(scene.free_indices):
        body = scene.bodies[i]
        s = 6 * k
        c[s : s + 3] = -body.mass * scene.gravity
        R = quat_to_matrix(state.q[k, 3:])
        Iw = R @ body.inertia @ R.T
        w = state.v[s + 3 : s + 6]
        c[s + 3 : s + 6] = np.cross(w, Iw @ w)
    return c


def total_contact_force(scene: Scene, state: SceneState) -> np.ndarray:
    return _contact_force(scene, state)[0]


def _contact_force(scene: Scene, state: SceneState):
    """Sum of pair forces plus the minimum separation seen (diagnostics)."""
    dtype = np.result_type(state.q.dtype, state.v.dtype)
    out = np.zeros(scene.n, dtype=dtype)
    min_sep = np.inf
    if not scene.pair_indices:
        return out, min_sep
    world = pose_all(scene, state)
    for ia, ib in scene.pair_indices:
        fld = separation_field(world[ia], world[ib], scene.params.eps1, scene.params.eps2)
        out = out + ssdf_ssdf_force(world[ia], world[ib], fld, scene.params)
        m = float(np.min(fld.values.real))
        min_sep = min(min_sep, m)
    return out, min_sep


def inverse_dynamics(scene: Scene, state: SceneState, vdot: np.ndarray) -> np.ndarray:
    """Controls that realize the requested acceleration: closed form, no
    iteration."""
    vdot = np.asarray(vdot)
    if vdot.shape != (scene.n,):
        raise ValueError("vdot length must match the scene's free DOFs")
    return mass_matrix(scene, state) @ vdot + bias_force(scene, state) - total_contact_force(scene, state)


def forward_dynamics(scene: Scene, state: SceneState, tau: np.ndarray | None = None) -> np.ndarray:
    """Acceleration under controls, bias, and contact. The mass matrix is
    inverted per 6x6 block (diagonal linear part, 3x3 symmetric solve)."""
    if tau is None:
        tau = scene.tau(state.time)
    tau = np.asarray(tau)
    if tau.shape != (scene.n,):
        raise ValueError("tau length must match the scene's free DOFs")
    rhs = tau - bias_force(scene, state) + total_contact_force(scene, state)
    vdot = np.zeros(scene.n, dtype=rhs.dtype)
    for k, i in enumerate(scene.free_indices):
        body = scene.bodies[i]
        s = 6 * k
        vdot[s : s + 3] = rhs[s : s + 3] / body.mass
        R = quat_to_matrix(state.q[k, 3:])
        Iw = R @ body.inertia @ R.T
        try:
            vdot[s + 3 : s + 6] = np.linalg.solve(Iw, rhs[s + 3 : s + 6])
        except np.linalg.LinAlgError:
            raise ValueError(f"body {body.name}: rotational inertia is singular") from None
    return vdot


def _advance_q(q: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
    """Advance free-body poses along a velocity sample: translation linearly,
    orientation through the quaternion exponential map."""
    out = q.astype(np.result_type(q.dtype, v.dtype), copy=True)
    nf = q.shape[0]
    for k in range(nf):
        s = 6 * k
        out[k, :3] = q[k, :3] + dt * v[s : s + 3]
        dq = quat_from_rotvec(dt * v[s + 3 : s + 6])
        out[k, 3:] = quat_multiply(dq, q[k, 3:])
    return out


# Beyond this magnitude squared distances overflow float64; treat the state
# as diverged before the overflow can corrupt downstream arithmetic.
_DIVERGENCE_LIMIT = 1e150


def _check_finite(state: SceneState, scene: Scene):
    ok_q = np.isfinite(state.q) & (np.abs(state.q) < _DIVERGENCE_LIMIT)
    if not ok_q.all():
        k, j = np.unravel_index(int(np.argmin(ok_q)), state.q.shape)
        name = scene.bodies[scene.free_indices[k]].name
        coord = ["tx", "ty", "tz", "qw", "qx", "qy", "qz"][j]
        raise DivergenceError(f"non-finite pose coordinate {coord} of body {name}")
    ok_v = np.isfinite(state.v) & (np.abs(state.v) < _DIVERGENCE_LIMIT)
    if not ok_v.all():
        j = int(np.argmin(ok_v))
        name = scene.bodies[scene.free_indices[j // 6]].name
        coord = ["vx", "vy", "vz", "wx", "wy", "wz"][j % 6]
        raise DivergenceError(f"non-finite velocity coordinate {coord} of body {name}")


def step(scene: Scene, state: SceneState, dt: float, integrator: str = "rk4") -> SceneState:
    """One explicit step. Euler or classical RK4 on (q, v); orientation is
    advanced on the group via the exponential map, with RK4 combining the
    stage velocity samples before the single exponential update. Kinematic
    bodies follow their trajectories evaluated at the stage times."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    t = state.time
    if integrator == "euler":
        a1 = forward_dynamics(scene, state, scene.tau(t))
        q_new = _advance_q(state.q, state.v, dt)
        v_new = state.v + dt * a1
    elif integrator == "rk4":
        v1 = state.v
        a1 = forward_dynamics(scene, state, scene.tau(t))
        s2 = SceneState(t + dt / 2, _advance_q(state.q, v1, dt / 2), state.v + (dt / 2) * a1)
        _check_finite(s2, scene)
        v2, a2 = s2.v, forward_dynamics(scene, s2, scene.tau(t + dt / 2))
        s3 = SceneState(t + dt / 2, _advance_q(state.q, v2, dt / 2), state.v + (dt / 2) * a2)
        _check_finite(s3, scene)
        v3, a3 = s3.v, forward_dynamics(scene, s3, scene.tau(t + dt / 2))
        s4 = SceneState(t + dt, _advance_q(state.q, v3, dt), state.v + dt * a3)
        _check_finite(s4, scene)
        v4, a4 = s4.v, forward_dynamics(scene, s4, scene.tau(t + dt))
        v_eff = (v1 + 2 * v2 + 2 * v3 + v4) / 6.0
        a_eff = (a1 + 2 * a2 + 2 * a3 + a4) / 6.0
        q_new = _advance_q(state.q, v_eff, dt)
        v_new = state.v + dt * a_eff
    else:
        raise ValueError(f"unknown integrator {integrator!r} (use 'euler' or 'rk4')")
    if q_new.shape[0]:
        q_new[:, 3:] = quat_normalize(q_new[:, 3:])
    out = SceneState(t + dt, q_new, v_new)
    _check_finite(out, scene)
    return out


@dataclass
class RolloutResult:
    states: list
    min_separation: np.ndarray
    step_seconds: np.ndarray

    @property
    def max_penetration(self) -> float:
        return float(max(0.0, -np.min(self.min_separation)))


def rollout(scene: Scene, state: SceneState, dt: float, n_steps: int, integrator: str = "rk4", record_separation: bool = True) -> RolloutResult:
    """Integrate n_steps and record states, per-step wall time, and (when
    requested) the minimum separation-field value seen at each state."""
    states = [state.copy()]
    seps = []
    times = []

    def min_sep(st):
        if not record_separation:
            return np.nan
        return _contact_force(scene, st)[1]

    seps.append(min_sep(state))
    cur = state
    for istep in range(n_steps):
        t0 = time.perf_counter()
        try:
            cur = step(scene, cur, dt, integrator)
        except DivergenceError as e:
            raise DivergenceError(f"step {istep + 1}: {e}") from None
        times.append(time.perf_counter() - t0)
        states.append(cur.copy())
        seps.append(min_sep(cur))
    return RolloutResult(states, np.asarray(seps), np.asarray(times))


def trajectory_csv(scene: Scene, result: RolloutResult) -> str:
    """One row per step per body: pose and world spatial velocity."""
    lines = ["t,body_id,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz"]
    for st in result.states:
        for i, body in enumerate(scene.bodies):
            if body.kind == "kinematic":
                pose = body.motion.pose(st.time)
                vel = body.motion.velocity(st.time)
            else:
                k = scene.free_indices.index(i)
                pose = Pose(st.q[k, :3], st.q[k, 3:])
                vel = st.v[6 * k : 6 * k + 6]
            row = [st.time, body.name, *pose.translation, *pose.quaternion, *vel]
            lines.append(",".join("%.17g" % x if not isinstance(x, str) else x for x in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Inertia helpers for the analytic primitives (uniform density, about the
# center of mass)


def box_inertia(mass: float, size) -> np.ndarray:
    sx, sy, sz = np.asarray(size, dtype=float)
    return mass / 12.0 * np.diag([sy**2 + sz**2, sx**2 + sz**2, sx**2 + sy**2])


def sphere_inertia(mass: float, radius: float) -> np.ndarray:
    return 0.4 * mass * radius**2 * np.eye(3)


def cylinder_inertia(mass: float, radius: float, height: float) -> np.ndarray:
    ixy = mass * (3 * radius**2 + height**2) / 12.0
    return np.diag([ixy, ixy, 0.5 * mass * radius**2])


def composite_box_inertia(mass: float, members) -> tuple[np.ndarray, np.ndarray]:
    """Center of mass and inertia (about that COM) of a set of uniform-
    density member boxes given as (size, offset) pairs. Overlap between
    members is double counted; keep overlaps small."""
    sizes = [np.asarray(s, dtype=float) for s, _ in members]
    offsets = [np.asarray(o, dtype=float) for _, o in members]
    vols = np.array([np.prod(s) for s in sizes])
    masses = mass * vols / vols.sum()
    com = sum(m * o for m, o in zip(masses, offsets)) / mass
    inertia = np.zeros((3, 3))
    for m, s, o in zip(masses, sizes, offsets):
        r = o - com
        inertia += box_inertia(m, s) + m * (np.dot(r, r) * np.eye(3) - np.outer(r, r))
    return com, inertia
