"""Oriented point clouds: construction, file format, and rigid posing.

A collision body is a set of planar quadrangle patches covering its surface.
Each patch contributes a center point with an outward unit normal; the quad
corner vertices (with face-vertex incidence) are kept for contact point
extraction. Generators produce near-isotropic quadrangulations of analytic
primitives; arbitrary pre-quadrangulated shapes enter through the text format.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import norm, quat_to_matrix, skew


class AopcError(ValueError):
    pass


@dataclass(frozen=True)
class LocalAopc:
    """Body-frame oriented point cloud with quad-vertex incidence.

    points   : (I, 3) quad centers, meters
    normals  : (I, 3) outward unit normals
    vertices : (V, 3) quad corner vertices, meters
    faces    : (I, 4) vertex indices of the quad behind each point
    """

    points: np.ndarray
    normals: np.ndarray
    vertices: np.ndarray
    faces: np.ndarray
    name: str = ""

    def __post_init__(self):
        points = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        normals = np.ascontiguousarray(np.asarray(self.normals, dtype=float))
        vertices = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        faces = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if points.ndim != 2 or points.shape[1] != 3 or points.shape[0] < 1:
            raise AopcError("points must be a non-empty (I, 3) array")
        if normals.shape != points.shape:
            raise AopcError("normals must match points shape")
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise AopcError("vertices must be a (V, 3) array")
        if faces.shape != (points.shape[0], 4):
            raise AopcError("faces must be an (I, 4) index array")
        nn = norm(normals)
        if np.any(np.abs(nn - 1.0) > 1e-9):
            i = int(np.argmax(np.abs(nn - 1.0)))
            raise AopcError(f"normal {i} has norm {nn[i]:.12g}, expected 1")
        V = vertices.shape[0]
        if faces.min(initial=0) < 0 or (V == 0) or faces.max(initial=-1) >= V:
            raise AopcError("face references a vertex index out of range")
        used = np.zeros(V, dtype=bool)
        used[faces.ravel()] = True
        if not used.all():
            raise AopcError(f"vertex {int(np.argmin(used))} belongs to no face")
        for arr in (points, normals, vertices, faces):
            arr.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    def spacing(self) -> float:
        """Max nearest-neighbor distance among the points (coverage scale)."""
        p = self.points
        if p.shape[0] == 1:
            return 0.0
        d2 = np.sum((p[:, None, :] - p[None, :, :]) ** 2, axis=-1)
        np.fill_diagonal(d2, np.inf)
        return float(np.sqrt(d2.min(axis=1).max()))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: world_x = R(quaternion) @ local_x + translation."""

    translation: np.ndarray
    quaternion: np.ndarray  # (w, x, y, z), unit

    def __post_init__(self):
        t = np.asarray(self.translation)
        q = np.asarray(self.quaternion)
        if t.shape != (3,) or q.shape != (4,):
            raise ValueError("Pose needs translation (3,) and quaternion (4,)")
        if not np.iscomplexobj(q) and abs(float(np.sqrt(np.sum(q * q))) - 1.0) > 1e-9:
            raise ValueError("Pose quaternion must be unit (renormalize first)")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "quaternion", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))


@dataclass(frozen=True)
class WorldAopc:
    """A LocalAopc posed into world frame, with per-point velocities and
    Jacobians against the scene's generalized velocity (n columns).

    jacobians is (I, 3, n); for kinematic bodies it is all zeros and the
    velocities carry the prescribed rigid motion instead.
    """

    points: np.ndarray
    normals: np.ndarray
    vertices: np.ndarray
    faces: np.ndarray
    velocities: np.ndarray
    jacobians: np.ndarray
    body_id: str = ""

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]


def pose_aopc(
    aopc: LocalAopc,
    pose: Pose,
    gen_velocity: np.ndarray,
    dof_start: int | None,
    body_id: str = "",
    prescribed_velocity: np.ndarray | None = None,
) -> WorldAopc:
    """Pose an AOPC into world frame and attach point velocities/Jacobians.

    Free bodies occupy a 6-column block of the generalized velocity starting
    at dof_start, ordered [world linear; world angular]; their point Jacobian
    is [I3 | -skew(p_world - t)] in that block. Kinematic bodies pass
    dof_start=None and a prescribed world spatial velocity (6,) taken at the
    body origin; their Jacobians are zero.
    """
    v = np.asarray(gen_velocity)
    n = v.shape[0]
    R = quat_to_matrix(pose.quaternion)
    t = pose.translation
    pts = aopc.points @ R.T + t
    nrm = aopc.normals @ R.T
    verts = aopc.vertices @ R.T + t
    I = aopc.num_points
    dtype = np.result_type(pts.dtype, v.dtype)
    J = np.zeros((I, 3, n), dtype=dtype)
    if dof_start is None:
        if prescribed_velocity is None:
            prescribed_velocity = np.zeros(6)
        w = np.asarray(prescribed_velocity)
        vel = w[:3] + np.cross(w[3:6], pts - t)
        vel = vel.astype(dtype, copy=False)
    else:
        s = int(dof_start)
        if s < 0 or s + 6 > n:
            raise ValueError("dof_start block exceeds generalized dimension")
        J[:, :, s : s + 3] = np.eye(3, dtype=dtype)
        J[:, :, s + 3 : s + 6] = -skew(pts - t)
        vel = np.einsum("ikn,n->ik", J, v)
    return WorldAopc(pts, nrm, verts, aopc.faces, vel, J, body_id=body_id)


def transform_aopc(aopc: LocalAopc, pose: Pose) -> LocalAopc:
    """Rigidly transform an AOPC, returning a new body-frame cloud."""
    R = quat_to_matrix(pose.quaternion)
    t = pose.translation
    return LocalAopc(
        aopc.points @ R.T + t,
        aopc.normals @ R.T,
        aopc.vertices @ R.T + t,
        aopc.faces,
        name=aopc.name,
    )


# ---------------------------------------------------------------------------
# Primitive generators


def _check_outward(points: np.ndarray, normals: np.ndarray, center) -> None:
    # Generation-time sanity for star-shaped primitives: every normal points
    # away from the reference center.
    if np.any(np.sum((points - np.asarray(center)) * normals, axis=-1) <= 0):
        raise AopcError("generator produced an inward-facing normal")


def _weld(face_corners: np.ndarray, decimals: int = 9):
    """Merge coincident corner vertices. face_corners is (I, 4, 3)."""
    flat = face_corners.reshape(-1, 3)
    keys = np.round(flat, decimals)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    vertices = flat[first]
    faces = inverse.reshape(-1, 4)
    return vertices, faces


def _grid_quads(u: np.ndarray, v: np.ndarray):
    """Corner coordinates (nu*nv, 4, 2) of the cells of a u x v lattice."""
    uu0, vv0 = np.meshgrid(u[:-1], v[:-1], indexing="ij")
    uu1, vv1 = np.meshgrid(u[1:], v[1:], indexing="ij")
    c = np.stack(
        [
            np.stack([uu0, vv0], axis=-1),
            np.stack([uu1, vv0], axis=-1),
            np.stack([uu1, vv1], axis=-1),
            np.stack([uu0, vv1], axis=-1),
        ],
        axis=-2,
    )
    return c.reshape(-1, 4, 2)


def box_aopc(size, resolution: int = 6, name: str = "box") -> LocalAopc:
    """Axis-aligned box quadrangulated with near-square cells.

    resolution is the target total point count; at resolution 6 each face is
    a single quad (8 welded corner vertices).
    """
    size = np.asarray(size, dtype=float)
    if size.shape != (3,) or np.any(size <= 0):
        raise AopcError("box size must be 3 positive extents")
    if resolution < 6:
        raise AopcError("resolution must be at least 6")
    sx, sy, sz = size
    area = 2 * (sx * sy + sy * sz + sz * sx)
    h = math.sqrt(area / resolution)
    corners = []
    centers = []
    normals = []
    # (fixed axis, sign, in-plane axes)
    for ax in range(3):
        u_ax, v_ax = (ax + 1) % 3, (ax + 2) % 3
        nu = max(1, math.ceil(size[u_ax] / h))
        nv = max(1, math.ceil(size[v_ax] / h))
        u = np.linspace(-size[u_ax] / 2, size[u_ax] / 2, nu + 1)
        v = np.linspace(-size[v_ax] / 2, size[v_ax] / 2, nv + 1)
        quads2d = _grid_quads(u, v)
        for sign in (+1.0, -1.0):
            q3 = np.zeros((quads2d.shape[0], 4, 3))
            q3[:, :, u_ax] = quads2d[:, :, 0]
            q3[:, :, v_ax] = quads2d[:, :, 1]
            q3[:, :, ax] = sign * size[ax] / 2
            corners.append(q3)
            centers.append(q3.mean(axis=1))
            nrm = np.zeros((q3.shape[0], 3))
            nrm[:, ax] = sign
            normals.append(nrm)
    corners = np.concatenate(corners)
    vertices, faces = _weld(corners)
    centers = np.concatenate(centers)
    normals = np.concatenate(normals)
    _check_outward(centers, normals, np.zeros(3))
    return LocalAopc(centers, normals, vertices, faces, name=name)


def sphere_aopc(radius: float, resolution: int = 384, name: str = "sphere") -> LocalAopc:
    """Sphere quadrangulated by an equiangular cubed-sphere grid.

    Quad centers are radially projected onto the sphere, so normals are the
    exact analytic outward normals p / |p|.
    """
    radius = float(radius)
    if radius <= 0:
        raise AopcError("sphere radius must be positive")
    if resolution < 6:
        raise AopcError("resolution must be at least 6")
    n = max(1, math.ceil(math.sqrt(resolution / 6.0)))
    # Equiangular spacing keeps cell sizes nearly uniform across each face.
    a = np.tan(np.linspace(-math.pi / 4, math.pi / 4, n + 1))
    quads2d = _grid_quads(a, a)
    corners = []
    for ax in range(3):
        u_ax, v_ax = (ax + 1) % 3, (ax + 2) % 3
        for sign in (+1.0, -1.0):
            q3 = np.zeros((quads2d.shape[0], 4, 3))
            q3[:, :, u_ax] = quads2d[:, :, 0]
            q3[:, :, v_ax] = quads2d[:, :, 1]
            q3[:, :, ax] = sign
            corners.append(q3)
    corners = np.concatenate(corners)
    corners /= np.linalg.norm(corners, axis=-1, keepdims=True)
    corners *= radius
    vertices, faces = _weld(corners, decimals=12)
    mid = corners.mean(axis=1)
    nrm = mid / np.linalg.norm(mid, axis=-1, keepdims=True)
    _check_outward(radius * nrm, nrm, np.zeros(3))
    return LocalAopc(radius * nrm, nrm, vertices, faces, name=name)


def cylinder_aopc(radius: float, height: float, resolution: int = 256, name: str = "cylinder") -> LocalAopc:
    """Cylinder with axis z: lateral quad grid plus square-to-disk cap grids.

    Cap grids are not welded to the lateral sheet (the rim vertices are
    duplicated); every face is still a proper quad with an exact normal.
    """
    radius, height = float(radius), float(height)
    if radius <= 0 or height <= 0:
        raise AopcError("cylinder dimensions must be positive")
    if resolution < 6:
        raise AopcError("resolution must be at least 6")
    area = 2 * math.pi * radius * height + 2 * math.pi * radius**2
    h = math.sqrt(area / resolution)
    centers, normals, corners = [], [], []

    ntheta = max(3, math.ceil(2 * math.pi * radius / h))
    nz = max(1, math.ceil(height / h))
    theta = np.linspace(0.0, 2 * math.pi, ntheta + 1)
    z = np.linspace(-height / 2, height / 2, nz + 1)
    quads2d = _grid_quads(theta, z)
    lat = np.zeros((quads2d.shape[0], 4, 3))
    lat[:, :, 0] = radius * np.cos(quads2d[:, :, 0])
    lat[:, :, 1] = radius * np.sin(quads2d[:, :, 0])
    lat[:, :, 2] = quads2d[:, :, 1]
    th_c = 0.5 * (quads2d[:, 0, 0] + quads2d[:, 1, 0])
    z_c = 0.5 * (quads2d[:, 0, 1] + quads2d[:, 3, 1])
    lat_n = np.stack([np.cos(th_c), np.sin(th_c), np.zeros_like(th_c)], axis=-1)
    lat_c = radius * lat_n + np.stack([np.zeros_like(z_c)] * 2 + [z_c], axis=-1)
    corners.append(lat)
    centers.append(lat_c)
    normals.append(lat_n)

    ncap = max(1, math.ceil(2 * radius / h))
    g = np.linspace(-1.0, 1.0, ncap + 1)
    sq = _grid_quads(g, g)
    # Elliptical square-to-disk map: square boundary lands on the circle.
    u, v = sq[:, :, 0], sq[:, :, 1]
    dx = u * np.sqrt(np.maximum(1.0 - v * v / 2.0, 0.0)) * radius
    dy = v * np.sqrt(np.maximum(1.0 - u * u / 2.0, 0.0)) * radius
    for sign in (+1.0, -1.0):
        cap = np.stack([dx, dy, np.full_like(dx, sign * height / 2)], axis=-1)
        corners.append(cap)
        centers.append(cap.mean(axis=1))
        nrm = np.zeros((cap.shape[0], 3))
        nrm[:, 2] = sign
        normals.append(nrm)

    # Weld each sheet separately so the lateral seam (theta = 0 == 2*pi)
    # merges but cap rims keep their own vertices.
    all_v, all_f, off = [], [], 0
    for c in corners:
        vv, ff = _weld(c)
        all_v.append(vv)
        all_f.append(ff + off)
        off += vv.shape[0]
    centers = np.concatenate(centers)
    normals = np.concatenate(normals)
    _check_outward(centers, normals, np.zeros(3))
    return LocalAopc(centers, normals, np.concatenate(all_v), np.concatenate(all_f), name=name)


def box_sdf(p: np.ndarray, size, center) -> np.ndarray:
    """Exact signed distance of points to an axis-aligned box (oracle)."""
    q = np.abs(np.asarray(p) - np.asarray(center)) - np.asarray(size) / 2.0
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(np.max(q, axis=-1), 0.0)
    return outside + inside


def composite_box_aopc(members, resolution: int = 512, name: str = "composite") -> LocalAopc:
    """Union of axis-aligned boxes; faces buried inside the union are removed.

    members: sequence of (size, offset) pairs. A face survives if its center
    is not strictly inside any *other* member (margin 1e-9), so touching
    members keep their interface faces only when they are exactly coplanar.
    """
    members = [(np.asarray(s, dtype=float), np.asarray(o, dtype=float)) for s, o in members]
    if len(members) < 1:
        raise AopcError("composite needs at least one member box")
    if resolution < 6:
        raise AopcError("resolution must be at least 6")
    for s, o in members:
        if s.shape != (3,) or o.shape != (3,) or np.any(s <= 0):
            raise AopcError("composite members need positive size (3,) and offset (3,)")
    total_area = sum(2 * (s[0] * s[1] + s[1] * s[2] + s[2] * s[0]) for s, _ in members)
    parts = []
    for k, (s, o) in enumerate(members):
        res_k = max(6, math.ceil(resolution * 2 * (s[0] * s[1] + s[1] * s[2] + s[2] * s[0]) / total_area))
        b = box_aopc(s, res_k, name=f"{name}:{k}")
        pts = b.points + o
        keep = np.ones(b.num_points, dtype=bool)
        for j, (s2, o2) in enumerate(members):
            if j == k:
                continue
            keep &= box_sdf(pts, s2, o2) > -1e-9
        if not keep.any():
            raise AopcError(f"composite member {k} is entirely inside another member")
        faces = b.faces[keep]
        used = np.unique(faces)
        remap = np.full(b.num_vertices, -1, dtype=np.int64)
        remap[used] = np.arange(used.size)
        parts.append(
            (pts[keep], b.normals[keep], b.vertices[used] + o, remap[faces])
        )
    off = 0
    pts, nrms, verts, faces = [], [], [], []
    for p, n, v, f in parts:
        pts.append(p)
        nrms.append(n)
        verts.append(v)
        faces.append(f + off)
        off += v.shape[0]
    return LocalAopc(np.concatenate(pts), np.concatenate(nrms), np.concatenate(verts), np.concatenate(faces), name=name)


def generate_primitive(kind: str, dimensions, resolution: int, name: str | None = None) -> LocalAopc:
    """Dispatch to the analytic generators.

    kind: 'sphere' (dimensions: radius), 'box' (dimensions: (sx, sy, sz)),
    'cylinder' (dimensions: (radius, height)), 'composite' (dimensions:
    sequence of (size, offset) member boxes).
    """
    if kind == "sphere":
        r = dimensions if np.isscalar(dimensions) else np.asarray(dimensions).reshape(-1)[0]
        return sphere_aopc(float(r), resolution, name=name or "sphere")
    if kind == "box":
        return box_aopc(dimensions, resolution, name=name or "box")
    if kind == "cylinder":
        r, hgt = np.asarray(dimensions, dtype=float).reshape(2)
        return cylinder_aopc(r, hgt, resolution, name=name or "cylinder")
    if kind == "composite":
        return composite_box_aopc(dimensions, resolution, name=name or "composite")
    raise AopcError(f"unknown primitive kind {kind!r}")


# ---------------------------------------------------------------------------
# Text format: header `aopc <name> <I> <V>`, then I `p` lines, V `v` lines,
# and I `f` lines (0-based vertex indices). '#' starts a comment.


def export_aopc(aopc: LocalAopc) -> str:
    name = aopc.name or "aopc"
    if any(c.isspace() for c in name):
        raise AopcError("AOPC name must not contain whitespace")
    out = [f"aopc {name} {aopc.num_points} {aopc.num_vertices}"]
    for p, n in zip(aopc.points, aopc.normals):
        out.append("p " + " ".join("%.17g" % x for x in (*p, *n)))
    for v in aopc.vertices:
        out.append("v " + " ".join("%.17g" % x for x in v))
    for f in aopc.faces:
        out.append("f %d %d %d %d" % tuple(f))
    return "\n".join(out) + "\n"


def import_aopc(text: str) -> LocalAopc:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line))
    if not rows:
        raise AopcError("empty AOPC file")

    def bail(lineno, msg):
        raise AopcError(f"line {lineno}: {msg}")

    lineno, header = rows[0]
    parts = header.split()
    if len(parts) != 4 or parts[0] != "aopc":
        bail(lineno, "expected header 'aopc <name> <I> <V>'")
    name = parts[1]
    try:
        I, V = int(parts[2]), int(parts[3])
    except ValueError:
        bail(lineno, "point/vertex counts must be integers")
    if I < 1 or V < 1:
        bail(lineno, "counts must be positive")
    if len(rows) != 1 + 2 * I + V:
        bail(lineno, f"expected {1 + 2 * I + V} content lines, found {len(rows)}")

    def floats(lineno, tokens, count, what):
        if len(tokens) != count:
            bail(lineno, f"expected {count} values on {what} line")
        try:
            return [float(t) for t in tokens]
        except ValueError:
            bail(lineno, f"bad numeric value on {what} line")

    points, normals = np.empty((I, 3)), np.empty((I, 3))
    for i in range(I):
        lineno, line = rows[1 + i]
        tok = line.split()
        if tok[0] != "p":
            bail(lineno, "expected a 'p' line")
        vals = floats(lineno, tok[1:], 6, "'p'")
        points[i], normals[i] = vals[:3], vals[3:]
        nn = math.sqrt(sum(x * x for x in vals[3:]))
        if nn < 1e-12:
            bail(lineno, "zero normal")
        if abs(nn - 1.0) > 1e-6:
            warnings.warn(f"line {lineno}: normal deviates from unit length by {abs(nn - 1.0):.3g}; renormalizing")
        if abs(nn - 1.0) > 1e-12:
            # Already-unit normals are left untouched so exports round-trip
            # bit-exactly.
            normals[i] /= nn
    vertices = np.empty((V, 3))
    for v in range(V):
        lineno, line = rows[1 + I + v]
        tok = line.split()
        if tok[0] != "v":
            bail(lineno, "expected a 'v' line")
        vertices[v] = floats(lineno, tok[1:], 3, "'v'")
    faces = np.empty((I, 4), dtype=np.int64)
    for i in range(I):
        lineno, line = rows[1 + I + V + i]
        tok = line.split()
        if tok[0] != "f":
            bail(lineno, "expected an 'f' line")
        if len(tok) != 5:
            bail(lineno, "expected 4 vertex indices on 'f' line")
        try:
            idx = [int(t) for t in tok[1:]]
        except ValueError:
            bail(lineno, "bad vertex index")
        if any(ix < 0 or ix >= V for ix in idx):
            bail(lineno, f"vertex index out of range 0..{V - 1}")
        faces[i] = idx
    try:
        return LocalAopc(points, normals, vertices, faces, name=name)
    except AopcError as e:
        raise AopcError(f"invalid AOPC content: {e}") from e
