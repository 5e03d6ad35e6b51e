import numpy as np
import pytest

from softcontact.collision import separation_field
from softcontact.contact import (
    ContactParams,
    dissipation_factor,
    point_plane_force,
    point_ssdf_force,
    ssdf_ssdf_force,
)
from softcontact.core import quat_normalize, softplus
from softcontact.geometry import Pose, box_aopc, pose_aopc, sphere_aopc
from softcontact.verify import cs_gradient, fd_gradient


def posed(aopc, translation=(0, 0, 0), quaternion=(1, 0, 0, 0), dof=0, n=12, name="b",
          velocity=None, kinematic=False):
    pose = Pose(np.asarray(translation, dtype=float), quat_normalize(np.asarray(quaternion, dtype=float)))
    v = np.zeros(n)
    if velocity is not None and not kinematic:
        v[dof : dof + 6] = velocity
    return pose_aopc(aopc, pose, v, None if kinematic else dof, name,
                     prescribed_velocity=velocity if kinematic else None)


def test_params_validation():
    with pytest.raises(ValueError):
        ContactParams(k=0.0)
    with pytest.raises(ValueError):
        ContactParams(mu=-0.1)
    with pytest.raises(ValueError):
        ContactParams(v_d=0.0)
    with pytest.raises(ValueError):
        ContactParams(eps2=-1e-3)
    ContactParams()  # defaults are valid


def test_dissipation_branches():
    assert dissipation_factor(np.array(2.0)) == 0.0
    assert dissipation_factor(np.array(5.0)) == 0.0
    assert dissipation_factor(np.array(0.0)) == 1.0
    assert dissipation_factor(np.array(-1.0)) == 2.0
    assert dissipation_factor(np.array(1.0)) == 0.25
    # continuity and first-derivative agreement at the joints
    h = 1e-7
    for x0, d0, dp in ((0.0, 1.0, -1.0), (2.0, 0.0, 0.0)):
        left = float(dissipation_factor(np.array(x0 - h)))
        right = float(dissipation_factor(np.array(x0 + h)))
        assert abs(left - d0) < 2 * h and abs(right - d0) < 2 * h
        dl = (d0 - float(dissipation_factor(np.array(x0 - h)))) / h
        dr = (float(dissipation_factor(np.array(x0 + h))) - d0) / h
        assert abs(dl - dp) < 1e-6 and abs(dr - dp) < 1e-6


def test_zero_force_at_branch_boundary():
    params = ContactParams()
    # v_n = 2 v_d exactly: d(2) = 0 so the whole force vanishes
    lam = point_plane_force(
        np.array([0.0, 0.0, -0.01]),
        np.array([0.3, 0.0, 2.0 * params.v_d]),
        np.zeros(3),
        np.array([0.0, 0.0, 1.0]),
        params,
    )
    np.testing.assert_allclose(lam, 0.0, atol=1e-30)


def test_frictionless_force_is_normal():
    params = ContactParams(mu=0.0)
    n = np.array([0.0, 0.0, 1.0])
    lam = point_plane_force(np.array([0, 0, -0.02]), np.array([0.4, -0.2, -0.05]), np.zeros(3), n, params)
    assert abs(lam[0]) == 0.0 and abs(lam[1]) == 0.0
    assert lam[2] > 0


def test_softplus_tail_force_at_distance():
    params = ContactParams()
    phi = 10 * params.eps3
    lam = point_plane_force(np.array([0, 0, phi]), np.zeros(3), np.zeros(3), np.array([0, 0, 1.0]), params)
    expected = params.k * params.eps3 * np.log1p(np.exp(-10.0))
    assert 0 < lam[2] < 2 * params.k * params.eps3 * np.exp(-10.0)
    np.testing.assert_allclose(lam[2], expected, rtol=1e-12)


def test_normal_force_nonnegative_friction_cone():
    rng = np.random.default_rng(0)
    params = ContactParams(mu=0.7)
    for _ in range(200):
        p = rng.standard_normal(3)
        v = rng.standard_normal(3) * rng.uniform(0.001, 3)
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        plane_p = rng.standard_normal(3)
        lam = point_plane_force(p, v, plane_p, n, params)
        lam_n = np.dot(lam, n)
        lam_t = lam - lam_n * n
        assert lam_n >= 0
        assert np.linalg.norm(lam_t) <= params.mu * lam_n + 1e-12
        v_t = v - np.dot(v, n) * n
        assert np.dot(lam_t, v_t) <= 1e-15


def test_friction_approaches_cone_boundary():
    params = ContactParams(mu=0.5, v_s=1e-3)
    n = np.array([0.0, 0.0, 1.0])
    lam = point_plane_force(np.array([0, 0, -0.01]), np.array([5.0, 0, 0]), np.zeros(3), n, params)
    lam_n = lam[2]
    ratio = abs(lam[0]) / (params.mu * lam_n)
    assert 0.999 < ratio <= 1.0


def test_point_ssdf_single_plane_exact():
    from softcontact.geometry import LocalAopc

    cloud = LocalAopc([[0.0, 0, 0]], [[0, 0, 1.0]],
                      [[0.5, 0.5, 0], [-0.5, 0.5, 0], [-0.5, -0.5, 0], [0.5, -0.5, 0]],
                      [[0, 1, 2, 3]])
    w = posed(cloud, dof=0, name="plane")
    params = ContactParams()
    p = np.array([0.1, -0.2, -0.004])
    v = np.array([0.01, 0.03, -0.02])
    J = np.zeros((3, 12))
    J[:, 6:9] = np.eye(3)
    out = point_ssdf_force(w, p, v, J, params)
    lam = point_plane_force(p, v - w.velocities[0], w.points[0], w.normals[0], params)
    expected = (J - w.jacobians[0]).T @ lam
    np.testing.assert_allclose(out, expected, atol=1e-18)


def test_static_penetrating_point_pushed_out():
    # point penetrating a static plane by delta: the point's body feels
    # +k*softplus(delta) along the plane normal
    from softcontact.geometry import LocalAopc

    cloud = LocalAopc([[0.0, 0, 0]], [[0, 0, 1.0]],
                      [[0.5, 0.5, 0], [-0.5, 0.5, 0], [-0.5, -0.5, 0], [0.5, -0.5, 0]],
                      [[0, 1, 2, 3]])
    w = posed(cloud, kinematic=True, name="plane", n=6)
    params = ContactParams()
    delta = 0.002
    J = np.zeros((3, 6))
    J[:, 0:3] = np.eye(3)
    out = point_ssdf_force(w, np.array([0.0, 0.0, -delta]), np.zeros(3), J, params)
    expected_z = params.k * float(softplus(np.array(delta), params.eps3))
    np.testing.assert_allclose(out[:3], [0, 0, expected_z], rtol=1e-12, atol=1e-15)
    assert out[2] > 0  # pushes the point along +n, out of the plane


def test_far_bodies_tail_bound():
    s = sphere_aopc(0.4, 96)
    params = ContactParams()
    a = posed(s, name="a")
    b = posed(s, (0, 0, 5.0), dof=6, name="b")
    fld = separation_field(a, b, params.eps1, params.eps2)
    out = ssdf_ssdf_force(a, b, fld, params)
    # gap is ~4.2 m, eps3 1e-3: force is utterly negligible but finite
    assert np.isfinite(out).all()
    assert np.linalg.norm(out) < 1e-12


def test_symmetric_sphere_overlap_action_reaction():
    s = sphere_aopc(0.5, 216)
    params = ContactParams()
    a = posed(s, name="a")
    b = posed(s, (0, 0, 0.9), dof=6, name="b")
    fld = separation_field(a, b, params.eps1, params.eps2)
    out = ssdf_ssdf_force(a, b, fld, params)
    np.testing.assert_allclose(out[:3] + out[6:9], 0.0, atol=1e-12)
    assert out[2] < 0 < out[8]  # pushed apart along z


def test_box_resting_on_kinematic_ground():
    box = box_aopc([0.4, 0.4, 0.2], 96)
    ground = box_aopc([2.0, 2.0, 0.2], 96)
    params = ContactParams()
    delta = 5e-4
    g = posed(ground, (0, 0, -0.1), kinematic=True, name="ground", n=6)
    bx = posed(box, (0, 0, 0.1 - delta), dof=0, n=6, name="box")
    fld = separation_field(g, bx, params.eps1, params.eps2)
    out = ssdf_ssdf_force(g, bx, fld, params)
    expected = params.k * float(softplus(np.array(delta), params.eps3))
    np.testing.assert_allclose(out[2], expected, rtol=0.02)
    np.testing.assert_allclose(out[:2], 0.0, atol=1e-10)


def test_momentum_neutrality():
    rng = np.random.default_rng(1)
    s1 = sphere_aopc(0.5, 150)
    s2 = box_aopc([0.7, 0.9, 0.8], 150)
    params = ContactParams(k=1e3)
    for _ in range(5):
        a = posed(s1, rng.standard_normal(3) * 0.1, name="a",
                  velocity=rng.standard_normal(6) * 0.05)
        b = posed(s2, np.array([0.8, 0, 0]) + rng.standard_normal(3) * 0.1,
                  rng.standard_normal(4), dof=6, name="b",
                  velocity=rng.standard_normal(6) * 0.05)
        fld = separation_field(a, b, params.eps1, params.eps2)
        out = ssdf_ssdf_force(a, b, fld, params)
        assert np.abs(out[:3] + out[6:9]).max() < 1e-10


def test_field_length_mismatch_rejected():
    s = sphere_aopc(0.4, 54)
    s2 = sphere_aopc(0.4, 150)
    params = ContactParams()
    a = posed(s, name="a")
    b = posed(s, (1.5, 0, 0), dof=6, name="b")
    fld = separation_field(a, b, params.eps1, params.eps2)
    c = posed(s2, (1.5, 0, 0), dof=6, name="c")
    with pytest.raises(ValueError, match="length"):
        ssdf_ssdf_force(a, c, fld, params)
    stale = separation_field(a, b, 0.5, 0.5)
    with pytest.raises(ValueError, match="temperatures"):
        ssdf_ssdf_force(a, b, stale, params)


def test_force_gradient_matches_finite_differences():
    # d(force)/d(pose, velocity) via complex step vs central differences at
    # states clear of the dissipation kinks
    rng = np.random.default_rng(2)
    box1 = box_aopc([0.6, 0.5, 0.7], 54)
    box2 = box_aopc([0.8, 0.8, 0.4], 54)
    params = ContactParams(k=2e3)
    checked = 0
    while checked < 10:
        t = np.array([0.0, 0.05, 0.52]) + 0.03 * rng.standard_normal(3)
        q = quat_normalize(np.array([1.0, 0, 0, 0]) + 0.05 * rng.standard_normal(4))
        vel = 0.08 * rng.standard_normal(6)

        def f(theta):
            tq = theta[:3]
            qq = theta[3:7] / np.sqrt(np.sum(theta[3:7] * theta[3:7]))
            vfull = np.zeros(12, dtype=theta.dtype)
            vfull[6:] = theta[7:]
            a = pose_aopc(box1, Pose(np.zeros(3), np.array([1.0, 0, 0, 0])), vfull, 0, "a")
            b = pose_aopc(box2, Pose(tq, qq), vfull, 6, "b")
            fld = separation_field(a, b, params.eps1, params.eps2)
            return ssdf_ssdf_force(a, b, fld, params)

        theta = np.concatenate([t, q, vel])
        checked += 1
        g_cs = cs_gradient(f, theta)
        g_fd = fd_gradient(f, theta, 1e-6 * (1 + np.abs(theta)))
        scale = max(1e-8, np.abs(g_fd).max())
        assert np.abs(g_cs - g_fd).max() / scale < 1e-3
