import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nbvsearch.camera import (
    CameraView,
    colinearity_jacobian,
    jacobians_many,
    project,
    project_many,
    read_cameras,
    rotation_from_angles,
    to_global,
    to_local,
    wrap_yaw,
    write_cameras,
)
from nbvsearch.exceptions import BehindCameraError, DatasetSchemaError
from oracles import camera_axes

angles = st.tuples(st.floats(-math.pi / 2, math.pi / 2), st.floats(-math.pi, math.pi))


@given(angles)
def test_rotation_is_proper_and_matches_axes(a):
    R = rotation_from_angles(*a)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(R, np.column_stack(camera_axes(*a)), atol=1e-15)


def test_nadir_projection_of_point_below():
    cam = CameraView((0, 0, 10), -math.pi / 2, 0.0)
    np.testing.assert_allclose(cam.direction, [0, 0, -1], atol=1e-15)
    u, v = project(cam, (0, 0, 0))
    assert u == pytest.approx(0, abs=1e-15) and v == pytest.approx(0, abs=1e-15)


def test_point_behind_is_not_projected():
    cam = CameraView((0, 0, 10), -math.pi / 2, 0.0)
    assert project(cam, (0, 0, 20)) is None
    with pytest.raises(BehindCameraError):
        colinearity_jacobian(cam, (0, 0, 20))


def test_field_of_view_edges():
    cam = CameraView.from_fov((0, 0, 0), 0.0, 0.0, hfov_deg=90, vfov_deg=60)
    assert cam.half_width == pytest.approx(1.0)
    assert cam.hfov_deg == pytest.approx(90) and cam.vfov_deg == pytest.approx(60)
    # looking along +x, local x axis is -y
    assert project(cam, (10, -9.99, 0)) is not None
    assert project(cam, (10, -10.01, 0)) is None
    _, inside = project_many(cam, [[10, 0, 5.7], [10, 0, 5.8]])
    assert inside.tolist() == [True, False]


def test_pose_validation():
    with pytest.raises(ValueError):
        CameraView((0, 0, 0), 2.0, 0.0)
    with pytest.raises(ValueError):
        CameraView((0, 0, 0), 0.0, 0.0, f=0.0)
    with pytest.raises(ValueError):
        CameraView((0, 0, np.inf), 0.0, 0.0)
    assert CameraView((0, 0, 0), 0.0, 3 * math.pi).yaw == pytest.approx(math.pi)


@given(st.floats(-50, 50))
def test_wrap_yaw_range(y):
    w = wrap_yaw(y)
    assert -math.pi < w <= math.pi
    assert math.cos(w) == pytest.approx(math.cos(y), abs=1e-9)
    assert math.sin(w) == pytest.approx(math.sin(y), abs=1e-9)


def _random_cams(rng, n):
    pos = rng.uniform(-50, 50, (n, 3))
    pitch = rng.uniform(-math.pi / 2, math.pi / 2, n)
    yaw = rng.uniform(-math.pi, math.pi, n)
    return [CameraView(p, a, b, f=float(rng.uniform(0.5, 3))) for p, a, b in zip(pos, pitch, yaw)]


def test_round_trip_1e4():
    rng = np.random.default_rng(0)
    worst = 0.0
    for cam in _random_cams(rng, 100):
        pts = rng.uniform(-100, 100, (100, 3))
        back = to_global(cam, to_local(cam, pts))
        worst = max(worst, np.abs(back - pts).max())
    assert worst < 1e-9


def _fd_jacobian(cam, p, h):
    J = np.zeros((2, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        a, b = to_local(cam, p + e), to_local(cam, p - e)
        J[:, k] = (cam.f * a[:2] / a[2] - cam.f * b[:2] / b[2]) / (2 * h)
    return J


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(1)
    cams = _random_cams(rng, 1000)
    worst = 0.0
    for cam in cams:
        # point in front of the camera at a random depth and offset
        local = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), 1.0]) * rng.uniform(1, 40)
        p = to_global(cam, local)
        J = colinearity_jacobian(cam, p)
        Jfd = _fd_jacobian(cam, p, 1e-5 * max(1.0, np.linalg.norm(local)))
        worst = max(worst, np.linalg.norm(J - Jfd) / np.linalg.norm(Jfd))
    assert worst < 1e-4


def test_jacobian_annihilates_line_of_sight():
    # moving a point along the viewing ray leaves its projection unchanged
    rng = np.random.default_rng(2)
    for cam in _random_cams(rng, 50):
        p = to_global(cam, [0.3, -0.2, 7.0])
        J = colinearity_jacobian(cam, p)
        ray = (p - cam.position) / np.linalg.norm(p - cam.position)
        np.testing.assert_allclose(J @ ray, 0.0, atol=1e-12)


def test_jacobians_many_matches_single():
    cam = CameraView((1, 2, 20), -1.2, 0.4)
    pts = to_global(cam, np.array([[0.1, 0.2, 5.0], [-0.3, 0.1, 9.0]]))
    J = jacobians_many(cam, pts)
    assert J.shape == (2, 2, 3)
    np.testing.assert_array_equal(J[1], colinearity_jacobian(cam, pts[1]))


def test_pose_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    cams = _random_cams(rng, 20)
    write_cameras(tmp_path / "c.csv", cams, [f"img{i}" for i in range(20)])
    ids, back = read_cameras(tmp_path / "c.csv")
    assert ids == [f"img{i}" for i in range(20)]
    for a, b in zip(cams, back):
        np.testing.assert_allclose(a.position, b.position, rtol=0, atol=0)
        np.testing.assert_allclose(a.rotation, b.rotation, atol=1e-12)
        assert a.f == b.f and a.half_width == pytest.approx(b.half_width, rel=1e-12)


def test_pose_csv_errors_name_the_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("id,x,y,z,pitch_deg,yaw_deg,f,hfov_deg,vfov_deg\n"
                 "a,0,0,10,-90,0,1,84,62\n"
                 "b,0,0,10,-90,north,1,84,62\n")
    with pytest.raises(DatasetSchemaError, match="line 3"):
        read_cameras(p)
    p.write_text("id,x,y,z\n")
    with pytest.raises(DatasetSchemaError, match="missing column"):
        read_cameras(p)
    p.write_text("id,x,y,z,pitch_deg,yaw_deg,f,hfov_deg,vfov_deg\n"
                 "a,0,0,10,-90,0,1,84,62\na,0,0,10,-90,0,1,84,62\n")
    with pytest.raises(DatasetSchemaError, match="duplicate"):
        read_cameras(p)
