import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from handspin.geometry import (
    Transform3,
    compose,
    plane_basis,
    project_to_plane,
    rot_y,
    rot_z,
    shoelace_area,
    translate_z,
)

angles = st.floats(-10.0, 10.0, allow_nan=False)


def assert_same(a: Transform3, b: Transform3, tol=1e-12):
    np.testing.assert_allclose(a.matrix(), b.matrix(), atol=tol)


def test_rot_z_cases():
    assert_same(rot_z(0.0), Transform3.identity())
    np.testing.assert_allclose(rot_z(math.pi / 2).apply([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-15)


def test_rot_y_cases():
    assert_same(rot_y(0.0), Transform3.identity())
    np.testing.assert_allclose(rot_y(math.pi / 2).apply([0.0, 0.0, 1.0]), [1.0, 0.0, 0.0], atol=1e-15)


@given(angles)
def test_rot_z_inverse(a):
    assert_same(compose(rot_z(a), rot_z(-a)), Transform3.identity())


@given(angles, angles)
def test_rot_y_group(a, b):
    assert_same(rot_y(a) @ rot_y(b), rot_y(a + b))


@given(st.floats(-100, 100), st.floats(-100, 100))
def test_translate_z_adds(a, b):
    assert_same(translate_z(a) @ translate_z(b), translate_z(a + b))


def test_translate_z_cases():
    assert_same(translate_z(0.0), Transform3.identity())
    np.testing.assert_allclose(translate_z(2.5).apply([0.0, 0.0, 0.0]), [0.0, 0.0, 2.5])


@settings(max_examples=50)
@given(angles, angles, st.floats(-5, 5))
def test_compose_identity_and_inverse(a, b, d):
    t = rot_z(a) @ rot_y(b) @ translate_z(d)
    assert_same(compose(Transform3.identity(), t), t)
    assert_same(compose(t, t.inverse()), Transform3.identity(), tol=1e-11)


def test_matrix_roundtrip():
    t = rot_z(0.3) @ translate_z(2.0) @ rot_y(-1.1)
    assert_same(Transform3.from_matrix(t.matrix()), t)


def test_project_to_plane_cases():
    z = (0.0, 0.0, 1.0)
    pts = np.array([[0.3, -1.2, 0.0], [2.0, 5.0, 0.0]])
    np.testing.assert_array_equal(project_to_plane(pts, z), pts[:, :2])
    np.testing.assert_array_equal(project_to_plane([0.0, 0.0, 5.0], z), [[0.0, 0.0]])
    np.testing.assert_array_equal(project_to_plane([1.0, 1.0, 1.0], z), [[1.0, 1.0]])


@given(st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_plane_basis_orthonormal(n):
    u, v, w = plane_basis(n)
    B = np.array([u, v, w])
    np.testing.assert_allclose(B @ B.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(B) == pytest.approx(1.0)


def test_plane_basis_rejects_zero():
    with pytest.raises(ValueError):
        plane_basis([0.0, 0.0, 0.0])


def test_shoelace_cases():
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    assert shoelace_area(sq) == 1.0
    assert shoelace_area(sq[::-1]) == 1.0
    ang = 2 * np.pi * np.arange(8) / 8
    assert shoelace_area(np.column_stack((np.cos(ang), np.sin(ang)))) == pytest.approx(2.8284271247461903, abs=1e-12)


def test_shoelace_needs_three_points():
    with pytest.raises(ValueError):
        shoelace_area([(0, 0), (1, 0)])


@given(st.integers(3, 40), st.floats(0.01, 10))
def test_regular_polygon_area(n, R):
    ang = 2 * np.pi * np.arange(n) / n
    area = shoelace_area(np.column_stack((R * np.cos(ang), R * np.sin(ang))))
    assert area == pytest.approx(0.5 * n * R**2 * math.sin(2 * math.pi / n), rel=1e-12)
