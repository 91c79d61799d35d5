import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from risloc.config import paper_v
from risloc.geometry import (
    ArrayLayout,
    DegenerateGeometryError,
    Entity,
    EulerAngles,
    Pose,
    aperture_diameter,
    direction_angles,
    distance_expansion,
    element_position,
    element_positions,
    far_field_distance,
    far_field_phase,
    fraunhofer_distance,
    inter_element_distance,
    is_near_field,
    rotation_gradient,
    rotation_matrix,
    unit_vector,
    unit_vector_gradient,
    ura_layout,
)

angle = st.floats(-10.0, 10.0, allow_nan=False)
coord = st.floats(-50.0, 50.0, allow_nan=False)
vec3 = st.tuples(coord, coord, coord)
small = st.floats(-0.05, 0.05, allow_nan=False)


# rotations


def test_rotation_identity():
    assert np.array_equal(rotation_matrix([0.0, 0.0, 0.0]), np.eye(3))


def test_quarter_yaw_maps_x_to_y():
    Q = rotation_matrix([math.pi / 2, 0.0, 0.0])
    assert np.allclose(Q @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-15)


def test_ris_rotation_matches_elementary_composition():
    a, p, r = 0.1, 0.2, 0.1
    rz = np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])
    ry = np.array([[math.cos(p), 0, math.sin(p)], [0, 1, 0], [-math.sin(p), 0, math.cos(p)]])
    rx = np.array([[1, 0, 0], [0, math.cos(r), -math.sin(r)], [0, math.sin(r), math.cos(r)]])
    Q = rotation_matrix([a, p, r])
    assert np.allclose(Q, rz @ ry @ rx, rtol=0, atol=1e-15)
    assert np.isclose(np.linalg.det(Q), 1.0, atol=1e-14)


@given(st.tuples(angle, angle, angle))
def test_rotation_is_proper_orthonormal(a):
    Q = rotation_matrix(a)
    assert np.allclose(Q.T @ Q, np.eye(3), atol=1e-13)
    assert np.isclose(np.linalg.det(Q), 1.0, atol=1e-13)


def test_rotation_generators_at_identity():
    d = rotation_gradient([0.0, 0.0, 0.0])
    assert np.array_equal(d[0], [[0, -1, 0], [1, 0, 0], [0, 0, 0]])
    assert np.array_equal(d[1], [[0, 0, 1], [0, 0, 0], [-1, 0, 0]])
    assert np.array_equal(d[2], [[0, 0, 0], [0, 0, -1], [0, 1, 0]])


@given(st.tuples(angle, angle, angle))
def test_rotation_gradient_matches_central_differences(a):
    a = np.array(a)
    d = rotation_gradient(a)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (rotation_matrix(a + e) - rotation_matrix(a - e)) / (2 * h)
        assert np.linalg.norm(d[k] - fd) <= 1e-6 * np.linalg.norm(fd)


def test_euler_angles_canonicalized():
    e = EulerAngles(3 * math.pi, -math.pi, 7.0)
    assert e.alpha == pytest.approx(math.pi)
    assert e.psi == pytest.approx(math.pi)
    assert e.phi == pytest.approx(7.0 - 2 * math.pi)


@given(st.tuples(angle, angle, angle))
def test_canonical_angles_in_half_open_interval(a):
    e = EulerAngles(*a)
    for v in e.as_array():
        assert -math.pi < v <= math.pi
    assert np.allclose(rotation_matrix(e), rotation_matrix(a), atol=1e-12)


def test_nonfinite_orientation_rejected():
    with pytest.raises(ValueError):
        rotation_matrix([math.nan, 0.0, 0.0])


# element placement


def test_element_position_examples():
    lay = ArrayLayout(np.array([[0.015, 0.0, 0.0]]))
    assert np.allclose(element_position(Pose(np.zeros(3)), lay, 0), [0.015, 0, 0])
    assert np.allclose(element_position(Pose(np.array([10.0, 8, 4])), lay, 0), [10.015, 8, 4])
    pose = Pose(np.array([10.0, 8, 4]), orientation=EulerAngles(0.1, 0.2, 0.1))
    expect = np.array([10.0, 8, 4]) + rotation_matrix([0.1, 0.2, 0.1]) @ [0.015, 0, 0]
    assert np.allclose(element_position(pose, lay, 0), expect, rtol=0, atol=1e-15)
    with pytest.raises(IndexError):
        element_position(pose, lay, 1)


def test_effective_centroid_adds_misalignment():
    pose = Pose(np.array([1.0, 2, 3]), np.array([0.01, -0.02, 0.03]))
    assert np.allclose(pose.position, [1.01, 1.98, 3.03])


@given(vec3, st.tuples(small, small, small), st.tuples(angle, angle, angle))
def test_element_positions_vectorized(p, xi, a):
    pose = Pose(np.array(p), np.array(xi), EulerAngles(*a))
    lay = ura_layout(3, 2, 0.015)
    allp = element_positions(pose, lay)
    for v in range(lay.count):
        assert np.allclose(allp[v], element_position(pose, lay, v), atol=1e-12)


# distances


def test_preset_distances():
    assert inter_element_distance([0, 0, 0], [0, 0, 0]) == 0.0
    assert inter_element_distance([0, 0, 0], [12, 10, 3]) == pytest.approx(math.sqrt(253))
    assert round(inter_element_distance([0, 0, 0], [12, 10, 3]), 4) == 15.9060
    assert inter_element_distance([10, 8, 4], [12, 10, 3]) == pytest.approx(3.0, abs=1e-15)


@given(vec3, st.tuples(small, small, small), st.tuples(angle, angle, angle),
       vec3, st.tuples(small, small, small), st.tuples(angle, angle, angle),
       st.tuples(small, small, small), st.tuples(small, small, small))
def test_distance_expansion_equals_direct_norm(pg, xg, ag, pv, xv, av, sg, sv):
    g = Pose(np.array(pg), np.array(xg), EulerAngles(*ag))
    v = Pose(np.array(pv), np.array(xv), EulerAngles(*av))
    a = g.position + g.rotation @ np.array(sg)
    b = v.position + v.rotation @ np.array(sv)
    direct = inter_element_distance(a, b)
    if direct < 1e-3:
        return
    assert distance_expansion(g, sg, v, sv) == pytest.approx(direct, rel=1e-12)


# direction angles


def test_direction_angle_examples():
    d = direction_angles([0, 0, 0], [0, 0, 1])
    assert (d.theta, d.phi, d.distance) == (0.0, 0.0, 1.0)
    d = direction_angles([0, 0, 0], [1, 0, 0])
    assert d.theta == pytest.approx(math.pi / 2) and d.phi == 0.0 and d.distance == 1.0
    d = direction_angles([10, 8, 4], [12, 10, 3])
    assert d.distance == pytest.approx(3.0)
    assert np.allclose(d.unit_vector, [2 / 3, 2 / 3, -1 / 3], atol=1e-15)
    assert d.theta == pytest.approx(math.acos(-1 / 3), abs=1e-15)


def test_direction_of_coincident_points_raises():
    with pytest.raises(DegenerateGeometryError):
        direction_angles([1, 2, 3], [1, 2, 3])


def test_negative_x_axis_azimuth_is_pi():
    assert direction_angles([0, 0, 0], [-1, 0, 0]).phi == math.pi


@given(vec3, vec3)
def test_direction_angles_reconstruct_target(a, b):
    a, b = np.array(a), np.array(b)
    if np.linalg.norm(b - a) < 1e-6:
        return
    d = direction_angles(a, b)
    assert 0.0 <= d.theta <= math.pi and -math.pi < d.phi <= math.pi
    assert np.linalg.norm(a + d.distance * d.unit_vector - b) <= 1e-10 * max(1.0, d.distance)
    assert np.linalg.norm(unit_vector(d.theta, d.phi)) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.1, 3.0), st.floats(-3.0, 3.0))
def test_unit_vector_gradient_matches_differences(th, ph):
    dth, dph = unit_vector_gradient(th, ph)
    h = 1e-6
    assert np.allclose(dth, (unit_vector(th + h, ph) - unit_vector(th - h, ph)) / (2 * h), atol=1e-8)
    assert np.allclose(dph, (unit_vector(th, ph + h) - unit_vector(th, ph - h)) / (2 * h), atol=1e-8)


# arrays and far field


def test_ura_examples():
    assert np.array_equal(ura_layout(1, 1, 0.015).local_offsets, [[0, 0, 0]])
    two = ura_layout(2, 1, 0.015).local_offsets
    assert np.allclose(sorted(two[:, 0]), [-0.0075, 0.0075]) and np.all(two[:, 1:] == 0)
    big = ura_layout(11, 11, 0.015)
    assert big.count == 121
    assert np.allclose(big.local_offsets[:, :2].min(0), -0.075)
    assert np.allclose(big.local_offsets[:, :2].max(0), 0.075)
    assert np.array_equal(big.normal, [0, 0, 1])


@given(st.integers(1, 12), st.integers(1, 12), st.floats(0.001, 0.1))
def test_ura_is_centered_and_planar(r, c, s):
    off = ura_layout(r, c, s).local_offsets
    assert off.shape == (r * c, 3)
    assert np.allclose(off.sum(0), 0.0, atol=1e-12 * r * c)
    assert np.all(off[:, 2] == 0)


def test_ura_rejects_bad_sizes():
    with pytest.raises(ValueError):
        ura_layout(0, 3, 0.015)
    with pytest.raises(ValueError):
        ura_layout(2, 2, 0.0)


def test_far_field_exact_at_centroids():
    a = Entity(Pose(np.zeros(3)), ura_layout(1, 1, 0.015))
    b = Entity(Pose(np.array([3.0, 1.0, 2.0])), ura_layout(1, 1, 0.015))
    assert far_field_distance(a, b, 0, 0) == pytest.approx(math.sqrt(14), rel=1e-15)


def test_far_field_phase_broadside_offsets():
    ris = Entity(Pose(np.zeros(3)), ura_layout(3, 1, 0.015))
    ue = Entity(Pose(np.array([0.0, 0.0, 5.0])), ura_layout(1, 1, 0.015))
    centre = far_field_phase(ris, ue, 1, 0, 0.03)
    for g in (0, 2):
        assert far_field_phase(ris, ue, g, 0, 0.03) == pytest.approx(centre, abs=1e-14)


def _far_field_error(d):
    # preset RIS 1 and UE array, UE moved along the RIS1-UE direction
    cfg = paper_v()
    ris, ue = cfg.ris[0].entity(), cfg.ue.entity()
    u = ue.position - ris.position
    u = u / np.linalg.norm(u)
    far = Entity(Pose(ris.position + d * u, orientation=ue.pose.orientation), ue.layout)
    se, sf = ris.elements(), far.elements()
    return max(abs(far_field_distance(ris, far, g, v) - inter_element_distance(se[g], sf[v]))
               for g in range(ris.count) for v in range(far.count))


def test_far_field_error_shrinks_100x_from_3m_to_300m():
    assert _far_field_error(3.0) >= 100 * _far_field_error(300.0)


def test_far_field_error_monotone_in_distance():
    errs = [_far_field_error(d) for d in (3.0, 10.0, 30.0, 100.0, 300.0)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_fraunhofer_examples():
    assert fraunhofer_distance(0.0, 0.03) == 0.0
    D = aperture_diameter(ura_layout(11, 11, 0.015))
    assert D == pytest.approx(0.15 * math.sqrt(2))
    assert fraunhofer_distance(D, 0.03) == pytest.approx(3.0)
    assert round(fraunhofer_distance(0.2121, 0.03), 2) == 3.00
    assert is_near_field(3.0, D, 0.03)
    assert not is_near_field(3.01, D, 0.03)
    with pytest.raises(ValueError):
        fraunhofer_distance(-1.0, 0.03)


def test_preset_ris1_ue_link_is_boundary_near_field():
    cfg = paper_v()
    ris, ue = cfg.ris[0].entity(), cfg.ue.entity()
    d = float(np.linalg.norm(ue.position - ris.position))
    assert is_near_field(d, aperture_diameter(ris.layout), 0.03)
