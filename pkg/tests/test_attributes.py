import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ponita.attributes import (
    SPACES,
    Attribute,
    attr_r2s1,
    attr_r3s2,
    attr_r3s2_polar,
    attr_rn,
    attr_sen,
    attribute,
    origin,
    pair_transform,
    random_point,
    representative_from_attr,
    stabilizer_invariance_check,
)
from ponita.geometry import (
    PosOnly,
    PosOri,
    Pose,
    axis_angle,
    random_motion,
    random_rotation,
    reference_axis,
    rotation_from_orientation,
)

EX, EY, EZ = np.eye(3)


def test_attr_rn_examples():
    assert attr_rn([0, 0, 0], [3, 4, 0]).values[0] == 5.0
    assert attr_rn([1, 2, 3], [1, 2, 3]).values[0] == 0.0
    with pytest.raises(ValueError):
        attr_rn([0, 0], [0, 0, 0])


def test_attr_rn_symmetric_and_invariant():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = rng.standard_normal(3), rng.standard_normal(3)
        g = random_motion(3, rng, 5.0)
        assert attr_rn(a, b).values[0] == attr_rn(b, a).values[0]
        ga, gb = pair_transform(g, PosOnly(a), PosOnly(b))
        assert abs(attr_rn(ga, gb).values[0] - attr_rn(a, b).values[0]) < 1e-12


def test_attr_r2s1_examples():
    a = attr_r2s1(PosOri([0, 0], [1, 0]), PosOri([1, 1], [0, 1]))
    np.testing.assert_allclose(a.values, [1, 1, np.pi / 2], atol=1e-15)
    x = PosOri([0.3, -2.0], [0.6, 0.8])
    np.testing.assert_allclose(attr_r2s1(x, x).values, 0.0, atol=1e-15)


def test_attr_r2s1_angle_is_signed():
    # |theta| agrees with arccos(o_i . o_j); the sign tells mirror pairs apart
    x_i = PosOri([0, 0], [1, 0])
    up = attr_r2s1(x_i, PosOri([1, 0], [0, 1])).values[2]
    down = attr_r2s1(x_i, PosOri([1, 0], [0, -1])).values[2]
    assert up == pytest.approx(np.pi / 2) and down == pytest.approx(-np.pi / 2)
    theta = attr_r2s1(x_i, PosOri([0, 0], [-1, 0])).values[2]
    assert theta == pytest.approx(np.pi)


def test_attr_r3s2_examples():
    np.testing.assert_allclose(attr_r3s2(PosOri(np.zeros(3), EZ), PosOri([1, 0, 2], EZ)).values,
                               [2, 1, 0], atol=1e-15)
    x = PosOri([1, 2, 3], EX)
    np.testing.assert_allclose(attr_r3s2(x, x).values, 0.0, atol=1e-15)
    np.testing.assert_allclose(attr_r3s2(PosOri(np.zeros(3), EZ), PosOri([0, 0, 5], -EZ)).values,
                               [5, 0, np.pi], atol=1e-15)


def test_attr_r3s2_not_symmetric():
    rng = np.random.default_rng(3)
    xi, xj = random_point("R3xS2", rng), random_point("R3xS2", rng)
    assert not np.allclose(attr_r3s2(xi, xj).values, attr_r3s2(xj, xi).values)


def test_attr_r3s2_polar_examples():
    a = attr_r3s2_polar(PosOri(np.zeros(3), EZ), PosOri([1, 0, 2], EZ)).values
    np.testing.assert_allclose(a, [np.sqrt(5), np.arccos(2 / np.sqrt(5)), 0], atol=1e-15)
    a = attr_r3s2_polar(PosOri(np.zeros(3), EZ), PosOri([0, 0, 1], EZ)).values
    np.testing.assert_allclose(a, [1, 0, 0], atol=1e-15)
    with pytest.raises(ValueError):
        attr_r3s2_polar(PosOri(np.zeros(3), EZ), PosOri(np.zeros(3), EX))


def test_polar_consistent_with_cartesian():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        xi, xj = random_point("R3xS2", rng), random_point("R3xS2", rng)
        a, b, c = attr_r3s2(xi, xj).values
        r, phi, c2 = attr_r3s2_polar(xi, xj).values
        assert abs(a - r * np.cos(phi)) < 1e-10
        assert abs(b - r * np.sin(phi)) < 1e-10
        assert abs(c - c2) < 1e-10


def test_attr_sen_examples():
    R = random_rotation(3, 1)
    x = Pose([1.0, 2.0, 3.0], R)
    np.testing.assert_allclose(attr_sen(x, x).values, np.r_[np.zeros(3), np.eye(3).ravel()],
                               atol=1e-15)
    a = attr_sen(Pose(np.zeros(3), np.eye(3)), x).values
    np.testing.assert_array_equal(a, np.r_[1.0, 2.0, 3.0, R.ravel()])


@pytest.mark.parametrize("space", SPACES)
def test_left_invariance(space):
    rng = np.random.default_rng(10)
    n = 2 if space in ("R2xS1", "SE2") else 3
    for _ in range(1000):
        xi, xj = random_point(space, rng, n), random_point(space, rng, n)
        g = random_motion(n, rng, 3.0)
        a = attribute(space, xi, xj).values
        b = attribute(space, *pair_transform(g, xi, xj)).values
        assert np.max(np.abs(a - b)) < 1e-10


@pytest.mark.parametrize("space", SPACES)
def test_round_trip_through_representative(space):
    rng = np.random.default_rng(11)
    n = 2 if space in ("R2xS1", "SE2") else 3
    for _ in range(1000):
        xi, xj = random_point(space, rng, n), random_point(space, rng, n)
        a = attribute(space, xi, xj)
        x0, rep = representative_from_attr(a, n)
        assert np.max(np.abs(attribute(space, x0, rep).values - a.values)) < 1e-10


def test_representative_examples():
    x0, rep = representative_from_attr(Attribute([2, 1, 0], "R3xS2"))
    np.testing.assert_allclose(rep.p, [1, 0, 2])
    np.testing.assert_allclose(rep.o, [0, 0, 1])
    np.testing.assert_array_equal(x0.o, EZ)
    _, rep = representative_from_attr(Attribute([5.0], "Rn"))
    np.testing.assert_array_equal(rep.p, [0, 0, 5])


def test_representative_rejects_invalid():
    with pytest.raises(ValueError):
        representative_from_attr(Attribute([1.0, -0.5, 0.0], "R3xS2"))
    with pytest.raises(ValueError):
        representative_from_attr(Attribute([1.0, 0.5, 4.0], "R3xS2"))
    with pytest.raises(ValueError):
        representative_from_attr(Attribute([-1.0], "Rn"))
    with pytest.raises(ValueError):
        representative_from_attr(Attribute(np.r_[np.zeros(3), 2 * np.eye(3).ravel()], "SE3"))
    with pytest.raises(ValueError):
        Attribute([0.0], "R4")


def test_representative_same_orbit():
    # the representative pair is related to the original by one global motion
    rng = np.random.default_rng(12)
    for _ in range(100):
        xi, xj = random_point("SE3", rng), random_point("SE3", rng)
        x0, rep = representative_from_attr(attr_sen(xi, xj))
        # g = g_i maps (x0, rep) onto (xi, xj)
        R, t = xi.R, xi.p
        np.testing.assert_allclose(R @ rep.p + t, xj.p, atol=1e-12)
        np.testing.assert_allclose(R @ rep.R, xj.R, atol=1e-12)


@pytest.mark.parametrize("space", ["Rn", "R3xS2"])
def test_stabilizer_independence(space):
    assert stabilizer_invariance_check(space, 1000, 0) < 1e-12


def test_stabilizer_trivial_spaces():
    for space in ("SE2", "SE3", "R2xS1"):
        assert stabilizer_invariance_check(space, 10, 0) == 0.0


def test_stabilizer_direct_example():
    xi = PosOri(np.zeros(3), EZ)
    xj = PosOri([0.4, -1.1, 0.7], np.array([1.0, 2.0, 2.0]) / 3.0)
    g = rotation_from_orientation(EZ)
    h = axis_angle(EZ, 1.23)
    a1 = attr_r3s2(xi, xj, frame=g).values
    a2 = attr_r3s2(xi, xj, frame=g @ h).values
    assert np.max(np.abs(a1 - a2)) < 1e-12
    np.testing.assert_allclose(a1, attr_r3s2(xi, xj).values, atol=1e-12)


def test_r2s1_frame_independence():
    # in 2D the stabilizer is trivial, so any valid frame must be R_o itself
    rng = np.random.default_rng(13)
    for _ in range(100):
        xi, xj = random_point("R2xS1", rng, 2), random_point("R2xS1", rng, 2)
        R = rotation_from_orientation(xi.o)
        np.testing.assert_allclose(attr_r2s1(xi, xj, frame=R).values, attr_r2s1(xi, xj).values,
                                   atol=1e-12)


def test_origins():
    assert isinstance(origin("Rn"), PosOnly)
    np.testing.assert_array_equal(origin("R3xS2").o, reference_axis(3))
    np.testing.assert_array_equal(origin("R2xS1").o, reference_axis(2))
    with pytest.raises(ValueError):
        origin("bogus")


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6),
       st.floats(0, 2 * np.pi), st.floats(-1, 1))
def test_r3s2_components_bounds(coords, phi, z):
    s = np.sqrt(max(0.0, 1 - z * z))
    o = np.array([s * np.cos(phi), s * np.sin(phi), z])
    o /= np.linalg.norm(o)
    a, b, c = attr_r3s2(PosOri(coords[:3], o), PosOri(coords[3:], EZ)).values
    assert b >= 0.0
    assert 0.0 <= c <= np.pi
