"""Invariant attributes of point pairs and their orbit representatives.

Each ``attr_*`` map sends a pair (x_i, x_j) to a vector that is constant on
the pair's equivalence class under the global SE(n) action and separates
different classes. :func:`representative_from_attr` inverts the map: it
returns a canonical pair (x_0, x_ij) with x_0 the origin of the space, and
applying the forward map to it reproduces the attribute.
"""
from dataclasses import dataclass

import numpy as np

from .geometry import (
    PosOnly,
    PosOri,
    Pose,
    RigidMotion,
    axis_angle,
    is_rotation,
    random_rotation,
    reference_axis,
    rotation_2d,
    rotation_from_orientation,
)

SPACES = ("Rn", "R2xS1", "SE2", "R3xS2", "SE3")


@dataclass(frozen=True)
class Attribute:
    values: np.ndarray
    space: str

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.space not in SPACES:
            raise ValueError(f"unknown space tag {self.space!r}")


def _angle(u, v):
    """Unsigned angle between unit vectors; atan2 form is accurate near 0 and pi."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape[-1] == 2:
        s = np.abs(u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0])
    else:
        s = np.linalg.norm(np.cross(u, v), axis=-1)
    return np.arctan2(s, np.clip((u * v).sum(-1), -1.0, 1.0))


def _signed_angle_2d(u, v):
    return np.arctan2(u[0] * v[1] - u[1] * v[0], u @ v)


def _wrap_angle(theta):
    """Map to (-pi, pi]."""
    t = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    return np.pi if t == -np.pi else t


def _coords(x):
    return x.p if isinstance(x, (PosOnly, PosOri, Pose)) else np.asarray(x, dtype=np.float64)


def attr_rn(p_i, p_j):
    """Distance ||p_j - p_i||."""
    pi, pj = _coords(p_i), _coords(p_j)
    if pi.shape != pj.shape:
        raise ValueError(f"dimension mismatch {pi.shape} vs {pj.shape}")
    return Attribute([np.linalg.norm(pj - pi)], "Rn")


def attr_r2s1(x_i, x_j, frame=None):
    """(R_{o_i}^{-1}(p_j - p_i), signed angle from o_i to o_j) in R^2 x S^1.

    The angle is reported in (-pi, pi]; its absolute value equals
    arccos(o_i . o_j). ``frame`` optionally overrides R_{o_i}.
    """
    R = rotation_from_orientation(x_i.o) if frame is None else frame
    rel = R.T @ (x_j.p - x_i.p)
    theta = _signed_angle_2d(R[:, 0], x_j.o)
    return Attribute([rel[0], rel[1], theta], "R2xS1")


def _r3s2_components(rel, o_i, o_j):
    a = float(o_i @ rel)
    b = float(np.linalg.norm(rel - a * o_i))
    c = float(_angle(o_i, o_j))
    return a, b, c


def attr_r3s2(x_i, x_j, frame=None):
    """(o_i.(p_j-p_i), ||(p_j-p_i) - a o_i||, angle(o_i, o_j)) in R^3 x S^2.

    With ``frame`` given, the attribute is computed from the relative
    element g_i^{-1} x_j with g_i = (p_i, frame) instead, which is the
    formulation used for the stabilizer check.
    """
    rel = x_j.p - x_i.p
    if frame is None:
        return Attribute(_r3s2_components(rel, x_i.o, x_j.o), "R3xS2")
    local_p = frame.T @ rel
    local_o = frame.T @ x_j.o
    a = local_p[2]
    b = np.hypot(local_p[0], local_p[1])
    c = np.arctan2(np.hypot(local_o[0], local_o[1]), np.clip(local_o[2], -1.0, 1.0))
    return Attribute([a, b, c], "R3xS2")


def attr_r3s2_polar(x_i, x_j):
    """(||p_j - p_i||, angle(o_i, p_j - p_i), angle(o_i, o_j)).

    Undefined when p_i == p_j.
    """
    rel = x_j.p - x_i.p
    r = np.linalg.norm(rel)
    if r == 0.0:
        raise ValueError("polar attribute undefined for coincident positions")
    phi = _angle(x_i.o, rel / r)
    return Attribute([r, phi, _angle(x_i.o, x_j.o)], "R3xS2")


def attr_sen(x_i, x_j):
    """g_i^{-1} g_j for poses. 3D: 12 values (translation, flattened rotation).

    2D: (u, v, theta) with theta the angle of R_i^{-1} R_j in (-pi, pi].
    """
    if x_i.p.shape != x_j.p.shape:
        raise ValueError("dimension mismatch")
    Rt = x_i.R.T
    rel = Rt @ (x_j.p - x_i.p)
    Rrel = Rt @ x_j.R
    if rel.shape == (2,):
        return Attribute([rel[0], rel[1], np.arctan2(Rrel[1, 0], Rrel[0, 0])], "SE2")
    return Attribute(np.concatenate([rel, Rrel.reshape(-1)]), "SE3")


def attribute(space, x_i, x_j):
    """Dispatch on a space tag."""
    if space == "Rn":
        return attr_rn(x_i, x_j)
    if space == "R2xS1":
        return attr_r2s1(x_i, x_j)
    if space == "R3xS2":
        return attr_r3s2(x_i, x_j)
    if space in ("SE2", "SE3"):
        return attr_sen(x_i, x_j)
    raise ValueError(f"unknown space {space!r}")


def origin(space, n=3):
    """The origin x_0 of each homogeneous space."""
    if space == "Rn":
        return PosOnly(np.zeros(n))
    if space == "R2xS1":
        return PosOri(np.zeros(2), reference_axis(2))
    if space == "R3xS2":
        return PosOri(np.zeros(3), reference_axis(3))
    if space == "SE2":
        return Pose(np.zeros(2), np.eye(2))
    if space == "SE3":
        return Pose(np.zeros(3), np.eye(3))
    raise ValueError(f"unknown space {space!r}")


def representative_from_attr(a, n=3):
    """Canonical pair (x_0, x_ij) in the class identified by ``a``.

    Rn: x_ij = a e_last (e_z in 3D); R^2 x S^1 and SE(2): x_ij = g_i^{-1} g_j
    rebuilt from (u, v, theta); R^3 x S^2: x_ij = ((b, 0, a), (sin c, 0, cos c));
    SE(3): the pose (t, R). ``n`` only matters for Rn.
    """
    v = a.values
    if a.space == "Rn":
        if v.shape != (1,) or v[0] < 0:
            raise ValueError(f"Rn attribute must be one non-negative value, got {v}")
        p = np.zeros(n)
        p[-1] = v[0]
        return origin("Rn", n), PosOnly(p)
    if a.space == "R2xS1":
        _check_len(v, 3)
        return origin("R2xS1"), PosOri(v[:2], [np.cos(v[2]), np.sin(v[2])])
    if a.space == "SE2":
        _check_len(v, 3)
        return origin("SE2"), Pose(v[:2], rotation_2d(v[2]))
    if a.space == "R3xS2":
        _check_len(v, 3)
        aa, b, c = v
        if b < 0:
            raise ValueError(f"R3xS2 attribute needs b >= 0, got {b}")
        if not 0.0 <= c <= np.pi:
            raise ValueError(f"R3xS2 attribute needs c in [0, pi], got {c}")
        return origin("R3xS2"), PosOri([b, 0.0, aa], [np.sin(c), 0.0, np.cos(c)])
    if a.space == "SE3":
        _check_len(v, 12)
        R = v[3:].reshape(3, 3)
        if not is_rotation(R):
            raise ValueError("SE3 attribute rotation block is not in SO(3)")
        return origin("SE3"), Pose(v[:3], R)
    raise ValueError(f"unknown space {a.space!r}")


def _check_len(v, k):
    if v.shape != (k,):
        raise ValueError(f"expected {k} attribute values, got {v.shape[0]}")


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def random_point(space, rng, n=3, scale=1.0):
    """A random point of the given space (positions ~ N(0, scale^2))."""
    rng = _rng(rng)
    if space == "Rn":
        return PosOnly(scale * rng.standard_normal(n))
    if space == "R2xS1":
        return PosOri(scale * rng.standard_normal(2), random_unit(rng, 2))
    if space == "R3xS2":
        return PosOri(scale * rng.standard_normal(3), random_unit(rng, 3))
    if space == "SE2":
        return Pose(scale * rng.standard_normal(2), random_rotation(2, rng))
    if space == "SE3":
        return Pose(scale * rng.standard_normal(3), random_rotation(3, rng))
    raise ValueError(f"unknown space {space!r}")


def stabilizer_invariance_check(space, samples=1000, rng_seed=0, n=3):
    """Max deviation between attributes computed with representatives g_i and g_i h.

    h ranges over the stabilizer H of the origin: SO(n) for Rn, rotations
    about the reference axis for R^3 x S^2, and the trivial group for
    R^2 x S^1, SE(2) and SE(3) (deviation exactly 0).
    """
    rng = _rng(rng_seed)
    if space in ("SE2", "SE3", "R2xS1"):
        return 0.0
    worst = 0.0
    for _ in range(samples):
        if space == "Rn":
            xi, xj = random_point("Rn", rng, n), random_point("Rn", rng, n)
            g = random_rotation(n, rng)
            h = random_rotation(n, rng)
            a1 = np.linalg.norm(g.T @ (xj.p - xi.p))
            a2 = np.linalg.norm((g @ h).T @ (xj.p - xi.p))
            worst = max(worst, abs(a1 - a2))
        elif space == "R3xS2":
            xi, xj = random_point("R3xS2", rng), random_point("R3xS2", rng)
            g = rotation_from_orientation(xi.o)
            h = axis_angle(reference_axis(3), rng.uniform(0.0, 2.0 * np.pi))
            a1 = attr_r3s2(xi, xj, frame=g).values
            a2 = attr_r3s2(xi, xj, frame=g @ h).values
            worst = max(worst, float(np.max(np.abs(a1 - a2))))
        else:
            raise ValueError(f"unknown space {space!r}")
    return worst


def pair_transform(g: RigidMotion, x_i, x_j):
    """Apply one global motion to both points of a pair."""
    from .geometry import act
    return act(g, x_i), act(g, x_j)
