"""SE(n) elements, their action on homogeneous spaces, and rotation helpers (n = 2, 3).

All values are immutable float64 arrays. Points in a homogeneous space are
one of :class:`PosOnly` (R^n), :class:`PosOri` (R^n x S^{n-1}) or
:class:`Pose` (SE(n) itself).
"""
from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-10
UNIT_TOL = 1e-8


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def reference_axis(n):
    """Origin orientation: e_z in 3D, e_x in 2D."""
    if n == 3:
        return np.array([0.0, 0.0, 1.0])
    if n == 2:
        return np.array([1.0, 0.0])
    raise ValueError(f"only n = 2, 3 are supported, got {n}")


_EYE = {2: np.eye(2), 3: np.eye(3)}


def is_rotation(R, tol=ORTHO_TOL):
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        return False
    n = R.shape[0]
    if np.max(np.abs(R.T @ R - _EYE.get(n, np.eye(n)))) > tol:
        return False
    if n == 2:
        det = R[0, 0] * R[1, 1] - R[0, 1] * R[1, 0]
    elif n == 3:
        (a, b, c), (d, e, f), (g, h, i) = R.tolist()
        det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    else:
        det = np.linalg.det(R)
    return abs(det - 1.0) <= tol


@dataclass(frozen=True)
class Rotation:
    """An element of SO(n) stored as an n x n matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if not is_rotation(m):
            raise ValueError("matrix is not a rotation (orthogonal, det +1)")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self):
        return self.matrix.shape[0]

    def inverse(self):
        return Rotation(self.matrix.T)

    def __matmul__(self, other):
        if isinstance(other, Rotation):
            return Rotation(self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)


@dataclass(frozen=True)
class RigidMotion:
    """g = (x, R) acting as p -> R p + x."""

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        R = self.rotation.matrix if isinstance(self.rotation, Rotation) else self.rotation
        R = _frozen(R)
        t = _frozen(self.translation)
        if t.shape != (R.shape[0],):
            raise ValueError(f"translation shape {t.shape} does not match rotation {R.shape}")
        if not is_rotation(R):
            raise ValueError("rotation block is not in SO(n)")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", R)

    @property
    def n(self):
        return self.translation.shape[0]

    @classmethod
    def identity(cls, n):
        return cls(np.zeros(n), np.eye(n))

    def inverse(self):
        Rt = self.rotation.T
        return RigidMotion(-Rt @ self.translation, Rt)

    def __matmul__(self, other):
        if isinstance(other, RigidMotion):
            return compose(self, other)
        return act(self, other)


@dataclass(frozen=True)
class PosOnly:
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen(self.p))


@dataclass(frozen=True)
class PosOri:
    p: np.ndarray
    o: np.ndarray

    def __post_init__(self):
        p, o = _frozen(self.p), _frozen(self.o)
        if p.shape != o.shape:
            raise ValueError(f"position {p.shape} and orientation {o.shape} differ in dimension")
        if abs(np.linalg.norm(o) - 1.0) > ORTHO_TOL:
            raise ValueError(f"orientation is not a unit vector (norm {np.linalg.norm(o)})")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "o", o)


@dataclass(frozen=True)
class Pose:
    p: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        R = self.R.matrix if isinstance(self.R, Rotation) else self.R
        p, R = _frozen(self.p), _frozen(R)
        if R.shape != (p.shape[0], p.shape[0]):
            raise ValueError(f"position {p.shape} and rotation {R.shape} differ in dimension")
        if not is_rotation(R):
            raise ValueError("pose rotation is not in SO(n)")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "R", R)


HPoint = PosOnly | PosOri | Pose


def compose(g, h):
    """(x, R)(x', R') = (R x' + x, R R')."""
    if g.n != h.n:
        raise ValueError(f"dimension mismatch: SE({g.n}) vs SE({h.n})")
    return RigidMotion(g.rotation @ h.translation + g.translation, g.rotation @ h.rotation)


def inverse(g):
    return g.inverse()


def act(g, x):
    """Left action of g = (t, R) on a homogeneous-space point."""
    if isinstance(x, PosOnly):
        _check_dim(g, x.p)
        return PosOnly(g.rotation @ x.p + g.translation)
    if isinstance(x, PosOri):
        _check_dim(g, x.p)
        o = g.rotation @ x.o
        return PosOri(g.rotation @ x.p + g.translation, o / np.linalg.norm(o))
    if isinstance(x, Pose):
        _check_dim(g, x.p)
        return Pose(g.rotation @ x.p + g.translation, g.rotation @ x.R)
    x = np.asarray(x, dtype=np.float64)
    # raw coordinate arrays [..., n] are treated as positions
    if x.shape[-1] != g.n:
        raise ValueError(f"dimension mismatch: SE({g.n}) acting on {x.shape}")
    return x @ g.rotation.T + g.translation


def _check_dim(g, p):
    if p.shape != (g.n,):
        raise ValueError(f"dimension mismatch: SE({g.n}) acting on a point of shape {p.shape}")


def skew(v):
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def axis_angle(axis, angle):
    """Rodrigues rotation about a unit ``axis`` (3D)."""
    axis = np.asarray(axis, dtype=np.float64)
    K = skew(axis / np.linalg.norm(axis))
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rotation_2d(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation_from_orientation(o):
    """A rotation R_o with R_o @ reference_axis(n) == o.

    3D: Rodrigues rotation about ref x o by the angle between them; at the
    antipode (axis undefined) a rotation by pi about the x-axis. 2D: the
    rotation by atan2(o_y, o_x).
    """
    o = np.asarray(o, dtype=np.float64)
    norm = np.linalg.norm(o)
    if abs(norm - 1.0) > UNIT_TOL:
        raise ValueError(f"orientation must be a unit vector, got norm {norm}")
    o = o / norm
    if o.shape == (2,):
        return rotation_2d(np.arctan2(o[1], o[0]))
    if o.shape != (3,):
        raise ValueError(f"only n = 2, 3 are supported, got shape {o.shape}")
    ref = reference_axis(3)
    v = np.cross(ref, o)
    s = np.linalg.norm(v)
    c = float(ref @ o)
    if s == 0.0:
        if c > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])
    return axis_angle(v / s, np.arctan2(s, c))


def rotations_from_orientations(orientations):
    """Vectorised :func:`rotation_from_orientation` for an [M, 3] array."""
    return np.stack([rotation_from_orientation(o) for o in np.asarray(orientations)])


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_rotation(n, rng_seed=None):
    """Haar-uniform rotation in SO(n).

    n = 2: angle ~ U[0, 2pi). n = 3: unit quaternion from four i.i.d.
    standard normals. ``rng_seed`` may be an int or a numpy Generator.
    """
    rng = _rng(rng_seed)
    if n == 2:
        return rotation_2d(rng.uniform(0.0, 2.0 * np.pi))
    if n == 3:
        q = rng.standard_normal(4)
        w, x, y, z = q / np.linalg.norm(q)
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ])
    raise ValueError(f"only n = 2, 3 are supported, got {n}")


def random_motion(n, rng_seed=None, scale=1.0):
    """Random rigid motion: Haar rotation and Gaussian translation."""
    rng = _rng(rng_seed)
    R = random_rotation(n, rng)
    return RigidMotion(scale * rng.standard_normal(n), R)
