"""Approximately uniform orientation grids on S^1 and S^2.

S^1 grids are exact (equally spaced angles). S^2 grids come from a
Thomson-style repulsion: random initial points are pushed apart along the
tangent-plane gradient of sum_{i<j} 1/|x_i - x_j| and reprojected onto the
sphere. Analytic platonic grids (N = 4, 6, 8, 12, 20) serve as ground truth.

Grids can be written to / read from a small binary format (``SGRD``) and
cached on disk keyed by (n, N, seed).
"""
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backend

MAGIC = b"SGRD"
VERSION = 1


@dataclass(frozen=True)
class SphereGrid:
    points: np.ndarray
    n: int
    seed: int = 0

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.n:
            raise ValueError(f"grid points must be [N, {self.n}], got {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def N(self):
        return self.points.shape[0]


def circle_grid(N, offset=0.0):
    """N equally spaced points on S^1 at angles offset + 2 pi k / N."""
    if N < 1:
        raise ValueError(f"need N >= 1, got {N}")
    ang = offset + 2.0 * np.pi * np.arange(N) / N
    return SphereGrid(np.stack([np.cos(ang), np.sin(ang)], axis=1), 2)


def _project_tangent(points, grad):
    return grad - (grad * points).sum(1, keepdims=True) * points


def repulsion_grid(n, N, rng_seed=0, steps=2000, step_size=0.01, decay=0.999,
                   tol=1e-9, return_history=False, impl=None):
    """Minimise the inverse-distance energy of N points on S^{n-1}.

    Each step moves every point against its tangent-plane gradient, scaled so
    the largest move is ``step_size``, then renormalises. A step that raises
    the energy is rejected and the step size halved, so accepted energies are
    non-increasing. Stops after ``steps`` iterations or when the largest
    accepted displacement falls below ``tol``. For n = 2 the exact circle
    grid with a seeded random offset is returned.
    """
    if N < 2:
        raise ValueError(f"need N >= 2, got {N}")
    rng = np.random.default_rng(rng_seed)
    if n == 2:
        grid = circle_grid(N, rng.uniform(0.0, 2.0 * np.pi / N))
        grid = SphereGrid(grid.points, 2, int(rng_seed))
        return (grid, []) if return_history else grid
    if n != 3:
        raise ValueError(f"only n = 2, 3 are supported, got {n}")
    x = rng.standard_normal((N, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    energy, grad = backend.repulsion_energy_grad(x, impl)
    history = [energy]
    lr = step_size
    for _ in range(steps):
        tg = _project_tangent(x, grad)
        gmax = np.max(np.linalg.norm(tg, axis=1))
        if gmax == 0.0:
            break
        cand = x - lr * tg / gmax
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        e_new, g_new = backend.repulsion_energy_grad(cand, impl)
        if e_new <= energy:
            moved = np.max(np.linalg.norm(cand - x, axis=1))
            x, energy, grad = cand, e_new, g_new
            history.append(energy)
            if moved < tol:
                break
            lr *= decay
        else:
            lr *= 0.5
            if lr < 1e-16:
                break
    grid = SphereGrid(x, 3, int(rng_seed))
    return (grid, history) if return_history else grid


def repulsion_energy(points):
    return backend.repulsion_energy_grad(points)[0]


def platonic_grid(N):
    """Vertices of the platonic solid with N vertices (N in 4, 6, 8, 12, 20)."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    if N == 4:
        v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    elif N == 6:
        v = np.concatenate([np.eye(3), -np.eye(3)])
    elif N == 8:
        v = np.array([[a, b, c] for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)], dtype=float)
    elif N == 12:
        v = []
        for a in (-1, 1):
            for b in (-phi, phi):
                v += [[0, a, b], [a, b, 0], [b, 0, a]]
        v = np.array(v, dtype=float)
    elif N == 20:
        v = [[a, b, c] for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)]
        ip = 1.0 / phi
        for a in (-1, 1):
            for b in (-1, 1):
                v += [[0, a * ip, b * phi], [a * ip, b * phi, 0], [b * phi, 0, a * ip]]
        v = np.array(v, dtype=float)
    else:
        raise ValueError(f"no platonic solid with {N} vertices")
    return SphereGrid(v / np.linalg.norm(v, axis=1, keepdims=True), 3)


def rotate_grid(grid, R):
    """Point k of the result is R @ point k of ``grid``."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (grid.n, grid.n):
        raise ValueError(f"rotation {R.shape} does not match grid dimension {grid.n}")
    return SphereGrid(grid.points @ R.T, grid.n, grid.seed)


def gram_matrix(grid):
    """G[o, o'] = o . o'."""
    pts = grid.points if isinstance(grid, SphereGrid) else np.asarray(grid)
    return pts @ pts.T


def min_pairwise_angle(grid):
    pts = grid.points if isinstance(grid, SphereGrid) else np.asarray(grid)
    G = np.clip(pts @ pts.T, -1.0, 1.0)
    np.fill_diagonal(G, -1.0)
    return float(np.arccos(G.max()))


def second_moment(grid):
    """sum_o o o^T."""
    pts = grid.points if isinstance(grid, SphereGrid) else np.asarray(grid)
    return pts.T @ pts


# ---------------------------------------------------------------- file I/O

def write_grid(path, grid):
    pts = np.ascontiguousarray(grid.points, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIQ", VERSION, grid.n, grid.N, int(grid.seed) & (2**64 - 1)))
        fh.write(pts.tobytes())


def read_grid(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not an SGRD grid file")
    version, n, N, seed = struct.unpack_from("<IIIQ", blob, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported SGRD version {version}")
    expected = 24 + 8 * n * N
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    pts = np.frombuffer(blob, dtype="<f8", offset=24).reshape(N, n).astype(np.float64)
    return SphereGrid(pts, n, seed)


def cache_dir(override=None):
    if override is not None:
        return Path(override)
    env = os.environ.get("PONITA_GRID_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "ponita" / "grids"


def grid_filename(n, N, seed):
    return f"grid_n{n}_N{N}_s{seed}.sgrd"


def load_or_generate_grid(n, N, seed=0, directory=None):
    """Cached :func:`repulsion_grid` (default parameters)."""
    d = cache_dir(directory)
    path = d / grid_filename(n, N, seed)
    if path.exists():
        try:
            return read_grid(path)
        except ValueError:
            pass  # corrupt cache entry; regenerate
    grid = repulsion_grid(n, N, rng_seed=seed)
    try:
        d.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        write_grid(tmp, grid)
        os.replace(tmp, path)
    except OSError:
        pass  # read-only cache location; the grid is still returned
    return grid
