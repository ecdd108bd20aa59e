"""Toy molecular energies: small clusters under a type-dependent Morse potential.

    V(r) = D (1 - exp(-alpha (r - r0)))^2 - D,  r0 = r0[type_i, type_j]

Energies are rotation/translation invariant and forces F = -dE/dp are
analytic, which makes the set a desk-scale stand-in for energy-and-force
regression.
"""
import numpy as np

from .graph import GeomGraph, fully_connected_edges
from .io import PointCloudFile

DEPTH = 1.0
ALPHA = 1.5
R0 = np.array([[1.0, 1.2], [1.2, 1.5]])


def morse_energy_forces(positions, types):
    p = np.asarray(positions, dtype=np.float64)
    t = np.asarray(types, dtype=np.int64)
    diff = p[:, None, :] - p[None, :, :]
    r = np.sqrt((diff ** 2).sum(-1))
    np.fill_diagonal(r, 1.0)
    r0 = R0[t[:, None], t[None, :]]
    e = np.exp(-ALPHA * (r - r0))
    pair = DEPTH * (1.0 - e) ** 2 - DEPTH
    np.fill_diagonal(pair, 0.0)
    energy = 0.5 * pair.sum()
    dV = 2.0 * DEPTH * ALPHA * (1.0 - e) * e
    np.fill_diagonal(dV, 0.0)
    forces = -(dV / r)[..., None] * diff
    return float(energy), forces.sum(1)


def toy_generate(count, rng_seed=0, atoms=6, spread=1.0):
    rng = np.random.default_rng(rng_seed)
    out = []
    for _ in range(count):
        p = spread * rng.standard_normal((atoms, 3))
        t = rng.integers(0, 2, size=atoms)
        e, f = morse_energy_forces(p, t)
        out.append(PointCloudFile(positions=p, scalars={"type": t.astype(float)},
                                  targets={"energy": [e], "forces": f}))
    return out


def toy_featurize(sample, grid=None):
    """One-hot atom types as node scalars; fully connected graph."""
    t = sample.scalars["type"].astype(np.int64).reshape(-1)
    onehot = np.eye(2)[t]
    P = sample.positions.shape[0]
    return GeomGraph(sample.positions, fully_connected_edges(P), grid=grid, scalars=onehot)
