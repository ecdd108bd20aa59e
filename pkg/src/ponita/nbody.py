"""Charged N-body trajectories and their graph featurisation.

Particles have unit mass and charge +-1 and interact through a softened
Coulomb force (constant 1):

    F_i = sum_j q_i q_j (p_i - p_j) / (|p_i - p_j|^2 + eps^2)^(3/2)

so like charges repel. Trajectories are integrated with velocity Verlet
(kick-drift-kick leapfrog), which is symplectic and conserves total momentum
up to round-off because the pair forces are antisymmetric.
"""
from dataclasses import dataclass

import numpy as np

from .graph import GeomGraph, fully_connected_edges
from .io import PointCloudFile

SOFTENING = 0.1


@dataclass
class NBodyState:
    positions: np.ndarray
    velocities: np.ndarray
    charges: np.ndarray
    steps: int = 1000

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        self.charges = np.asarray(self.charges, dtype=np.float64)
        P = self.positions.shape[0]
        if self.positions.shape != (P, 3) or self.velocities.shape != (P, 3):
            raise ValueError("positions and velocities must be [P, 3]")
        if self.charges.shape != (P,) or not np.all(np.isin(self.charges, (-1.0, 1.0))):
            raise ValueError("charges must be a length-P vector of +-1")


def coulomb_forces(positions, charges, softening=SOFTENING):
    """Batched forces: positions [..., P, 3], charges [..., P] -> [..., P, 3]."""
    diff = positions[..., :, None, :] - positions[..., None, :, :]
    r2 = (diff * diff).sum(-1) + softening ** 2
    qq = charges[..., :, None] * charges[..., None, :]
    w = qq / r2 ** 1.5
    idx = np.arange(positions.shape[-2])
    w[..., idx, idx] = 0.0
    return (w[..., None] * diff).sum(-2)


def total_energy(positions, velocities, charges, softening=SOFTENING):
    """Kinetic + softened Coulomb potential, and the scale KE + |PE| for relative drift."""
    ke = 0.5 * (velocities ** 2).sum((-1, -2))
    diff = positions[..., :, None, :] - positions[..., None, :, :]
    r = np.sqrt((diff * diff).sum(-1) + softening ** 2)
    qq = charges[..., :, None] * charges[..., None, :]
    iu = np.triu_indices(positions.shape[-2], 1)
    pe = (qq / r)[..., iu[0], iu[1]].sum(-1)
    return ke + pe, ke + np.abs(pe)


def integrate(positions, velocities, charges, dt=1e-3, steps=1000, softening=SOFTENING):
    """Leapfrog; works on single states or batches. Returns final (positions, velocities)."""
    p = np.array(positions, dtype=np.float64)
    v = np.array(velocities, dtype=np.float64)
    q = np.asarray(charges, dtype=np.float64)
    f = coulomb_forces(p, q, softening)
    for _ in range(steps):
        v += 0.5 * dt * f
        p += dt * v
        f = coulomb_forces(p, q, softening)
        v += 0.5 * dt * f
    return p, v


def simulate(state, dt=1e-3, softening=SOFTENING):
    p, v = integrate(state.positions, state.velocities, state.charges, dt, state.steps, softening)
    return NBodyState(p, v, state.charges, state.steps)


def random_states(count, rng_seed=0, particles=5, pos_scale=1.0, vel_scale=0.5):
    rng = np.random.default_rng(rng_seed)
    p = pos_scale * rng.standard_normal((count, particles, 3))
    v = vel_scale * rng.standard_normal((count, particles, 3))
    q = rng.choice([-1.0, 1.0], size=(count, particles))
    return p, v, q


def nbody_generate(count, rng_seed=0, dt=1e-3, steps=1000, particles=5):
    """``count`` samples of (initial state, final positions) as point clouds."""
    if count < 1:
        raise ValueError("count must be >= 1")
    p0, v0, q = random_states(count, rng_seed, particles)
    pT, _ = integrate(p0, v0, q, dt, steps)
    return [
        PointCloudFile(positions=p0[k], scalars={"charge": q[k]}, vectors={"velocity": v0[k]},
                       targets={"final_positions": pT[k]})
        for k in range(count)
    ]


def dataset_meta(count, rng_seed, dt, steps):
    return {"task": "nbody", "count": count, "seed": rng_seed, "dt": dt, "steps": steps,
            "softening": SOFTENING}


def nbody_featurize(sample, grid=None):
    """Graph with scalars (|v|, q), vectors (v, centroid - p) and edge scalar q_i q_j.

    Bundle form when ``grid`` is given, plain R^n form otherwise. The
    direction to the centroid is not normalised, so it is exactly zero for a
    particle sitting at the centroid.
    """
    p = sample.positions
    v = sample.vectors["velocity"]
    q = sample.scalars["charge"].reshape(-1)
    P = p.shape[0]
    edges = fully_connected_edges(P)
    scalars = np.stack([np.linalg.norm(v, axis=1), q], axis=1)
    vectors = np.stack([v, p.mean(0) - p], axis=2)
    qq = (q[edges[:, 0]] * q[edges[:, 1]])[:, None]
    return GeomGraph(p, edges, grid=grid, scalars=scalars, vectors=vectors, edge_scalars=qq)
