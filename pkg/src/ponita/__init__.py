"""SE(n)-equivariant group convolutions over position-orientation space.

Subpackages and modules:

    geometry     rigid motions and their action on points, orientations, poses
    attributes   bijective invariant attributes of point pairs
    grids        orientation grids on S^1 / S^2 and the SGRD file format
    autodiff     small reverse-mode autodiff engine, Adam, checkpoints
    kernel_nets  polynomial-embedding kernel MLPs
    layers       separable and point-cloud group convolutions, lift/readout
    models       full networks and energy/force evaluation
    audit        property battery used by ``ponita audit``
"""
from .backend import BACKEND
from .geometry import Pose, PosOnly, PosOri, RigidMotion, act, compose, inverse, random_motion
from .graph import GeomGraph, batch_graphs, fully_connected_edges, transform_graph
from .grids import SphereGrid, circle_grid, load_or_generate_grid, platonic_grid, repulsion_grid
from .models import ModelConfig, Pnita, PnitaVectorBaseline, Ponita, energy_and_forces

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "GeomGraph",
    "ModelConfig",
    "Pnita",
    "PnitaVectorBaseline",
    "Ponita",
    "PosOnly",
    "PosOri",
    "Pose",
    "RigidMotion",
    "SphereGrid",
    "act",
    "batch_graphs",
    "circle_grid",
    "compose",
    "energy_and_forces",
    "fully_connected_edges",
    "inverse",
    "load_or_generate_grid",
    "platonic_grid",
    "random_motion",
    "repulsion_grid",
    "transform_graph",
]
