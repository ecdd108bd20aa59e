"""Geometric graphs: node coordinates, directed edges, and optional orientations.

Edges are stored as an [E, 2] integer array of (receiver i, sender j) pairs;
messages flow j -> i. A graph is in *bundle* form when it carries a
:class:`SphereGrid` (every node holds a signal over all grid directions),
in *point-cloud* form when it carries one orientation per node, and in
plain R^n form when it carries neither.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .grids import SphereGrid


@dataclass
class GeomGraph:
    positions: np.ndarray
    edges: np.ndarray
    grid: SphereGrid | None = None
    orientations: np.ndarray | None = None
    batch: np.ndarray | None = None
    grid_rotations: np.ndarray | None = None
    scalars: np.ndarray | None = None
    vectors: np.ndarray | None = None
    edge_scalars: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2:
            raise ValueError(f"positions must be [P, n], got {self.positions.shape}")
        P, n = self.positions.shape
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= P):
            raise ValueError(f"edge index out of range for {P} nodes")
        self.edges = e
        if self.grid is not None and self.orientations is not None:
            raise ValueError("a graph carries either a grid or per-node orientations, not both")
        if self.grid is not None and self.grid.n != n:
            raise ValueError(f"grid dimension {self.grid.n} does not match positions {n}")
        if self.orientations is not None:
            self.orientations = np.asarray(self.orientations, dtype=np.float64)
            if self.orientations.shape != (P, n):
                raise ValueError(f"orientations must be {(P, n)}, got {self.orientations.shape}")
        self.batch = (np.zeros(P, dtype=np.int64) if self.batch is None
                      else np.asarray(self.batch, dtype=np.int64))
        if self.batch.shape != (P,):
            raise ValueError(f"batch must be [{P}], got {self.batch.shape}")
        if self.grid_rotations is not None:
            self.grid_rotations = np.asarray(self.grid_rotations, dtype=np.float64)
            if self.grid_rotations.shape != (self.num_graphs, n, n):
                raise ValueError(f"grid_rotations must be {(self.num_graphs, n, n)}")
        if self.scalars is not None:
            self.scalars = np.asarray(self.scalars, dtype=np.float64).reshape(P, -1)
        if self.vectors is not None:
            v = np.asarray(self.vectors, dtype=np.float64)
            if v.ndim == 2:
                v = v[:, :, None]
            if v.shape[:2] != (P, n):
                raise ValueError(f"vectors must be [P, n, V], got {v.shape}")
            self.vectors = v
        if self.edge_scalars is not None:
            es = np.asarray(self.edge_scalars, dtype=np.float64).reshape(len(e), -1)
            self.edge_scalars = es

    @property
    def num_nodes(self):
        return self.positions.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]

    @property
    def num_graphs(self):
        return int(self.batch.max()) + 1 if self.batch.size else 0

    @property
    def receivers(self):
        return self.edges[:, 0]

    @property
    def senders(self):
        return self.edges[:, 1]

    @property
    def form(self):
        if self.grid is not None:
            return "bundle"
        if self.orientations is not None:
            return "pointcloud"
        return "rn"

    def node_grids(self):
        """Grid directions per graph, [G, N, n] (the shared grid rotated per graph)."""
        if self.grid is None:
            raise ValueError("graph has no grid")
        pts = self.grid.points
        if self.grid_rotations is None:
            return np.broadcast_to(pts, (max(self.num_graphs, 1),) + pts.shape)
        return np.einsum("gab,nb->gna", self.grid_rotations, pts)

    def with_(self, **changes):
        return replace(self, **changes)


def fully_connected_edges(num_nodes, self_loops=False):
    """All ordered pairs (i, j), i != j unless ``self_loops``."""
    i, j = np.meshgrid(np.arange(num_nodes), np.arange(num_nodes), indexing="ij")
    e = np.stack([i.ravel(), j.ravel()], axis=1)
    if not self_loops:
        e = e[e[:, 0] != e[:, 1]]
    return e.astype(np.int64)


def radius_edges(positions, radius, self_loops=False, batch=None):
    """Pairs within ``radius`` (and within the same graph when ``batch`` is given)."""
    p = np.asarray(positions, dtype=np.float64)
    d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
    mask = d <= radius
    if batch is not None:
        b = np.asarray(batch)
        mask &= b[:, None] == b[None, :]
    if not self_loops:
        np.fill_diagonal(mask, False)
    i, j = np.nonzero(mask)
    return np.stack([i, j], axis=1).astype(np.int64)


def batch_graphs(graphs):
    """Concatenate graphs into one disconnected graph with a ``batch`` vector."""
    if not graphs:
        raise ValueError("need at least one graph")
    grid = graphs[0].grid
    offset = 0
    pos, edges, batch, rots, sc, vec, es = [], [], [], [], [], [], []
    for g_idx, g in enumerate(graphs):
        if g.grid is not grid and (g.grid is None or grid is None
                                   or not np.array_equal(g.grid.points, grid.points)):
            raise ValueError("batched graphs must share one base grid")
        pos.append(g.positions)
        edges.append(g.edges + offset)
        batch.append(np.full(g.num_nodes, g_idx, dtype=np.int64))
        if g.grid_rotations is not None:
            if g.num_graphs != 1:
                raise ValueError("nested batches are not supported")
            rots.append(g.grid_rotations[0])
        sc.append(g.scalars)
        vec.append(g.vectors)
        es.append(g.edge_scalars)
        offset += g.num_nodes
    if rots and len(rots) != len(graphs):
        raise ValueError("either all or none of the graphs carry grid rotations")

    def cat(items):
        if all(x is None for x in items):
            return None
        if any(x is None for x in items):
            raise ValueError("inconsistent optional fields across graphs")
        return np.concatenate(items, axis=0)

    orients = [g.orientations for g in graphs]
    return GeomGraph(
        positions=np.concatenate(pos), edges=np.concatenate(edges), grid=grid,
        orientations=cat(orients), batch=np.concatenate(batch),
        grid_rotations=np.stack(rots) if rots else None,
        scalars=cat(sc), vectors=cat(vec), edge_scalars=cat(es),
    )


def transform_graph(graph, g, rotate_grid=True):
    """Apply a rigid motion to positions, vectors, orientations and (optionally) the grid.

    The grid is co-rotated by composing ``g.rotation`` into ``grid_rotations``.
    """
    R, t = g.rotation, g.translation
    changes = {"positions": graph.positions @ R.T + t}
    if graph.vectors is not None:
        changes["vectors"] = np.einsum("ab,pbv->pav", R, graph.vectors)
    if graph.orientations is not None:
        changes["orientations"] = graph.orientations @ R.T
    if graph.grid is not None and rotate_grid:
        G = max(graph.num_graphs, 1)
        base = graph.grid_rotations if graph.grid_rotations is not None else np.broadcast_to(
            np.eye(graph.dim), (G, graph.dim, graph.dim))
        changes["grid_rotations"] = np.einsum("ab,gbc->gac", R, base)
    return graph.with_(**changes)
