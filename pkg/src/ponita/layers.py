"""Group convolution layers over position-orientation space.

Bundle form (features [P, N, C] over a shared grid):

    spatial_gconv    f1[i, o] = sum_j k1(o.(p_j - p_i), |(p_j - p_i) perp o|)[o] * f[j, o]
    spherical_gconv  f2[i, o] = sum_o' k2(o . o') * f1[i, o']

Point-cloud form (one orientation per node, features [P, C]):

    pointcloud_gconv f[i] = sum_j K(a_ij, b_ij, o_i . o_j) @ f[j]

plus the lifting/readout maps between R^n signals and spherical signals
and the ConvNeXt block that strings the separable stages together.
"""
import numpy as np

from .autodiff import DTensor, const, ops
from .nn import add_prefixed, init_linear, linear


def _t(x):
    return x if isinstance(x, DTensor) else const(x)


def _c(arr, like):
    """Constant in the dtype of ``like`` (keeps float32 pipelines float32)."""
    return const(np.ascontiguousarray(arr, dtype=like.dtype))


def _positions(graph, positions):
    return _t(graph.positions if positions is None else positions)


def relative_positions(graph, positions=None):
    """p_j - p_i per edge (receiver i, sender j), [E, n]."""
    pos = _positions(graph, positions)
    return ops.sub(ops.gather(pos, graph.senders), ops.gather(pos, graph.receivers))


def edge_grids(graph):
    """Grid directions seen by each edge's receiver: [N, n] if shared, else [E, N, n]."""
    if graph.grid is None:
        raise ValueError("graph has no grid")
    if graph.grid_rotations is None:
        return graph.grid.points
    return graph.node_grids()[graph.batch[graph.receivers]]


def node_grids(graph):
    """Grid directions per node: [N, n] if shared, else [P, N, n]."""
    if graph.grid is None:
        raise ValueError("graph has no grid")
    if graph.grid_rotations is None:
        return graph.grid.points
    return graph.node_grids()[graph.batch]


def _append_edge_scalars(attrs, graph):
    if graph.edge_scalars is None:
        return attrs
    es = graph.edge_scalars
    extra = es if attrs.ndim == 2 else np.broadcast_to(
        es[:, None, :], attrs.shape[:-1] + (es.shape[1],))
    return ops.concat([attrs, _c(extra, attrs)], axis=-1)


def spatial_invariants(graph, positions=None, length_scale=1.0):
    """Per (edge, orientation) invariants (o.(p_j-p_i), |(p_j-p_i) - a o|), [E, N, 2 (+k)].

    Positions may be a tracked DTensor (force computation). Edge scalars,
    if present, are appended unscaled.
    """
    rel = ops.div(relative_positions(graph, positions), length_scale)
    grid = edge_grids(graph)
    E, n = rel.shape
    if grid.ndim == 2:
        a = ops.matmul(rel, _c(grid.T, rel))
        proj = ops.mul(ops.reshape(a, (E, -1, 1)), _c(grid[None], rel))
    else:
        grid = _c(grid, rel)
        a = ops.einsum("en,ekn->ek", rel, grid)
        proj = ops.mul(ops.reshape(a, (E, -1, 1)), grid)
    perp = ops.sub(ops.reshape(rel, (E, 1, n)), proj)
    b = ops.norm(perp, axis=-1)
    return _append_edge_scalars(ops.stack([a, b], axis=-1), graph)


def distance_invariants(graph, positions=None, length_scale=1.0):
    """|p_j - p_i| per edge, [E, 1 (+k)]."""
    rel = ops.div(relative_positions(graph, positions), length_scale)
    d = ops.norm(rel, axis=-1, keepdims=True)
    return _append_edge_scalars(d, graph)


def pointcloud_invariants(graph, positions=None, length_scale=1.0):
    """(o_i.(p_j-p_i), |(p_j-p_i) - a o_i|, o_i.o_j) per edge, [E, 3 (+k)]."""
    if graph.orientations is None:
        raise ValueError("point-cloud invariants need per-node orientations")
    rel = ops.div(relative_positions(graph, positions), length_scale)
    oi = graph.orientations[graph.receivers]
    oj = graph.orientations[graph.senders]
    a = ops.sum(ops.mul(rel, _c(oi, rel)), axis=-1, keepdims=True)
    b = ops.norm(ops.sub(rel, ops.mul(a, _c(oi, rel))), axis=-1, keepdims=True)
    c = _c(np.sum(oi * oj, axis=-1, keepdims=True), rel)
    return _append_edge_scalars(ops.concat([a, b, c], axis=-1), graph)


def _in_degree(graph):
    return np.bincount(graph.receivers, minlength=graph.num_nodes).astype(np.float64)


def _aggregate(out, graph, aggregation):
    if aggregation == "sum":
        return out
    if aggregation == "mean":
        deg = np.maximum(_in_degree(graph), 1.0)
        return ops.div(out, deg.reshape((-1,) + (1,) * (out.ndim - 1)))
    raise ValueError(f"unknown aggregation {aggregation!r}")


def spatial_gconv(graph, k1, features, aggregation="sum"):
    """Depthwise message passing per orientation: [E, N, C] x [P, N, C] -> [P, N, C]."""
    if graph.form != "bundle":
        raise ValueError("spatial_gconv needs a bundle-form graph; use pointcloud_gconv")
    k1, f = _t(k1), _t(features)
    if f.ndim != 3 or f.shape[0] != graph.num_nodes:
        raise ValueError(f"features must be [P, N, C] with P={graph.num_nodes}, got {f.shape}")
    if k1.shape != (graph.num_edges,) + f.shape[1:]:
        raise ValueError(f"k1 shape {k1.shape} does not match edges/features {f.shape}")
    out = ops.edge_conv(k1, f, graph.senders, graph.receivers, graph.num_nodes)
    return _aggregate(out, graph, aggregation)


def rn_gconv(graph, k, features, aggregation="sum"):
    """Depthwise message passing on R^n features: [E, C] x [P, C] -> [P, C]."""
    k, f = _t(k), _t(features)
    if f.ndim != 2 or k.shape != (graph.num_edges, f.shape[1]):
        raise ValueError(f"kernel {k.shape} does not match edges/features {f.shape}")
    out = ops.edge_conv(k, f, graph.senders, graph.receivers, graph.num_nodes)
    return _aggregate(out, graph, aggregation)


def spherical_gconv(features, K2):
    """Contraction over the N' axis: [P, N, C] x [N, N', C] -> [P, N, C]."""
    f, K2 = _t(features), _t(K2)
    if f.ndim != 3 or K2.ndim != 3 or K2.shape[1] != f.shape[1] or K2.shape[2] != f.shape[2]:
        raise ValueError(f"spherical_gconv: features {f.shape} vs kernel {K2.shape}")
    return ops.einsum("qrc,prc->pqc", K2, f)


def pointcloud_gconv(graph, kernel, features, aggregation="sum"):
    """Full matrix-kernel message passing: [E, C_out, C_in] x [P, C_in] -> [P, C_out]."""
    if graph.orientations is None:
        raise ValueError("pointcloud_gconv needs per-node orientations")
    K, f = _t(kernel), _t(features)
    if K.ndim != 3 or K.shape[0] != graph.num_edges or f.shape != (graph.num_nodes, K.shape[2]):
        raise ValueError(f"pointcloud_gconv: kernel {K.shape} vs features {f.shape}")
    msgs = ops.einsum("eoc,ec->eo", K, ops.gather(f, graph.senders))
    out = ops.segment_sum(msgs, graph.receivers, graph.num_nodes)
    return _aggregate(out, graph, aggregation)


# ------------------------------------------------------------ lift / readout

def scalar_to_sphere(s, N):
    """[P, C] -> [P, N, C], constant over orientations."""
    s = _t(s)
    P, C = s.shape
    return ops.broadcast_to(ops.reshape(s, (P, 1, C)), (P, N, C))


def vec_to_sphere(v, grid):
    """f[i, o, c] = v[i, :, c] . o. ``grid`` is [N, n] or per-node [P, N, n]."""
    v = _t(v)
    g = grid.points if hasattr(grid, "points") else np.asarray(grid)
    if g.ndim == 2:
        return ops.einsum("pdc,nd->pnc", v, _c(g, v))
    return ops.einsum("pdc,pnd->pnc", v, _c(g, v))


def sphere_to_scalar(f):
    """s[i, c] = sum_o f[i, o, c]."""
    return ops.sum(_t(f), axis=1)


def sphere_to_vec(f, grid):
    """v[i, :, c] = sum_o f[i, o, c] o (no normalisation)."""
    f = _t(f)
    g = grid.points if hasattr(grid, "points") else np.asarray(grid)
    if g.ndim == 2:
        return ops.einsum("pnc,nd->pdc", f, _c(g, f))
    return ops.einsum("pnc,pnd->pdc", f, _c(g, f))


# ------------------------------------------------------------ ConvNeXt block

def init_convnext(rng, prefix, channels, basis_dim, fiber_basis_dim=None, widening=4,
                  zero_last=False, params=None):
    """Parameters of one block. ``fiber_basis_dim`` None means no spherical stage."""
    params = {} if params is None else params
    C = channels
    add_prefixed(params, f"{prefix}.k1", init_linear(rng, basis_dim, C))
    if fiber_basis_dim is not None:
        add_prefixed(params, f"{prefix}.k2", init_linear(rng, fiber_basis_dim, C))
    params[f"{prefix}.conv_b"] = np.zeros(C)
    params[f"{prefix}.norm.scale"] = np.ones(C)
    params[f"{prefix}.norm.shift"] = np.zeros(C)
    add_prefixed(params, f"{prefix}.lin1", init_linear(rng, C, widening * C))
    add_prefixed(params, f"{prefix}.lin2", init_linear(rng, widening * C, C, zero=zero_last))
    params[f"{prefix}.layer_scale"] = np.ones(C)
    return params


def convnext_block(params, prefix, x, graph, spatial_basis, fiber_basis=None,
                   aggregation="sum"):
    """x -> SpatialGConv -> SphericalGConv -> LayerNorm -> Linear -> GELU -> Linear -> + x.

    Bundle form when ``x`` is [P, N, C] (``fiber_basis`` [N, N, B] required);
    R^n form when ``x`` is [P, C] (distance-conditioned conv, no spherical stage).
    """
    x = _t(x)
    k1 = linear(spatial_basis, params, f"{prefix}.k1")
    if x.ndim == 3:
        h = spatial_gconv(graph, k1, x, aggregation)
        if fiber_basis is None:
            raise ValueError("bundle-form block needs the fiber basis")
        h = spherical_gconv(h, linear(fiber_basis, params, f"{prefix}.k2"))
    else:
        h = rn_gconv(graph, k1, x, aggregation)
    h = ops.add(h, params[f"{prefix}.conv_b"])
    h = ops.layer_norm(h, params[f"{prefix}.norm.scale"], params[f"{prefix}.norm.shift"])
    h = ops.gelu(linear(h, params, f"{prefix}.lin1"))
    h = linear(h, params, f"{prefix}.lin2")
    return ops.add(x, ops.mul(h, params[f"{prefix}.layer_scale"]))
