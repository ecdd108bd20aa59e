"""Full networks: the position-orientation network, its distance-only
counterpart, and energy/force evaluation.

    NodeEmbed -> ConvNeXt x L -> Readout

Scalar readouts add a linear head after every block and sum over blocks,
orientations and nodes (per graph). Vector readouts map every block to one
spherical channel per output, turn it into a vector with ``sphere_to_vec``
and average over blocks.
"""
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import DTensor, Tape, const, ops
from .kernel_nets import KernelBasis, spherical_attributes
from .layers import (
    convnext_block,
    distance_invariants,
    init_convnext,
    node_grids,
    relative_positions,
    scalar_to_sphere,
    spatial_invariants,
    sphere_to_vec,
    vec_to_sphere,
)
from .nn import add_prefixed, init_linear, linear

READOUTS = ("scalar", "vector")


@dataclass
class ModelConfig:
    dim: int = 3
    num_layers: int = 5
    channels: int = 64
    scalar_in: int = 0
    vector_in: int = 0
    edge_in: int = 0
    readout: str = "scalar"
    out_channels: int = 1
    degree: int = 3
    basis_dim: int = 256
    length_scale: float = 1.0
    widening: int = 4
    aggregation: str = "sum"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.num_layers < 0 or self.channels < 1 or self.out_channels < 1:
            raise ValueError("num_layers >= 0, channels >= 1 and out_channels >= 1 required")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}, got {self.readout!r}")
        if self.length_scale <= 0:
            raise ValueError("length_scale must be positive")

    def to_dict(self):
        return asdict(self)


def _input_width(cfg):
    return max(cfg.scalar_in + cfg.vector_in, 1)


def _check_inputs(cfg, graph, allow_vectors=True):
    S = 0 if graph.scalars is None else graph.scalars.shape[1]
    V = 0 if graph.vectors is None else graph.vectors.shape[2]
    K = 0 if graph.edge_scalars is None else graph.edge_scalars.shape[1]
    if S != cfg.scalar_in or (allow_vectors and V != cfg.vector_in) or K != cfg.edge_in:
        raise ValueError(
            f"graph inputs (scalars={S}, vectors={V}, edge scalars={K}) do not match config "
            f"(scalar_in={cfg.scalar_in}, vector_in={cfg.vector_in}, edge_in={cfg.edge_in})")
    if graph.dim != cfg.dim:
        raise ValueError(f"graph dimension {graph.dim} != config dim {cfg.dim}")


def _graph_sum(y, graph):
    return ops.segment_sum(y, graph.batch, max(graph.num_graphs, 1))


def param_dtype(params):
    w = params["embed.w"]
    return (w.data if isinstance(w, DTensor) else np.asarray(w)).dtype


def _default_positions(params, graph, positions):
    if positions is not None:
        return positions
    return const(graph.positions.astype(param_dtype(params)))


def parameter_count(params):
    return int(sum(np.asarray(v.data if isinstance(v, DTensor) else v).size
                   for v in params.values()))


class Ponita:
    """Separable position-orientation network on bundle-form graphs."""

    def __init__(self, config):
        self.config = config
        c = config
        self.spatial_basis = KernelBasis(2 + c.edge_in, c.degree, c.basis_dim, prefix="spatial_basis")
        self.fiber_basis = KernelBasis(1, c.degree, c.basis_dim, prefix="fiber_basis")

    def init(self, seed=0, zero_last=False):
        rng = np.random.default_rng(seed)
        c = self.config
        params = {}
        self.spatial_basis.init(rng, params)
        self.fiber_basis.init(rng, params)
        add_prefixed(params, "embed", init_linear(rng, _input_width(c), c.channels))
        for layer in range(c.num_layers):
            init_convnext(rng, f"block{layer}", c.channels, c.basis_dim, c.basis_dim,
                          c.widening, zero_last=zero_last, params=params)
        for layer in range(max(c.num_layers, 1)):
            add_prefixed(params, f"readout{layer}", init_linear(rng, c.channels, c.out_channels))
        return params

    def embed(self, params, graph):
        N = graph.grid.N
        dt = param_dtype(params)
        parts = []
        if graph.scalars is not None:
            parts.append(scalar_to_sphere(graph.scalars.astype(dt), N))
        if graph.vectors is not None:
            parts.append(vec_to_sphere(graph.vectors.astype(dt), node_grids(graph)))
        if not parts:
            parts.append(const(np.ones((graph.num_nodes, N, 1), dtype=dt)))
        x = parts[0] if len(parts) == 1 else ops.concat(parts, axis=-1)
        return linear(x, params, "embed")

    def bases(self, params, graph, positions=None):
        attrs = spatial_invariants(graph, positions, self.config.length_scale)
        sb = self.spatial_basis(params, attrs)
        fb = self.fiber_basis(params, spherical_attributes(graph.grid).astype(param_dtype(params)))
        return sb, fb

    def features(self, params, graph, positions=None):
        """Per-block feature maps [P, N, C] (the embedding when L = 0)."""
        if graph.form != "bundle":
            raise ValueError("Ponita needs a bundle-form graph (with a grid)")
        _check_inputs(self.config, graph)
        positions = _default_positions(params, graph, positions)
        sb, fb = self.bases(params, graph, positions)
        x = self.embed(params, graph)
        out = []
        for layer in range(self.config.num_layers):
            x = convnext_block(params, f"block{layer}", x, graph, sb, fb, self.config.aggregation)
            out.append(x)
        return out or [x]

    def __call__(self, params, graph, positions=None):
        """Scalar readout: [G, out]. Vector readout: [P, n, out]."""
        feats = self.features(params, graph, positions)
        if self.config.readout == "scalar":
            total = None
            for layer, x in enumerate(feats):
                y = ops.sum(linear(x, params, f"readout{layer}"), axis=1)
                total = y if total is None else ops.add(total, y)
            return _graph_sum(total, graph)
        grids = node_grids(graph)
        total = None
        for layer, x in enumerate(feats):
            v = sphere_to_vec(linear(x, params, f"readout{layer}"), grids)
            total = v if total is None else ops.add(total, v)
        return ops.div(total, float(len(feats)))


class Pnita:
    """Distance-only network on R^n graphs; features [P, C], no orientation axis."""

    def __init__(self, config):
        if config.readout != "scalar":
            raise ValueError("Pnita has no directional features; vector readout is not provided")
        self.config = config
        c = config
        self.spatial_basis = KernelBasis(1 + c.edge_in, c.degree, c.basis_dim, prefix="spatial_basis")

    def init(self, seed=0, zero_last=False):
        rng = np.random.default_rng(seed)
        c = self.config
        params = {}
        self.spatial_basis.init(rng, params)
        add_prefixed(params, "embed", init_linear(rng, max(c.scalar_in, 1), c.channels))
        for layer in range(c.num_layers):
            init_convnext(rng, f"block{layer}", c.channels, c.basis_dim, None,
                          c.widening, zero_last=zero_last, params=params)
        self._init_readout(rng, params)
        return params

    def _init_readout(self, rng, params):
        c = self.config
        for layer in range(max(c.num_layers, 1)):
            add_prefixed(params, f"readout{layer}", init_linear(rng, c.channels, c.out_channels))

    def embed(self, params, graph):
        x = graph.scalars if graph.scalars is not None else np.ones((graph.num_nodes, 1))
        return linear(const(x.astype(param_dtype(params))), params, "embed")

    def features(self, params, graph, positions=None):
        if graph.form != "rn":
            raise ValueError("Pnita works on plain R^n graphs (no grid or orientations)")
        _check_inputs(self.config, graph, allow_vectors=False)
        positions = _default_positions(params, graph, positions)
        attrs = distance_invariants(graph, positions, self.config.length_scale)
        sb = self.spatial_basis(params, attrs)
        x = self.embed(params, graph)
        out = []
        for layer in range(self.config.num_layers):
            x = convnext_block(params, f"block{layer}", x, graph, sb, None, self.config.aggregation)
            out.append(x)
        return (out or [x]), sb

    def __call__(self, params, graph, positions=None):
        feats, _ = self.features(params, graph, positions)
        total = None
        for layer, x in enumerate(feats):
            y = linear(x, params, f"readout{layer}")
            total = y if total is None else ops.add(total, y)
        return _graph_sum(total, graph)


class PnitaVectorBaseline(Pnita):
    """Distance-only network with an equivariant vector output built from invariant weights.

    Per block l the node features x_l give coefficients for the input
    vectors and, through an edge kernel, weights for relative positions:

        v_i^l = sum_v alpha_iv^l u_iv + sum_j w_ij^l (p_j - p_i)

    Predictions are averaged over blocks. Used as the N-body baseline.
    """

    def __init__(self, config):
        super().__init__(ModelConfig(**{**config.to_dict(), "readout": "scalar"}))
        self.config = config

    def _init_readout(self, rng, params):
        c = self.config
        for layer in range(max(c.num_layers, 1)):
            add_prefixed(params, f"vec{layer}.node",
                         init_linear(rng, c.channels, max(c.vector_in, 1) * c.out_channels))
            add_prefixed(params, f"vec{layer}.k", init_linear(rng, c.basis_dim, c.channels))
            add_prefixed(params, f"vec{layer}.edge", init_linear(rng, c.channels, c.out_channels))

    def __call__(self, params, graph, positions=None):
        c = self.config
        positions = _default_positions(params, graph, positions)
        feats, sb = self.features(params, graph, positions)
        rel = relative_positions(graph, positions)
        u = graph.vectors if graph.vectors is not None else np.zeros((graph.num_nodes, c.dim, 1))
        u = u.astype(param_dtype(params))
        V = u.shape[2]
        total = None
        for layer, x in enumerate(feats):
            coef = ops.reshape(linear(x, params, f"vec{layer}.node"), (graph.num_nodes, V, c.out_channels))
            v = ops.einsum("pdv,pvo->pdo", const(u), coef)
            k = linear(sb, params, f"vec{layer}.k")
            w = linear(ops.mul(k, ops.gather(x, graph.senders)), params, f"vec{layer}.edge")
            msg = ops.einsum("ed,eo->edo", rel, w)
            v = ops.add(v, ops.segment_sum(msg, graph.receivers, graph.num_nodes))
            total = v if total is None else ops.add(total, v)
        return ops.div(total, float(len(feats)))


def energy_and_forces(model, params, graph, tape=None, create_graph=False):
    """(E [G], F [P, n]) with F = -dE/dp through the whole network.

    ``params`` may be plain arrays or DTensors tracked on ``tape``; with
    ``create_graph`` the forces stay differentiable (force-matching losses).
    Without a tape the forces are returned as a plain DTensor and a fresh
    tape is used and released.
    """
    own = tape is None
    if own:
        tape = Tape()
    pos = tape.variable(graph.positions, name="positions", dtype=param_dtype(params))
    energy = model(params, graph, pos)
    if energy.ndim == 2:
        energy = ops.reshape(energy, (energy.shape[0],)) if energy.shape[1] == 1 else energy
    if energy.ndim != 1:
        raise ValueError("energy_and_forces needs a single scalar output channel")
    grad = tape.grad(ops.sum(energy), [pos], create_graph=create_graph)[0]
    forces = ops.neg(grad)
    if own and not create_graph:
        energy = DTensor(energy.data)
        forces = DTensor(forces.data)
    return energy, forces
