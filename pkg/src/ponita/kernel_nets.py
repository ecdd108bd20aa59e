"""Continuous convolution kernels parameterised as small neural fields.

Attributes are expanded with a polynomial embedding, pushed through a
two-layer GELU MLP that produces a shared basis, and each convolution layer
reads its own kernel from that basis with a linear head:

    attr -> PE -> Linear -> GELU -> Linear -> GELU -> basis -> Linear -> kernel

Parameters live in flat ``name -> array`` dicts; the callables below take
those dicts (values may be ndarrays or DTensors).
"""
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .autodiff import DTensor, const, ops
from .grids import gram_matrix
from .nn import add_prefixed, init_linear, linear


class PolynomialEmbedding:
    """All monomials of total degree 1..degree, graded-lexicographic order.

    For inputs (x, y) and degree 2 the output is (x, y, x^2, xy, y^2).
    """

    def __init__(self, input_dim, degree):
        if input_dim < 1 or degree < 1:
            raise ValueError("input_dim and degree must be >= 1")
        self.input_dim = input_dim
        self.degree = degree
        self.levels = []
        prev = {(i,): i for i in range(input_dim)}
        self.monomial_index = [self._exponents((i,)) for i in range(input_dim)]
        for _ in range(2, degree + 1):
            combos = list(combinations_with_replacement(range(input_dim), len(next(iter(prev))) + 1))
            parents = np.array([prev[c[:-1]] for c in combos], dtype=np.int64)
            variables = np.array([c[-1] for c in combos], dtype=np.int64)
            self.levels.append((parents, variables))
            self.monomial_index += [self._exponents(c) for c in combos]
            prev = {c: k for k, c in enumerate(combos)}

    def _exponents(self, combo):
        e = [0] * self.input_dim
        for i in combo:
            e[i] += 1
        return tuple(e)

    @property
    def output_dim(self):
        return comb(self.input_dim + self.degree, self.degree) - 1

    def __call__(self, x):
        x = x if isinstance(x, DTensor) else const(x)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"expected last axis {self.input_dim}, got shape {x.shape}")
        cols = [x]
        level = x
        for parents, variables in self.levels:
            level = ops.mul(ops.take(level, parents, -1), ops.take(x, variables, -1))
            cols.append(level)
        return ops.concat(cols, axis=-1) if len(cols) > 1 else x


def poly_embed(values, degree):
    """Plain-array convenience wrapper around :class:`PolynomialEmbedding`."""
    values = np.asarray(values, dtype=np.float64)
    squeeze = values.ndim == 1
    x = values[None] if squeeze else values
    out = PolynomialEmbedding(x.shape[-1], degree)(const(x)).data
    return out[0] if squeeze else out


class KernelBasis:
    """Shared basis network: PE -> Linear -> GELU -> Linear -> GELU."""

    def __init__(self, input_dim, degree=3, basis_dim=256, hidden_dim=None, prefix="basis"):
        self.embedding = PolynomialEmbedding(input_dim, degree)
        self.basis_dim = basis_dim
        self.hidden_dim = hidden_dim or basis_dim
        self.prefix = prefix

    def init(self, rng, params=None):
        params = {} if params is None else params
        add_prefixed(params, f"{self.prefix}.lin1",
                     init_linear(rng, self.embedding.output_dim, self.hidden_dim))
        add_prefixed(params, f"{self.prefix}.lin2",
                     init_linear(rng, self.hidden_dim, self.basis_dim))
        return params

    def __call__(self, params, attrs):
        attrs = attrs if isinstance(attrs, DTensor) else const(attrs)
        if attrs.shape[0] == 0:
            return const(np.zeros(attrs.shape[:-1] + (self.basis_dim,), dtype=attrs.dtype))
        h = self.embedding(attrs)
        h = ops.gelu(linear(h, params, f"{self.prefix}.lin1"))
        return ops.gelu(linear(h, params, f"{self.prefix}.lin2"))


class KernelHead:
    """Layer-specific linear read of a kernel from the shared basis."""

    def __init__(self, basis_dim, out_dim, prefix, bias=True):
        self.basis_dim = basis_dim
        self.out_dim = out_dim
        self.prefix = prefix
        self.bias = bias

    def init(self, rng, params=None, zero=False):
        params = {} if params is None else params
        add_prefixed(params, self.prefix,
                     init_linear(rng, self.basis_dim, self.out_dim, bias=self.bias, zero=zero))
        return params

    def __call__(self, params, basis):
        return linear(basis, params, self.prefix)


class RandomFourierEmbedding:
    """Interface placeholder for a random Fourier feature embedding.

    Polynomial embeddings are used throughout; this alternative is
    intentionally not implemented.
    """

    def __init__(self, input_dim, num_features, scale=1.0):
        self.input_dim = input_dim
        self.num_features = num_features
        self.scale = scale

    def __call__(self, x):
        raise NotImplementedError("random Fourier feature embedding is not implemented")


def eval_basis(basis, params, attrs):
    """[E, attr_dim] -> [E, basis_dim]."""
    return basis(params, attrs)


def eval_spatial_kernel(head, params, basis_values):
    """[E, (N,) basis_dim] -> [E, (N,) C] channelwise kernel values."""
    return head(params, basis_values)


def spherical_attributes(grid):
    """Inner products o . o' of a grid, shaped [N, N, 1]."""
    return gram_matrix(grid)[..., None]


def precompute_spherical_kernel(basis, head, params, grid):
    """K2[o, o', c] = k2(o . o')[c] for a grid; depends on the grid only via its Gram matrix."""
    return head(params, basis(params, spherical_attributes(grid)))
