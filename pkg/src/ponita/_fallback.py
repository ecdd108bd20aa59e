"""Pure numpy implementations of the hot kernels.

Mirrors the compiled ``ponita._native`` module function for function. Used
when the extension is not built or ``PONITA_PURE_PYTHON=1`` is set.
"""
import numpy as np
from scipy.special import erf

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


def segment_sum(values, index, num_segments):
    """Sum rows of ``values`` [E, K] into ``num_segments`` buckets by ``index``."""
    out = np.zeros((num_segments, values.shape[1]), dtype=values.dtype)
    np.add.at(out, index, values)
    return out


def edge_conv(kernel, features, senders, receivers, num_nodes):
    """out[r] += kernel[e] * features[s] for every edge e = (r <- s)."""
    return segment_sum(kernel * features[senders], receivers, num_nodes)


def gelu(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_deriv(x):
    """d/dx gelu(x) = Phi(x) + x phi(x)."""
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


def gelu_pair(x):
    """(gelu(x), gelu'(x)) sharing one erf evaluation."""
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    return x * cdf, (cdf + x * pdf).astype(x.dtype, copy=False)


def repulsion_energy_grad(points):
    """Inverse-distance energy sum_{i<j} 1/|x_i - x_j| and its gradient."""
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(-1))
    np.fill_diagonal(dist, np.inf)
    inv = 1.0 / dist
    energy = 0.5 * inv.sum()
    grad = -((inv ** 3)[:, :, None] * diff).sum(axis=1)
    return float(energy), grad
