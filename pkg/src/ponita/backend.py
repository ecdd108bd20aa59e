"""Kernel backend selection.

The compiled ``_native`` extension is used when importable; otherwise, or
when the environment variable ``PONITA_PURE_PYTHON`` is set to a non-empty
value other than ``0``, the numpy fallback is used. Both expose identical
functions, and the wrappers here normalise dtype/contiguity before dispatch.
"""
import os

import numpy as np

from . import _fallback

_force_pure = os.environ.get("PONITA_PURE_PYTHON", "") not in ("", "0")

_native = None
if not _force_pure:
    try:
        from . import _native
    except ImportError:  # extension not built
        _native = None

BACKEND = "cython" if _native is not None else "python"
_impl = _native if _native is not None else _fallback


def get_impl(name=None):
    """Return the kernel module for ``name`` ('cython'/'python') or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        if _native is None:
            raise RuntimeError("compiled backend is not available")
        return _native
    raise ValueError(f"unknown backend {name!r}")


def _rows(a):
    a = np.ascontiguousarray(a)
    return a.reshape(a.shape[0], -1) if a.ndim != 2 else a


def _index(idx):
    return np.ascontiguousarray(idx, dtype=np.int64)


def segment_sum(values, index, num_segments, impl=None):
    """Sum ``values`` along axis 0 into ``num_segments`` rows; trailing dims kept."""
    impl = impl or _impl
    values = np.asarray(values)
    tail = values.shape[1:]
    out = impl.segment_sum(_rows(values), _index(index), int(num_segments))
    return out.reshape((int(num_segments),) + tail)


def edge_conv(kernel, features, senders, receivers, num_nodes, impl=None):
    """Fused out[r] += kernel[e] * features[s]; kernel [E, ...], features [P, ...]."""
    impl = impl or _impl
    kernel = np.asarray(kernel)
    features = np.asarray(features)
    if kernel.shape[1:] != features.shape[1:]:
        raise ValueError(f"edge_conv: kernel {kernel.shape} vs features {features.shape}")
    dtype = np.result_type(kernel, features)
    out = impl.edge_conv(_rows(kernel.astype(dtype, copy=False)),
                         _rows(features.astype(dtype, copy=False)),
                         _index(senders), _index(receivers), int(num_nodes))
    return out.reshape((int(num_nodes),) + features.shape[1:])


def gelu(x, impl=None):
    return (impl or _impl).gelu(np.asarray(x))


def gelu_deriv(x, impl=None):
    return (impl or _impl).gelu_deriv(np.asarray(x))


def gelu_pair(x, impl=None):
    return (impl or _impl).gelu_pair(np.asarray(x))


def repulsion_energy_grad(points, impl=None):
    return (impl or _impl).repulsion_energy_grad(np.ascontiguousarray(points, dtype=np.float64))
