"""Parameter initialisation and the linear map used throughout the models."""
import numpy as np

from .autodiff import ops


def init_linear(rng, fan_in, fan_out, bias=True, zero=False):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights (and bias)."""
    if zero:
        w = np.zeros((fan_in, fan_out))
        return {"w": w, "b": np.zeros(fan_out)} if bias else {"w": w}
    bound = 1.0 / np.sqrt(fan_in)
    out = {"w": rng.uniform(-bound, bound, size=(fan_in, fan_out))}
    if bias:
        out["b"] = rng.uniform(-bound, bound, size=fan_out)
    return out


def add_prefixed(params, prefix, sub):
    for k, v in sub.items():
        params[f"{prefix}.{k}"] = v
    return params


def linear(x, params, prefix):
    """x[..., in] @ W + b, flattening leading axes so the matmul stays 2-D."""
    w = params[f"{prefix}.w"]
    lead = x.shape[:-1]
    y = ops.matmul(ops.reshape(x, (-1, x.shape[-1])), w)
    b = params.get(f"{prefix}.b")
    if b is not None:
        y = ops.add(y, b)
    return ops.reshape(y, lead + (w.shape[1],))
