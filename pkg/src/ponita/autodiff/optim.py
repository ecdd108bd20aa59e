"""Adam and a warmup + cosine learning-rate schedule."""
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state, lr, betas=(0.9, 0.999), eps=1e-8):
    """One bias-corrected Adam update.

    ``params`` and ``grads`` are name -> ndarray mappings. Returns a new
    parameter dict and the advanced state; the inputs are not modified.
    Names missing from ``grads`` are left untouched.
    """
    b1, b2 = betas
    t = state.step + 1
    new_m, new_v, new_params = dict(state.m), dict(state.v), dict(params)
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ValueError(f"grad shape {g.shape} != param shape {p.shape} for {name!r}")
        m = new_m.get(name, np.zeros_like(p))
        v = new_v.get(name, np.zeros_like(p))
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_m[name], new_v[name] = m, v
        mhat = m / c1
        vhat = v / c2
        new_params[name] = p - lr * mhat / (np.sqrt(vhat) + eps)
    return new_params, AdamState(step=t, m=new_m, v=new_v)


def cosine_lr(epoch, total, warmup, base_lr):
    """Linear warmup to ``base_lr`` over ``warmup`` epochs, then cosine decay.

    During warmup lr = base_lr * (epoch + 1) / warmup; afterwards
    t = (epoch - warmup) / (total - warmup) and lr = base_lr * (1 + cos(pi t)) / 2.
    """
    if not 0 <= epoch < total:
        raise ValueError(f"epoch {epoch} outside [0, {total})")
    if epoch < warmup:
        return base_lr * (epoch + 1) / warmup
    span = max(total - warmup, 1)
    t = (epoch - warmup) / span
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * t))
