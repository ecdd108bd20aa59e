"""Central finite-difference gradient checks."""
import numpy as np

from .tensor import Tape


def fd_gradient(fn, params, name, coords, h=1e-6):
    """Central differences of scalar ``fn(params)`` at the flat ``coords`` of one array."""
    base = params[name]
    out = np.empty(len(coords))
    for k, c in enumerate(coords):
        plus = base.copy()
        minus = base.copy()
        plus.flat[c] += h
        minus.flat[c] -= h
        fp = fn({**params, name: plus})
        fm = fn({**params, name: minus})
        out[k] = (fp - fm) / (2.0 * h)
    return out


def relative_error(analytic, numeric, floor=1e-8):
    """max |a - n| / max(|a|, |n|, floor), elementwise then maxed."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / scale)) if a.size else 0.0


def check_gradients(loss_fn, params, n_coords=20, h=1e-6, seed=0, floor=1e-8):
    """Compare tape gradients of ``loss_fn`` against central differences.

    ``loss_fn(tensors)`` receives a dict of DTensors and returns a scalar
    DTensor. ``n_coords`` flat coordinates are sampled uniformly over all
    parameter entries. Returns the maximum relative error.
    """
    rng = np.random.default_rng(seed)
    params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    tape = Tape()
    tensors = {k: tape.variable(v, name=k) for k, v in params.items()}
    loss = loss_fn(tensors)
    tape.backward(loss)
    analytic = {k: t.grad for k, t in tensors.items()}

    def scalar(p):
        return float(loss_fn(p).data)

    names = list(params)
    sizes = np.array([params[k].size for k in names])
    picks = rng.choice(int(sizes.sum()), size=min(n_coords, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    consts = {k: v for k, v in params.items()}
    for p in picks:
        i = int(np.searchsorted(offsets, p, side="right") - 1)
        name = names[i]
        c = int(p - offsets[i])
        num = fd_gradient(lambda q: scalar(_wrap(q)), consts, name, [c], h=h)[0]
        worst = max(worst, relative_error([analytic[name].flat[c]], [num], floor=floor))
    return worst


def check_vjp(fn, params, n_coords=20, h=1e-6, seed=0, floor=1e-12):
    """Gradient check of ``fn`` (any output shape) through a random projection.

    The scalar is <W, fn(params)> with W ~ N(0, 1) drawn from ``seed``. The
    finite difference is taken on the output tensors before projecting,
    sum(W * (fn(+h) - fn(-h))) / 2h, so outputs that do not depend on the
    perturbed coordinate contribute exactly zero.

    Returns ||a - n|| / max(||a||, ||n||, floor) over the sampled coordinates
    (2-norm of the sampled gradient vector). A per-coordinate ratio is not
    used: at h = 1e-6 the central difference carries ~1e-9 absolute
    round-off, and some coordinates are tiny or exactly zero by construction,
    so their individual ratios measure the noise rather than the gradient.
    """
    from . import ops

    rng = np.random.default_rng(seed)
    params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    tape = Tape()
    tensors = {k: tape.variable(v, name=k) for k, v in params.items()}
    out = fn(tensors)
    W = rng.standard_normal(out.shape)
    tape.backward(ops.sum(ops.mul(out, W)))
    names = list(params)
    sizes = np.array([params[k].size for k in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(sizes.sum())
    analytic, numeric = [], []
    for p in rng.choice(total, size=min(n_coords, total), replace=False):
        i = int(np.searchsorted(offsets, p, side="right") - 1)
        name, c = names[i], int(p - offsets[i])
        plus, minus = params[name].copy(), params[name].copy()
        plus.flat[c] += h
        minus.flat[c] -= h
        fp = fn(_wrap({**params, name: plus})).data
        fm = fn(_wrap({**params, name: minus})).data
        numeric.append(float(np.sum(W * (fp - fm))) / (2.0 * h))
        analytic.append(float(tensors[name].grad.flat[c]))
    return vector_relative_error(analytic, numeric, floor)


def vector_relative_error(analytic, numeric, floor=1e-12):
    """||a - n|| / max(||a||, ||n||, floor)."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    scale = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / scale)


def _wrap(params):
    from .tensor import DTensor
    return {k: DTensor(v) for k, v in params.items()}
