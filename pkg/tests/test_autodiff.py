import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ponita.autodiff import (
    AdamState,
    DTensor,
    Tape,
    adam_step,
    backward,
    check_gradients,
    const,
    cosine_lr,
    load_checkpoint,
    ops,
    save_checkpoint,
)

RNG = np.random.default_rng(0)


def _r(*shape, positive=False):
    x = RNG.standard_normal(shape)
    return np.abs(x) + 0.5 if positive else x


def _weighted(fn, shapes_out_seed=0):
    """loss = sum(fn(t) * W) with a fixed random W of the output's shape."""
    cache = {}

    def loss(t):
        out = fn(t)
        if "w" not in cache:
            cache["w"] = np.random.default_rng(shapes_out_seed).standard_normal(out.shape)
        return ops.sum(ops.mul(out, cache["w"]))

    return loss


IDX = np.array([2, 0, 1, 2, 4])
SEG = np.array([0, 0, 1, 3, 1, 2])
SND = np.array([0, 1, 2, 3, 1])
RCV = np.array([1, 2, 0, 0, 3])

PRIMITIVES = {
    "add": (lambda t: ops.add(t["a"], t["b"]), {"a": _r(3, 4), "b": _r(4)}),
    "sub": (lambda t: ops.sub(t["a"], t["b"]), {"a": _r(3, 1), "b": _r(3, 4)}),
    "mul": (lambda t: ops.mul(t["a"], t["b"]), {"a": _r(2, 3, 4), "b": _r(3, 1)}),
    "div": (lambda t: ops.div(t["a"], t["b"]), {"a": _r(3, 4), "b": _r(3, 4, positive=True)}),
    "neg": (lambda t: ops.neg(t["a"]), {"a": _r(5)}),
    "square": (lambda t: ops.square(t["a"]), {"a": _r(5)}),
    "power": (lambda t: ops.power(t["a"], 3), {"a": _r(5)}),
    "exp": (lambda t: ops.exp(t["a"]), {"a": _r(5)}),
    "log": (lambda t: ops.log(t["a"]), {"a": _r(5, positive=True)}),
    "sqrt": (lambda t: ops.sqrt(t["a"]), {"a": _r(5, positive=True)}),
    "relu": (lambda t: ops.relu(t["a"]), {"a": _r(7)}),
    "gelu": (lambda t: ops.gelu(t["a"]), {"a": _r(4, 5)}),
    "gelu_deriv": (lambda t: ops.gelu_deriv(t["a"]), {"a": _r(6)}),
    "arccos": (lambda t: ops.arccos(t["a"]), {"a": np.tanh(_r(6)) * 0.9}),
    "safe_inv": (lambda t: ops.safe_inv(t["a"]), {"a": _r(5, positive=True)}),
    "where": (lambda t: ops.where(t["a"].data > 0, t["a"], t["b"]), {"a": _r(6), "b": _r(6)}),
    "sum": (lambda t: ops.sum(t["a"], axis=1, keepdims=True), {"a": _r(3, 4, 2)}),
    "mean": (lambda t: ops.mean(t["a"], axis=(0, 2)), {"a": _r(3, 4, 2)}),
    "norm": (lambda t: ops.norm(t["a"], axis=-1), {"a": _r(4, 3)}),
    "reshape": (lambda t: ops.reshape(t["a"], (6, 2)), {"a": _r(3, 4)}),
    "transpose": (lambda t: ops.transpose(t["a"], (2, 0, 1)), {"a": _r(2, 3, 4)}),
    "broadcast": (lambda t: ops.broadcast_to(t["a"], (5, 3, 4)), {"a": _r(3, 1)}),
    "getitem": (lambda t: ops.getitem(t["a"], (slice(1, 3), 0)), {"a": _r(4, 3)}),
    "concat": (lambda t: ops.concat([t["a"], t["b"]], axis=1), {"a": _r(3, 2), "b": _r(3, 4)}),
    "stack": (lambda t: ops.stack([t["a"], t["b"]], axis=0), {"a": _r(3, 2), "b": _r(3, 2)}),
    "gather": (lambda t: ops.gather(t["a"], IDX), {"a": _r(5, 3)}),
    "take": (lambda t: ops.take(t["a"], np.array([1, 1, 0]), axis=1), {"a": _r(2, 3, 2)}),
    "segment_sum": (lambda t: ops.segment_sum(t["a"], SEG, 4), {"a": _r(6, 2, 3)}),
    "edge_conv": (lambda t: ops.edge_conv(t["k"], t["f"], SND, RCV, 4),
                  {"k": _r(5, 3, 2), "f": _r(4, 3, 2)}),
    "matmul": (lambda t: ops.matmul(t["a"], t["b"]), {"a": _r(2, 3, 4), "b": _r(4, 5)}),
    "einsum": (lambda t: ops.einsum("qrc,prc->pqc", t["a"], t["b"]),
               {"a": _r(3, 3, 2), "b": _r(4, 3, 2)}),
    "einsum_reduce": (lambda t: ops.einsum("ab,bc->a", t["a"], t["b"]),
                      {"a": _r(3, 4), "b": _r(4, 2)}),
    "layer_norm": (lambda t: ops.layer_norm(t["x"], t["s"], t["b"]),
                   {"x": _r(3, 5), "s": _r(5), "b": _r(5)}),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_matches_finite_differences(name):
    fn, params = PRIMITIVES[name]
    err = check_gradients(_weighted(fn), params, n_coords=20, h=1e-6, seed=1)
    assert err < 1e-6, f"{name}: {err}"


@pytest.mark.parametrize("name", ["mul", "gelu", "exp", "sqrt", "edge_conv", "einsum",
                                  "layer_norm", "matmul", "norm", "segment_sum"])
def test_double_backward(name):
    # d/dp of (1/2)|dL/dp|^2 against finite differences of that quantity
    fn, params = PRIMITIVES[name]
    loss = _weighted(fn, 3)

    def grad_norm(t):
        tape = Tape()
        leaves = {k: tape.variable(v.data) for k, v in t.items()}
        out = loss(leaves)
        grads = tape.grad(out, list(leaves.values()), create_graph=False)
        return sum(float(np.sum(g.data ** 2)) for g in grads) / 2

    tape = Tape()
    leaves = {k: tape.variable(v, name=k) for k, v in params.items()}
    grads = tape.grad(loss(leaves), list(leaves.values()), create_graph=True)
    total = ops.sum(ops.square(grads[0]))
    for g in grads[1:]:
        total = ops.add(total, ops.sum(ops.square(g)))
    total = ops.mul(total, 0.5)
    if total.tracked:
        tape.backward(total)
    else:  # linear op: the gradient does not depend on the inputs
        for t in leaves.values():
            t.grad = np.zeros_like(t.data)
    h = 1e-6
    rng = np.random.default_rng(2)
    for k, v in params.items():
        for c in rng.choice(v.size, size=min(4, v.size), replace=False):
            plus, minus = v.copy(), v.copy()
            plus.flat[c] += h
            minus.flat[c] -= h
            num = (grad_norm({**{q: DTensor(w) for q, w in params.items()}, k: DTensor(plus)})
                   - grad_norm({**{q: DTensor(w) for q, w in params.items()}, k: DTensor(minus)})) / (2 * h)
            ana = leaves[k].grad.data.flat[c] if isinstance(leaves[k].grad, DTensor) \
                else leaves[k].grad.flat[c]
            assert abs(ana - num) <= 1e-5 * max(1.0, abs(num)), (name, k, ana, num)


def test_segment_sum_example():
    out = ops.segment_sum(DTensor(np.array([1.0, 2.0, 3.0])), np.array([0, 0, 1]), 2)
    np.testing.assert_array_equal(out.data, [3.0, 3.0])


def test_square_gradient_example():
    tape = Tape()
    x = tape.variable(3.0)
    tape.backward(ops.mul(x, x))
    assert x.grad == 6.0


def test_linear_gradient_structure():
    x = RNG.standard_normal(4)
    tape = Tape()
    W = tape.variable(RNG.standard_normal((3, 4)))
    loss = ops.sum(ops.matmul(W, DTensor(x[:, None])))
    tape.backward(loss)
    np.testing.assert_allclose(W.grad, np.tile(x, (3, 1)))


def test_backward_twice_raises():
    tape = Tape()
    x = tape.variable(np.ones(3))
    loss = ops.sum(ops.mul(x, x))
    tape.backward(loss)
    with pytest.raises(RuntimeError):
        tape.backward(loss)


def test_backward_non_scalar_raises():
    tape = Tape()
    x = tape.variable(np.ones(3))
    with pytest.raises(ValueError):
        tape.backward(ops.mul(x, 2.0))
    with pytest.raises(ValueError):
        backward(DTensor(np.ones(())))


def test_unused_leaf_gets_zero_gradient():
    tape = Tape()
    x = tape.variable(np.ones(3))
    y = tape.variable(np.ones((2, 2)))
    tape.backward(ops.sum(x))
    np.testing.assert_array_equal(y.grad, np.zeros((2, 2)))


def test_shape_errors_name_both_shapes():
    with pytest.raises(ValueError, match=r"\(3, 4\).*\(5, 6\)"):
        ops.matmul(DTensor(np.ones((3, 4))), DTensor(np.ones((5, 6))))
    with pytest.raises(ValueError, match=r"\(3,\).*\(4,\)"):
        ops.add(DTensor(np.ones(3)), DTensor(np.ones(4)))


def test_mixed_tapes_rejected():
    a = Tape().variable(np.ones(2))
    b = Tape().variable(np.ones(2))
    with pytest.raises(ValueError):
        ops.add(a, b)


def test_constants_are_untracked():
    c = const([1, 2, 3])
    assert c.dtype == np.float64 and not c.tracked
    assert ops.mul(c, c).tape is None


def test_float32_preserved():
    tape = Tape()
    x = tape.variable(np.ones(4, dtype=np.float32))
    loss = ops.sum(ops.gelu(ops.mul(x, 2.0)))
    assert loss.dtype == np.float32
    tape.backward(loss)
    assert x.grad.dtype == np.float32


def test_gelu_values():
    from scipy.special import erf
    x = np.linspace(-6, 6, 101)
    np.testing.assert_allclose(ops.gelu(DTensor(x)).data, 0.5 * x * (1 + erf(x / np.sqrt(2))),
                               rtol=1e-12, atol=1e-15)


def test_arccos_clamps():
    out = ops.arccos(DTensor(np.array([1.0 + 1e-12, -1.0 - 1e-12])))
    np.testing.assert_array_equal(out.data, [0.0, np.pi])


def test_composite_mlp_gradcheck():
    params = {"w1": _r(3, 8), "b1": _r(8), "w2": _r(8, 2), "b2": _r(2)}
    x = DTensor(_r(5, 3))

    def loss(t):
        h = ops.gelu(ops.add(ops.matmul(x, t["w1"]), t["b1"]))
        y = ops.add(ops.matmul(h, t["w2"]), t["b2"])
        return ops.mean(ops.square(y))

    assert check_gradients(loss, params, n_coords=20) < 1e-5


def test_translation_invariant_scalar_has_zero_net_gradient():
    p = RNG.standard_normal((6, 3))
    tape = Tape()
    pos = tape.variable(p)
    i, j = np.triu_indices(6, 1)
    d = ops.norm(ops.sub(ops.gather(pos, j), ops.gather(pos, i)), axis=-1)
    e = ops.sum(ops.exp(ops.neg(d)))
    tape.backward(e)
    assert np.max(np.abs(pos.grad.sum(0))) < 1e-8


# ------------------------------------------------------------------ optimiser

def test_adam_zero_gradient_is_noop():
    p = {"w": _r(3)}
    new, _ = adam_step(p, {"w": np.zeros(3)}, AdamState(), 0.1)
    np.testing.assert_array_equal(new["w"], p["w"])


def test_adam_first_step():
    p = {"w": np.zeros(4)}
    g = np.array([0.5, -2.0, 1e-3, 3.0])
    new, state = adam_step(p, {"w": g}, AdamState(), 0.01)
    np.testing.assert_allclose(new["w"], -0.01 * g / (np.abs(g) + 1e-8), rtol=1e-12)
    assert state.step == 1


def test_adam_deterministic_and_validates():
    p = {"w": _r(3)}
    g = {"w": _r(3)}
    a, _ = adam_step(p, g, AdamState(), 0.1)
    b, _ = adam_step(p, g, AdamState(), 0.1)
    np.testing.assert_array_equal(a["w"], b["w"])
    with pytest.raises(ValueError):
        adam_step(p, {"w": np.zeros(4)}, AdamState(), 0.1)


def test_adam_minimises_quadratic():
    p = {"w": np.array([3.0, -2.0])}
    state = AdamState()
    for _ in range(2000):
        p, state = adam_step(p, {"w": 2 * p["w"]}, state, 0.01)
    assert np.max(np.abs(p["w"])) < 1e-2


def test_cosine_schedule():
    assert cosine_lr(0, 500, 50, 1.0) == pytest.approx(1.0 / 50)
    assert cosine_lr(50, 500, 50, 1.0) == pytest.approx(1.0)
    last = cosine_lr(499, 500, 50, 1.0)
    step = 0.5 * (1 - np.cos(np.pi / 450))
    assert 0 <= last <= step + 1e-15
    with pytest.raises(ValueError):
        cosine_lr(500, 500, 50, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 400), st.integers(0, 50), st.data())
def test_cosine_bounds(total, warmup, data):
    warmup = min(warmup, total - 1)
    epoch = data.draw(st.integers(0, total - 1))
    lr = cosine_lr(epoch, total, warmup, 0.3)
    assert 0.0 <= lr <= 0.3 + 1e-15
    if epoch > warmup:
        assert lr <= cosine_lr(epoch - 1, total, warmup, 0.3) + 1e-15


# ------------------------------------------------------------------ checkpoints

def test_checkpoint_round_trip(tmp_path):
    params = {"a.w": _r(3, 4), "b": _r(7), "scalar": np.array(2.5), "ünï": _r(2, 1, 2)}
    path = tmp_path / "m.pckp"
    save_checkpoint(path, params)
    back = load_checkpoint(path)
    assert list(back) == list(params)
    for k in params:
        np.testing.assert_array_equal(back[k], params[k])
        assert back[k].shape == params[k].shape


def test_checkpoint_layout(tmp_path):
    import struct
    path = tmp_path / "m.pckp"
    save_checkpoint(path, {"w": np.arange(6.0).reshape(2, 3)})
    blob = path.read_bytes()
    assert blob[:4] == b"PCKP"
    assert struct.unpack_from("<IIH", blob, 4) == (1, 1, 1)
    assert blob[14:15] == b"w"
    assert struct.unpack_from("<B2Q", blob, 15) == (2, 2, 3)
    np.testing.assert_array_equal(np.frombuffer(blob[32:], "<f8"), np.arange(6.0))


def test_checkpoint_rejects_corrupt(tmp_path):
    path = tmp_path / "m.pckp"
    save_checkpoint(path, {"w": np.ones(3)})
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(ValueError):
        load_checkpoint(path)
    path.write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_replay_determinism():
    def run():
        rng = np.random.default_rng(9)
        tape = Tape()
        w = tape.variable(rng.standard_normal((4, 4)))
        x = DTensor(rng.standard_normal((10, 4)))
        loss = ops.mean(ops.gelu(ops.matmul(x, w)))
        tape.backward(loss)
        return loss.data.copy(), w.grad.copy()

    (l1, g1), (l2, g2) = run(), run()
    assert l1.tobytes() == l2.tobytes() and g1.tobytes() == g2.tobytes()
