"""Dense tensor and tape for reverse-mode differentiation.

A :class:`DTensor` is a thin wrapper around a numpy array. Tensors created
through :meth:`Tape.variable` are *tracked*: every primitive applied to a
tracked tensor is appended to that tensor's tape, and its output is tracked
on the same tape. Untracked tensors are plain constants and operations on
them run eagerly without any bookkeeping. There is no global tape.

Adjoints are themselves written with differentiable primitives, so a
backward pass run with ``create_graph=True`` is recorded and can be
differentiated again (used for training on forces = -dE/dpositions).
"""
import numpy as np

__all__ = ["DTensor", "Tape", "const", "backward"]


class DTensor:
    __slots__ = ("data", "tape", "key", "grad", "name", "__weakref__")

    __array_priority__ = 100

    def __init__(self, data, tape=None, key=-1, name=None):
        if isinstance(data, np.ndarray):
            self.data = data
        elif isinstance(data, np.floating):  # 0-d reductions keep their precision
            self.data = np.asarray(data)
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.tape = tape
        self.key = key
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    @property
    def tracked(self):
        return self.tape is not None and self.tape.recording

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        flag = ", tracked" if self.tape is not None else ""
        return f"DTensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # operator sugar; defined in ops to avoid a circular import
    def __add__(self, other):
        return _ops().add(self, other)

    def __radd__(self, other):
        return _ops().add(other, self)

    def __sub__(self, other):
        return _ops().sub(self, other)

    def __rsub__(self, other):
        return _ops().sub(other, self)

    def __mul__(self, other):
        return _ops().mul(self, other)

    def __rmul__(self, other):
        return _ops().mul(other, self)

    def __truediv__(self, other):
        return _ops().div(self, other)

    def __rtruediv__(self, other):
        return _ops().div(other, self)

    def __neg__(self):
        return _ops().neg(self)

    def __matmul__(self, other):
        return _ops().matmul(self, other)

    def __getitem__(self, index):
        return _ops().getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return _ops().sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return _ops().mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops().reshape(self, shape)

    def backward(self, create_graph=False):
        return backward(self, create_graph=create_graph)


def _ops():
    from . import ops
    return ops


def const(x, dtype=None):
    """Wrap ``x`` as an untracked tensor (no copy for ndarrays)."""
    if isinstance(x, DTensor):
        return x
    arr = np.asarray(x, dtype=dtype if dtype is not None else None)
    if arr.dtype.kind in "iub" and dtype is None:
        arr = arr.astype(np.float64)
    return DTensor(arr)


class _Node:
    __slots__ = ("out", "inputs", "vjp", "needs")

    def __init__(self, out, inputs, vjp, needs):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp
        self.needs = needs


class Tape:
    """An ordered record of primitive applications.

    Usage::

        tape = Tape()
        w = tape.variable(np.ones(3))
        loss = (w * w).sum()
        tape.backward(loss)     # w.grad == 2 * w.data

    A tape may be used as a context manager; leaving the block releases all
    saved tensors.
    """

    def __init__(self):
        self.nodes = []
        self.leaves = []
        self.recording = True
        self.consumed = False
        self._next_key = 0

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.release()
        return False

    def release(self):
        self.nodes = []
        self.consumed = True
        self.recording = False

    def _key(self):
        k = self._next_key
        self._next_key += 1
        return k

    def variable(self, data, name=None, dtype=None):
        """Create a differentiable leaf on this tape."""
        if self.consumed:
            raise RuntimeError("tape has been consumed; start a new tape")
        if isinstance(data, DTensor):
            data = data.data
        arr = np.array(data, dtype=dtype if dtype is not None else None, copy=True)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        t = DTensor(arr, tape=self, key=self._key(), name=name)
        self.leaves.append(t)
        return t

    def record(self, out_data, inputs, vjp):
        needs = tuple(x.tape is self for x in inputs)
        out = DTensor(out_data, tape=self, key=self._key())
        self.nodes.append(_Node(out, inputs, vjp, needs))
        return out

    def _check(self, output):
        if self.consumed:
            raise RuntimeError(
                "backward called on a consumed tape; re-run the forward pass")
        if not isinstance(output, DTensor) or output.tape is not self:
            raise ValueError("output is not tracked on this tape")
        if output.size != 1:
            raise ValueError(f"backward needs a scalar output, got shape {output.shape}")

    def _propagate(self, output, create_graph, seed=None):
        from . import ops

        self._check(output)
        grads = {output.key: seed if seed is not None else
                 DTensor(np.ones_like(output.data))}
        was = self.recording
        self.recording = bool(create_graph)
        try:
            nodes = list(self.nodes)
            for node in reversed(nodes):
                g = grads.pop(node.out.key, None)
                if g is None:
                    continue
                in_grads = node.vjp(g, node.needs)
                for x, need, gx in zip(node.inputs, node.needs, in_grads):
                    if not need or gx is None:
                        continue
                    if gx.shape != x.shape:
                        raise AssertionError(
                            f"adjoint shape {gx.shape} != input shape {x.shape}")
                    prev = grads.get(x.key)
                    grads[x.key] = gx if prev is None else ops.add(prev, gx)
        finally:
            self.recording = was
        return grads

    def backward(self, loss, create_graph=False):
        """Populate ``.grad`` on every leaf of this tape.

        Without ``create_graph`` the tape is consumed afterwards and a second
        call raises. Leaf gradients are ndarrays (or DTensors when
        ``create_graph`` is set).
        """
        grads = self._propagate(loss, create_graph)
        for leaf in self.leaves:
            g = grads.get(leaf.key)
            if g is None:
                g = DTensor(np.zeros_like(leaf.data))
            leaf.grad = g if create_graph else g.data
        if not create_graph:
            self.release()
        return {leaf.name or leaf.key: leaf.grad for leaf in self.leaves}

    def grad(self, output, inputs, create_graph=False):
        """Gradients of scalar ``output`` with respect to ``inputs`` (a list).

        Returns DTensors. With ``create_graph`` the returned gradients are
        tracked and the tape stays live for a further backward pass.
        """
        grads = self._propagate(output, create_graph)
        out = []
        for x in inputs:
            g = grads.get(x.key)
            out.append(g if g is not None else DTensor(np.zeros_like(x.data)))
        if not create_graph:
            self.release()
        return out


def backward(loss, create_graph=False):
    """Run ``loss.tape.backward(loss)``."""
    if not isinstance(loss, DTensor) or loss.tape is None:
        raise ValueError("loss is not tracked on any tape")
    return loss.tape.backward(loss, create_graph=create_graph)
