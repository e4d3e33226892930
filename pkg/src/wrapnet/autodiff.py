"""A small reverse-mode autodiff over float64 numpy arrays.

Each op builds a ``Tensor`` that remembers its parents and a closure mapping
the upstream gradient to one gradient per parent. Only tensors that (directly
or indirectly) require gradients keep their graph.
"""

from __future__ import annotations

import numpy as np

from . import kernels


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, parents=(), backward=None, op=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        track = requires_grad or any(p.requires_grad for p in parents)
        self.requires_grad = bool(track)
        self._parents = tuple(parents) if track else ()
        self._backward = backward if track else None
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            raise RuntimeError("tensor does not require grad; nothing to differentiate")
        order = _topo(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                k = id(p)
                grads[k] = pg if k not in grads else grads[k] + pg

    # operator sugar
    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, o):
        return matmul(self, o)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def _topo(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order[::-1]


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data + b.data, parents=(a, b), op="add",
                  backward=lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data - b.data, parents=(a, b), op="sub",
                  backward=lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data * b.data, parents=(a, b), op="mul",
                  backward=lambda g: (_unbroadcast(g * b.data, a.shape),
                                      _unbroadcast(g * a.data, b.shape)))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    return Tensor(a.data @ b.data, parents=(a, b), op="matmul",
                  backward=lambda g: (g @ b.data.T if a.requires_grad else None,
                                      a.data.T @ g if b.requires_grad else None))


def tabs(x):
    x = as_tensor(x)
    return Tensor(np.abs(x.data), parents=(x,), op="abs",
                  backward=lambda g: (g * np.sign(x.data),))


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor(np.where(mask, x.data, 0.0), parents=(x,), op="relu",
                  backward=lambda g: (g * mask,))


def tsum(x, axis=None, keepdims=False):
    x = as_tensor(x)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor(x.data.sum(axis=axis, keepdims=keepdims), parents=(x,), op="sum", backward=back)


def canonical_sum(x, axis, keepdims=False):
    """Sum along ``axis`` after sorting the values there.

    The result depends only on the multiset of summands, so it is bit-identical
    under any reordering along ``axis``.
    """
    x = as_tensor(x)
    if x.shape[axis] == 3:
        # sorting network for three summands: same value as sort-then-sum, much faster
        a, b, c = (np.take(x.data, k, axis=axis) for k in range(3))
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        mid = np.maximum(lo, np.minimum(hi, c))
        val = (np.minimum(lo, c) + mid) + np.maximum(hi, c)
        if keepdims:
            val = np.expand_dims(val, axis)
    else:
        # a contiguous copy fixes numpy's reduction order, which otherwise follows the memory layout
        val = np.sort(np.ascontiguousarray(np.moveaxis(x.data, axis, -1)), axis=-1).sum(axis=-1)
        if keepdims:
            val = np.expand_dims(val, axis)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor(val, parents=(x,), op="csum", backward=back)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    count = x.data.size if axis is None else x.shape[axis]
    return mul(tsum(x, axis, keepdims), 1.0 / count)


def concat(xs, axis=0):
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor(np.concatenate([x.data for x in xs], axis=axis), parents=tuple(xs),
                  op="concat", backward=back)


def stack(xs, axis=0):
    xs = [as_tensor(x) for x in xs]

    def back(g):
        return tuple(np.take(g, k, axis=axis) for k in range(len(xs)))

    return Tensor(np.stack([x.data for x in xs], axis=axis), parents=tuple(xs),
                  op="stack", backward=back)


def take(x, indices, axis=0):
    """Gather along ``axis`` with an integer index array of any shape."""
    x = as_tensor(x)
    idx = np.asarray(indices, dtype=np.int64)

    def back(g):
        lead = x.shape[axis]
        rest = x.shape[:axis] + x.shape[axis + 1:]
        gm = np.moveaxis(g, list(range(axis, axis + idx.ndim)), list(range(idx.ndim)))
        rows = np.ascontiguousarray(gm).reshape(idx.size, -1)
        acc = np.zeros((lead, rows.shape[1]))
        kernels.scatter_add_rows(acc, np.ascontiguousarray(idx.reshape(-1)), rows)
        return (np.moveaxis(acc.reshape((lead,) + rest), 0, axis),)

    return Tensor(np.take(x.data, idx, axis=axis), parents=(x,), op="take", backward=back)


def face_stack(x, adj):
    """Per-face rows ``[x_i, sum x_j, sum |x_{j+1} - x_j|, sum |x_i - x_j|]`` for ``adj`` of shape (m, 3).

    The three neighbor sums are order-canonical.
    """
    x = as_tensor(x)
    adj = np.ascontiguousarray(adj, dtype=np.int64)
    xd = np.ascontiguousarray(x.data)
    out = Tensor(kernels.face_conv_stack(xd, adj), parents=(x,), op="face_stack",
                 backward=lambda g: (kernels.face_conv_stack_back(np.ascontiguousarray(g), xd, adj),))
    out.adj = adj
    return out


def getitem(x, index):
    x = as_tensor(x)

    basic = isinstance(index, (slice, int)) or (
        isinstance(index, tuple) and all(isinstance(i, (slice, int)) for i in index))

    def back(g):
        out = np.zeros(x.shape)
        if basic:  # basic indexing never repeats an element
            out[index] = g
        else:
            np.add.at(out, index, g)
        return (out,)

    return Tensor(x.data[index], parents=(x,), op="getitem", backward=back)


def reshape(x, shape):
    x = as_tensor(x)
    return Tensor(x.data.reshape(shape), parents=(x,), op="reshape",
                  backward=lambda g: (g.reshape(x.shape),))


def square(x):
    return mul(x, x)


def min_kink_distance(out: Tensor, skip_exact_zeros=False) -> float:
    """Smallest ``|input|`` of any abs/relu node (or fused abs inside a face stack) behind ``out``.

    ``skip_exact_zeros`` ignores inputs that are exactly zero, for graphs where
    those zeros are structural (for example ``|c - c|`` of a broadcast row).
    """
    best = np.inf
    for node in _topo(out):
        if node.op in ("abs", "relu"):
            d = np.abs(node._parents[0].data)
        elif node.op == "face_stack" and node._parents:
            x, adj = node._parents[0].data, node.adj
            nb = x[adj]
            d = np.abs(np.concatenate([nb[:, [1, 2, 0]] - nb, x[:, None] - nb], axis=1))
        else:
            continue
        if skip_exact_zeros:
            d = d[d != 0.0]
        if d.size:
            best = min(best, float(d.min()))
    return best
