"""Minimal reverse-mode automatic differentiation over numpy arrays.

Each op records its inputs and a vector-Jacobian closure on the output
tensor; :func:`backward` walks the graph in reverse topological order and
accumulates gradients into the leaves.  Only the operations the surface
reconstruction network needs are provided.  Everything runs in the dtype of
the participating arrays (float64 for gradient checking, float32 for
training speed).
"""

import numpy as np
import scipy.sparse


class Tensor:
    __slots__ = ("data", "grad", "parents", "requires_grad")

    def __init__(self, data, parents=(), requires_grad=False):
        self.data = data
        self.grad = None
        self.parents = parents
        self.requires_grad = requires_grad or any(
            p.requires_grad for p, _ in parents
        )

    @property
    def shape(self):
        return self.data.shape


def tensor(data, requires_grad=False):
    return Tensor(np.asarray(data), requires_grad=requires_grad)


def _node(data, parents):
    # drop the tape for subgraphs that cannot need gradients
    parents = tuple((p, vjp) for p, vjp in parents if p.requires_grad)
    return Tensor(data, parents)


def backward(root, seed=1.0):
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every leaf.

    ``seed`` is the gradient injected at ``root`` (normally 1 for a scalar
    loss); gradients are linear in it.
    """
    topo = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            stack.append((parent, False))
    root.grad = np.asarray(seed, dtype=root.data.dtype) * np.ones_like(root.data)
    for node in reversed(topo):
        if node.grad is None:
            continue
        for parent, vjp in node.parents:
            g = vjp(node.grad)
            # vjp outputs may alias their input; accumulation rebinds, never
            # mutates, so aliasing is safe
            parent.grad = g if parent.grad is None else parent.grad + g


def _unbroadcast(g, shape):
    # reduce gradient g back to `shape` after numpy broadcasting
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def matmul(a, b):
    return _node(a.data @ b.data, [
        (a, lambda g: g @ b.data.T),
        (b, lambda g: a.data.T @ g),
    ])


def affine(x, w, b):
    """Fused ``x @ w + b`` (bias added in place on the fresh product)."""
    out = x.data @ w.data
    out += b.data
    return _node(out, [
        (x, lambda g: g @ w.data.T),
        (w, lambda g: x.data.T @ g),
        (b, lambda g: g.sum(axis=0)),
    ])


def transpose(a):
    return _node(a.data.T, [(a, lambda g: g.T)])


def add(a, b):
    return _node(a.data + b.data, [
        (a, lambda g: _unbroadcast(g, a.data.shape)),
        (b, lambda g: _unbroadcast(g, b.data.shape)),
    ])


def sub(a, b):
    return _node(a.data - b.data, [
        (a, lambda g: _unbroadcast(g, a.data.shape)),
        (b, lambda g: _unbroadcast(-g, b.data.shape)),
    ])


def add3(a, b, bias):
    """``a + b + bias`` with one output allocation (bias broadcasts)."""
    out = a.data + b.data
    out += bias.data
    return _node(out, [
        (a, lambda g: g),
        (b, lambda g: g),
        (bias, lambda g: _unbroadcast(g, bias.data.shape)),
    ])


def mul(a, b):
    return _node(a.data * b.data, [
        (a, lambda g: _unbroadcast(g * b.data, a.data.shape)),
        (b, lambda g: _unbroadcast(g * a.data, b.data.shape)),
    ])


def scale(a, c):
    c = a.data.dtype.type(c)
    return _node(a.data * c, [(a, lambda g: g * c)])


def add_const(a, c):
    c = np.asarray(c, dtype=a.data.dtype)
    return _node(a.data + c, [(a, lambda g: g)])


def leaky_relu(a, slope=0.1):
    dt = a.data.dtype
    # gate = 1 where x >= 0 else slope, built with SIMD-friendly passes
    gate = np.empty_like(a.data)
    np.greater_equal(a.data, 0, out=gate, casting="unsafe")
    gate *= dt.type(1.0 - slope)
    gate += dt.type(slope)
    return _node(a.data * gate, [(a, lambda g: g * gate)])


def slice_rows(a, i0, i1):
    def vjp(g):
        out = np.zeros_like(a.data)
        out[i0:i1] = g
        return out
    return _node(a.data[i0:i1], [(a, vjp)])


def concat_cols(tensors):
    datas = [t.data for t in tensors]
    offs = np.cumsum([0] + [d.shape[1] for d in datas])
    parents = [
        (t, (lambda j0, j1: lambda g: g[:, j0:j1])(offs[i], offs[i + 1]))
        for i, t in enumerate(tensors)
    ]
    return _node(np.concatenate(datas, axis=1), parents)


def reshape(a, shape):
    orig = a.data.shape
    return _node(a.data.reshape(shape), [(a, lambda g: g.reshape(orig))])


def make_scatter_plan(idx, nrows):
    """Sparse one-hot matrix turning a row gather's adjoint into a matmul.

    Returns CSR ``S`` of shape (nrows, len(idx)) with ``S[idx[e], e] = 1``,
    so the scatter-add of gathered-row gradients is ``S @ g``.
    """
    idx = np.asarray(idx)
    perm = np.argsort(idx, kind="stable")
    counts = np.bincount(idx, minlength=nrows)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return scipy.sparse.csr_matrix(
        (np.ones(len(idx), dtype=np.float32), perm, indptr),
        shape=(nrows, len(idx)),
    )


def take_rows(a, idx, plan=None):
    """Row gather ``a[idx]``; the adjoint scatter-adds back into the rows."""

    def vjp(g):
        if plan is None:
            out = np.zeros_like(a.data)
            np.add.at(out, idx, g)
            return out
        return plan @ g

    return _node(a.data[idx], [(a, vjp)])


def build_segments(counts):
    """Padded incidence matrix for contiguous row segments.

    For segment sizes ``counts`` over rows 0..sum(counts)-1, returns
    ``(pad_idx, valid)`` of shape (num_segments, max(counts)): ``pad_idx``
    holds row indices (padding repeats the segment's last row), ``valid``
    marks real slots.  Every row appears in exactly one valid slot.
    """
    counts = np.asarray(counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    slot = np.arange(counts.max())[None, :]
    valid = slot < counts[:, None]
    pad_idx = starts[:, None] + np.minimum(slot, counts[:, None] - 1)
    return pad_idx, valid


def segment_max(a, pad_idx, seg_ids):
    """Per-segment elementwise max through a padded incidence matrix.

    ``pad_idx`` is the (num_segments, max_size) row-index matrix from
    :func:`build_segments`; ``seg_ids`` maps every row of ``a`` to its
    segment.  Ties propagate gradient to every maximizing row (ties have
    measure zero for continuous activations).
    """
    out = a.data[pad_idx].max(axis=1)

    def vjp(g):
        grad = g[seg_ids]
        grad *= a.data == out[seg_ids]
        return grad

    return _node(out, [(a, vjp)])


def max_rows(a):
    out = a.data.max(axis=0, keepdims=True)
    return _node(out, [(a, lambda g: g * (a.data == out))])


def mean_rows(a):
    n = a.data.shape[0]
    out = a.data.mean(axis=0, keepdims=True)
    return _node(out, [(a, lambda g: np.broadcast_to(g / n, a.data.shape).copy())])


def softmax_rows(a):
    e = np.exp(a.data - a.data.max(axis=1, keepdims=True))
    s = e / e.sum(axis=1, keepdims=True)
    return _node(s, [
        (a, lambda g: s * (g - (g * s).sum(axis=1, keepdims=True)))
    ])


def wsum(a, w):
    """Weighted sum reducing to a scalar: sum(w * a)."""
    w = np.asarray(w, dtype=a.data.dtype)
    return _node(np.asarray((a.data * w).sum(), dtype=a.data.dtype),
                 [(a, lambda g: g * w)])
