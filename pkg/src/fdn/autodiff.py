"""Reverse-mode automatic differentiation over Matrix values.

Each Node wraps a Matrix plus, when produced by an operation, a backward
rule that scatters the node's output gradient onto the operation's inputs.
``backward`` on a scalar node runs one reverse topological sweep; gradients
accumulate additively into every reachable node that requires them, so
parameter gradients must be zeroed between optimization steps.

Subgraphs that cannot influence any parameter (constants and functions of
constants) carry no parent links and are skipped by the sweep.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .matrix import Matrix, ShapeError


class Node:
    __slots__ = ("value", "parents", "op", "requires_grad", "_grad", "_backward",
                 "_backward_done")

    def __init__(self, value: Matrix, parents: tuple["Node", ...] = (),
                 op: str = "leaf", requires_grad: bool = False) -> None:
        self.value = value
        self.parents = parents
        self.op = op
        self.requires_grad = requires_grad
        self._grad: np.ndarray | None = None  # allocated on first accumulation
        self._backward: Callable[[np.ndarray], None] | None = None
        self._backward_done = False

    @property
    def grad(self) -> Matrix:
        if self._grad is None:
            return Matrix.zeros(*self.value.shape)
        return Matrix.wrap(self._grad)

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def _accumulate(self, g: np.ndarray) -> None:
        if self._grad is None:
            self._grad = np.zeros(self.value.shape)
        self._grad += g

    def zero_grad(self) -> None:
        self._grad = None

    def __repr__(self) -> str:
        return f"Node({self.op}, {self.value.rows}x{self.value.cols})"


def parameter(values) -> Node:
    """Leaf node that collects gradients."""
    m = values if isinstance(values, Matrix) else Matrix(values)
    return Node(m, op="parameter", requires_grad=True)


def constant(values) -> Node:
    """Leaf node excluded from differentiation."""
    m = values if isinstance(values, Matrix) else Matrix(values)
    return Node(m, op="constant", requires_grad=False)


def _node(value: np.ndarray, parents: tuple[Node, ...], op: str) -> Node:
    requires = any(p.requires_grad for p in parents)
    # Nodes that cannot reach a parameter drop their parent links, pruning
    # constant subgraphs from the backward sweep.
    return Node(Matrix.wrap(value), parents if requires else (), op, requires)


# ---------------------------------------------------------------------------
# operations


def matmul(a: Node, b: Node) -> Node:
    if a.value.cols != b.value.rows:
        raise ShapeError(f"matmul: inner dimensions differ, {a.value.shape} x {b.value.shape}")
    out = _node(a.value.data @ b.value.data, (a, b), "matmul")
    if out.requires_grad:
        def _bw(g: np.ndarray) -> None:
            if a.requires_grad:
                a._accumulate(g @ b.value.data.T)
            if b.requires_grad:
                b._accumulate(a.value.data.T @ g)
        out._backward = _bw
    return out


def transpose(a: Node) -> Node:
    out = _node(a.value.data.T.copy(), (a,), "transpose")
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g.T)
    return out


def add(a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add: shapes differ, {a.value.shape} vs {b.value.shape}")
    out = _node(a.value.data + b.value.data, (a, b), "add")
    if out.requires_grad:
        def _bw(g: np.ndarray) -> None:
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                b._accumulate(g)
        out._backward = _bw
    return out


def sub(a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"sub: shapes differ, {a.value.shape} vs {b.value.shape}")
    out = _node(a.value.data - b.value.data, (a, b), "sub")
    if out.requires_grad:
        def _bw(g: np.ndarray) -> None:
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                b._accumulate(-g)
        out._backward = _bw
    return out


def mul(a: Node, b: Node) -> Node:
    """Elementwise product; square a node by passing it twice."""
    if a.value.shape != b.value.shape:
        raise ShapeError(f"mul: shapes differ, {a.value.shape} vs {b.value.shape}")
    out = _node(a.value.data * b.value.data, (a, b), "mul")
    if out.requires_grad:
        def _bw(g: np.ndarray) -> None:
            if a.requires_grad:
                a._accumulate(g * b.value.data)
            if b.requires_grad:
                b._accumulate(g * a.value.data)
        out._backward = _bw
    return out


def scale(a: Node, c: float) -> Node:
    out = _node(a.value.data * c, (a,), "scale")
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g * c)
    return out


def add_bias(a: Node, b: Node) -> Node:
    """Row-broadcast sum of a [r x c] activation and a [1 x c] bias."""
    if b.value.rows != 1 or a.value.cols != b.value.cols:
        raise ShapeError(f"add_bias: expected [r x c] + [1 x c], got {a.value.shape} + {b.value.shape}")
    out = _node(a.value.data + b.value.data, (a, b), "add_bias")
    if out.requires_grad:
        def _bw(g: np.ndarray) -> None:
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                b._accumulate(g.sum(axis=0, keepdims=True))
        out._backward = _bw
    return out


def scale_rows(a: Node, v: Node) -> Node:
    """Multiply row i of a [r x c] by scalar v[i] from a [r x 1] column."""
    if v.value.cols != 1 or a.value.rows != v.value.rows:
        raise ShapeError(f"scale_rows: expected [r x c] * [r x 1], got {a.value.shape} * {v.value.shape}")
    out = _node(a.value.data * v.value.data, (a, v), "scale_rows")
    if out.requires_grad:
        def _bw(g: np.ndarray) -> None:
            if a.requires_grad:
                a._accumulate(g * v.value.data)
            if v.requires_grad:
                v._accumulate((g * a.value.data).sum(axis=1, keepdims=True))
        out._backward = _bw
    return out


def slice_cols(a: Node, start: int, stop: int) -> Node:
    if not (0 <= start < stop <= a.value.cols):
        raise ShapeError(f"slice_cols: [{start}:{stop}] out of range for {a.value.shape}")
    out = _node(a.value.data[:, start:stop].copy(), (a,), "slice_cols")
    if out.requires_grad:
        def _bw(g: np.ndarray) -> None:
            full = np.zeros(a.value.shape)
            full[:, start:stop] = g
            a._accumulate(full)
        out._backward = _bw
    return out


def concat_cols(parts: Sequence[Node]) -> Node:
    if len(parts) == 0:
        raise ShapeError("concat_cols: need at least one part")
    rows = parts[0].value.rows
    for p in parts[1:]:
        if p.value.rows != rows:
            raise ShapeError(f"concat_cols: row counts differ, {rows} vs {p.value.rows}")
    if len(parts) == 1:
        only = parts[0]
        out = _node(only.value.data.copy(), (only,), "concat_cols")
        if out.requires_grad:
            out._backward = lambda g: only._accumulate(g)
        return out
    out = _node(np.concatenate([p.value.data for p in parts], axis=1), tuple(parts), "concat_cols")
    if out.requires_grad:
        offsets = np.cumsum([0] + [p.value.cols for p in parts])
        def _bw(g: np.ndarray) -> None:
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                if p.requires_grad:
                    p._accumulate(g[:, lo:hi])
        out._backward = _bw
    return out


def relu(a: Node) -> Node:
    out = _node(np.maximum(a.value.data, 0.0), (a,), "relu")
    if out.requires_grad:
        mask = a.value.data > 0.0
        out._backward = lambda g: a._accumulate(g * mask)
    return out


def sigmoid(a: Node) -> Node:
    """Elementwise logistic, sign-split so exp never overflows."""
    x = a.value.data
    t = np.exp(-np.abs(x))
    y = np.where(x >= 0.0, 1.0 / (1.0 + t), t / (1.0 + t))
    out = _node(y, (a,), "sigmoid")
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g * y * (1.0 - y))
    return out


def softmax_rows(a: Node) -> Node:
    x = a.value.data
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = _node(y, (a,), "softmax_rows")
    if out.requires_grad:
        def _bw(g: np.ndarray) -> None:
            inner = (g * y).sum(axis=1, keepdims=True)
            a._accumulate(y * (g - inner))
        out._backward = _bw
    return out


def sum_all(a: Node) -> Node:
    out = _node(np.array([[a.value.data.sum()]]), (a,), "sum_all")
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(np.full(a.value.shape, g[0, 0]))
    return out


def mean_all(a: Node) -> Node:
    n = a.value.data.size
    out = _node(np.array([[a.value.data.mean()]]), (a,), "mean_all")
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(np.full(a.value.shape, g[0, 0] / n))
    return out


def sum_rows(a: Node) -> Node:
    """Row sums as a [r x 1] column."""
    out = _node(a.value.data.sum(axis=1, keepdims=True), (a,), "sum_rows")
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(np.broadcast_to(g, a.value.shape).copy())
    return out


def gather_rows(table: Node, indices: np.ndarray) -> Node:
    """Row lookup table[indices]; gradient scatters back into the taken rows."""
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= table.value.rows):
        raise ShapeError(f"gather_rows: index out of range for table {table.value.shape}")
    out = _node(table.value.data[idx], (table,), "gather_rows")
    if out.requires_grad:
        def _bw(g: np.ndarray) -> None:
            full = np.zeros(table.value.shape)
            np.add.at(full, idx, g)
            table._accumulate(full)
        out._backward = _bw
    return out


def sigmoid_bce_mean(logits: Node, targets: Matrix) -> Node:
    """Mean binary cross-entropy of sigmoid(logits) against 0/1 targets.

    Fused with the activation in the standard stable form
    max(z, 0) - z*y + log(1 + exp(-|z|)), which never evaluates log(0).
    """
    z = logits.value.data
    y = targets.data
    if z.shape != y.shape:
        raise ShapeError(f"sigmoid_bce_mean: shapes differ, {z.shape} vs {y.shape}")
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    out = _node(np.array([[loss.mean()]]), (logits,), "sigmoid_bce_mean")
    if out.requires_grad:
        t = np.exp(-np.abs(z))
        p = np.where(z >= 0.0, 1.0 / (1.0 + t), t / (1.0 + t))
        n = z.size
        out._backward = lambda g: logits._accumulate(g[0, 0] * (p - y) / n)
    return out


# ---------------------------------------------------------------------------
# backward sweep


def _topo(root: Node) -> list[Node]:
    """Iterative post-order: every node appears after all of its parents."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    return order


def backward(loss: Node) -> None:
    """Populate gradients of every node reachable from a scalar loss.

    Raises if the loss is not 1x1 or if this graph was already swept and not
    reset; gradients of leaves reached by several graphs keep accumulating.
    """
    if loss.value.shape != (1, 1):
        raise ShapeError(f"backward: loss must be 1x1, got {loss.value.shape}")
    if loss._backward_done:
        raise RuntimeError("backward already ran on this graph; call reset_gradients first")
    order = _topo(loss)
    loss._accumulate(np.ones((1, 1)))
    for node in reversed(order):
        if node._backward is not None and node._grad is not None:
            node._backward(node._grad)
    loss._backward_done = True


def reset_gradients(root: Node) -> None:
    """Zero every gradient in the graph under root and allow a fresh sweep."""
    for node in _topo(root):
        node._grad = None
        node._backward_done = False
