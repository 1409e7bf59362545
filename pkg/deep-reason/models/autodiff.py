"""
Dense float64 tensors with reverse-mode automatic differentiation
"""
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ContractError, DimensionError, VocabularyIndexError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


class Tensor:
    """Node of the autodiff graph.

    `data` holds the row-major float64 values. Tensors created with
    requires_grad=True own a zero-initialised `grad` of the same shape that
    backward passes accumulate into.
    """

    def __init__(self, values, requires_grad: bool = False, _parents: Tuple["Tensor", ...] = (), _op: str = ""):
        self.data = np.asarray(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = np.zeros_like(self.data) if requires_grad else None
        self._parents = _parents
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._op = _op
        self._released = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the data"""
        return self.data.ravel()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, op={self._op or 'leaf'})"

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("Division is only defined by a constant")
        return mul(self, 1.0 / float(other))

    def __getitem__(self, idx): return take(self, idx)

    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)
    def sum(self, axis=None, keepdims=False): return tensor_sum(self, axis=axis, keepdims=keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], op: str,
            backward: Callable[[np.ndarray], None]) -> Tensor:
    requires_grad = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires_grad, _parents=tuple(parents) if requires_grad else (), _op=op)
    if requires_grad:
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`"""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} cannot be combined")


# Element-wise arithmetic

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def _backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g, b.shape)
    return _result(a.data + b.data, (a, b), "add", _backward)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def _backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g, a.shape)
        if b.requires_grad:
            b.grad -= _unbroadcast(g, b.shape)
    return _result(a.data - b.data, (a, b), "sub", _backward)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def _backward(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g * b.data, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g * a.data, b.shape)
    return _result(a.data * b.data, (a, b), "mul", _backward)


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)

    def _backward(g):
        a.grad -= g
    return _result(-a.data, (a,), "neg", _backward)


def dropout(x: ArrayLike, mask: Union[np.ndarray, Tensor]) -> Tensor:
    """Multiply by an externally supplied (already scaled) dropout mask"""
    mask_values = mask.data if isinstance(mask, Tensor) else np.asarray(mask, dtype=np.float64)
    return mul(x, Tensor(mask_values))


# Linear algebra

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product; `a` may be a vector or carry leading batch dimensions, `b` is 2-D"""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not align")
    k, n = b.shape

    def _backward(g):
        if a.requires_grad:
            a.grad += g @ b.data.T
        if b.requires_grad:
            b.grad += a.data.reshape(-1, k).T @ g.reshape(-1, n)
    return _result(a.data @ b.data, (a, b), "matmul", _backward)


# Non-linearities

def sigmoid(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def _backward(g):
        x.grad += g * out * (1.0 - out)
    return _result(out, (x,), "sigmoid", _backward)


def tanh(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)

    def _backward(g):
        x.grad += g * (1.0 - out * out)
    return _result(out, (x,), "tanh", _backward)


def relu(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    active = x.data > 0

    def _backward(g):
        x.grad += g * active
    return _result(np.where(active, x.data, 0.0), (x,), "relu", _backward)


def exp(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)

    def _backward(g):
        x.grad += g * out
    return _result(out, (x,), "exp", _backward)


def log(x: ArrayLike) -> Tensor:
    x = as_tensor(x)

    def _backward(g):
        x.grad += g / x.data
    return _result(np.log(x.data), (x,), "log", _backward)


# Structure

def _normalize_axis(axis: int, ndim: int, op: str) -> int:
    if not -ndim <= axis < ndim:
        raise DimensionError(f"{op}: axis {axis} is invalid for a {ndim}-d tensor")
    return axis % ndim


def concat(tensors: Iterable[ArrayLike], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise DimensionError("concat: nothing to concatenate")
    axis = _normalize_axis(axis, parts[0].ndim, "concat")
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise DimensionError(f"concat: shapes {[p.shape for p in parts]} disagree off axis {axis}")
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def _backward(g):
        for part, piece in zip(parts, np.split(g, bounds, axis=axis)):
            if part.requires_grad:
                part.grad += piece
    return _result(data, parts, "concat", _backward)


def take(x: ArrayLike, idx) -> Tensor:
    """Indexing / slicing; the gradient scatters back into the taken entries"""
    x = as_tensor(x)

    def _backward(g):
        np.add.at(x.grad, idx, g)
    return _result(np.array(x.data[idx]), (x,), "take", _backward)


def gather_rows(table: Tensor, ids) -> Tensor:
    """Row lookup `table[ids]`; ids may have any shape"""
    ids = np.asarray(ids, dtype=np.int64)
    rows = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= rows):
        bad = int(ids[(ids < 0) | (ids >= rows)].reshape(-1)[0])
        raise VocabularyIndexError(f"Token id {bad} outside a table of {rows} rows")

    def _backward(g):
        np.add.at(table.grad, ids, g)
    return _result(table.data[ids], (table,), "gather_rows", _backward)


def reshape(x: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {x.shape} as {tuple(shape)}")

    def _backward(g):
        x.grad += g.reshape(x.shape)
    return _result(data, (x,), "reshape", _backward)


def tensor_sum(x: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is not None:
        axis = _normalize_axis(axis, x.ndim, "sum")

    def _backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x.grad += np.broadcast_to(g, x.shape)
    return _result(x.data.sum(axis=axis, keepdims=keepdims), (x,), "sum", _backward)


def mean(x: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[_normalize_axis(axis, x.ndim, "mean")]
    return mul(tensor_sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# Classification

def softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    axis = _normalize_axis(axis, x.ndim, "softmax")
    shifted = np.exp(x.data - x.data.max(axis=axis, keepdims=True))
    out = shifted / shifted.sum(axis=axis, keepdims=True)

    def _backward(g):
        x.grad += out * (g - (g * out).sum(axis=axis, keepdims=True))
    return _result(out, (x,), "softmax", _backward)


def cross_entropy(logits: ArrayLike, targets: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of `targets` under softmax(logits), fused in log space"""
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy: logits must be B x K, got {logits.shape}")
    batch, classes = logits.shape
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.shape[0] != batch:
        raise DimensionError(f"cross_entropy: {targets.shape[0]} targets for {batch} rows")
    if targets.size and (targets.min() < 0 or targets.max() >= classes):
        raise VocabularyIndexError(f"cross_entropy: targets must lie in [0, {classes})")
    rows = np.arange(batch)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -log_probs[rows, targets].mean()

    def _backward(g):
        probs = np.exp(log_probs)
        probs[rows, targets] -= 1.0
        logits.grad += g * probs / batch
    return _result(np.asarray(loss), (logits,), "cross_entropy", _backward)


# Reverse pass

class Tape:
    """Topologically ordered record of the operations behind one scalar"""

    def __init__(self, root: Tensor):
        self.root = root
        self.nodes: List[Tensor] = self._record(root)

    @staticmethod
    def _record(root: Tensor) -> List[Tensor]:
        order: List[Tensor] = []
        visited = set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def replay(self) -> None:
        """Run every backward rule once, newest first, then release the graph"""
        root = self.root
        if root.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {root.shape}")
        if root._released:
            raise ContractError("This graph was already differentiated; run a fresh forward pass")
        if root.requires_grad:
            root.grad += 1.0
        for node in reversed(self.nodes):
            if node._backward is not None:
                node._backward(node.grad)
        for node in self.nodes:
            if node._parents:
                node._parents = ()
                node._backward = None
                node._released = True


def backward(loss: Tensor) -> None:
    Tape(loss).replay()


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.zero_grad()
