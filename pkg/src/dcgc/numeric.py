"""Float64 matrix primitives and a minimal reverse-mode gradient tape.

The tape covers exactly the operations the clustering pipeline needs
(matrix products, broadcasted elementwise arithmetic, exp/log/sigmoid,
reductions, row gather). It is not a general autodiff system: everything
is 2-D-or-scalar, float64, and single-threaded per training step.

Every op accepts plain numpy arrays, scalars, or Tensor nodes. When no
argument participates in the tape the result is a plain numpy value, so
the same formulas serve both training code and untaped evaluation.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import NumericError


class Tensor:
    """A node in the gradient tape: float64 array plus backward rule.

    Leaves created with requires_grad=True act as trainable parameters;
    backward() on a scalar loss accumulates into their .grad. The tape is
    rebuilt on every forward pass, so parameter objects persist across
    steps while intermediate nodes are garbage collected.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    # make ndarray <op> Tensor defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        # iterative DFS postorder; a node may sit on the stack twice, the
        # pop-time seen check keeps the append unique and correctly ordered
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()
        # Each closure above captures its own output node, so every op
        # output sits in a reference cycle that only a full gc pass would
        # reclaim; with array payloads that lets finished graphs pile up
        # across epochs. Backward is one-shot here, so drop the edges and
        # let plain refcounting free the graph immediately.
        for node in topo:
            node._backward = None
            node._parents = ()

    # operator sugar; all delegate to the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _accumulate(node: Tensor, g):
    g = np.asarray(g, dtype=np.float64)
    if node.grad is None:
        node.grad = g.copy()
    else:
        node.grad = node.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient back down to `shape` after numpy broadcasting."""
    g = np.asarray(g, dtype=np.float64)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def _is_tensor(x) -> bool:
    return isinstance(x, Tensor)


def _as_array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _binary(a, b, fwd, grad_a, grad_b):
    if not (_is_tensor(a) or _is_tensor(b)):
        return fwd(_as_array(a), _as_array(b))
    ta = a if _is_tensor(a) else Tensor(_as_array(a))
    tb = b if _is_tensor(b) else Tensor(_as_array(b))
    out = Tensor(fwd(ta.data, tb.data))
    if ta.requires_grad or tb.requires_grad:
        out.requires_grad = True
        out._parents = tuple(p for p in (ta, tb) if p.requires_grad)

        def backward():
            g = out.grad
            if ta.requires_grad:
                _accumulate(ta, grad_a(g, ta.data, tb.data, out.data))
            if tb.requires_grad:
                _accumulate(tb, grad_b(g, ta.data, tb.data, out.data))

        out._backward = backward
    return out


def _unary(a, fwd, grad_fn):
    if not _is_tensor(a):
        return fwd(_as_array(a))
    out = Tensor(fwd(a.data))
    if a.requires_grad:
        out.requires_grad = True
        out._parents = (a,)

        def backward():
            _accumulate(a, grad_fn(out.grad, a.data, out.data))

        out._backward = backward
    return out


def add(a, b):
    return _binary(
        a, b, np.add,
        lambda g, x, y, o: _unbroadcast(g, x.shape),
        lambda g, x, y, o: _unbroadcast(g, y.shape),
    )


def sub(a, b):
    return _binary(
        a, b, np.subtract,
        lambda g, x, y, o: _unbroadcast(g, x.shape),
        lambda g, x, y, o: _unbroadcast(-g, y.shape),
    )


def mul(a, b):
    return _binary(
        a, b, np.multiply,
        lambda g, x, y, o: _unbroadcast(g * y, x.shape),
        lambda g, x, y, o: _unbroadcast(g * x, y.shape),
    )


def div(a, b):
    return _binary(
        a, b, np.divide,
        lambda g, x, y, o: _unbroadcast(g / y, x.shape),
        lambda g, x, y, o: _unbroadcast(-g * x / (y * y), y.shape),
    )


def matmul(a, b):
    return _binary(
        a, b, np.matmul,
        lambda g, x, y, o: g @ y.T,
        lambda g, x, y, o: x.T @ g,
    )


def transpose(a):
    return _unary(a, lambda x: x.T, lambda g, x, o: g.T)


def exp(a):
    return _unary(a, np.exp, lambda g, x, o: g * o)


def log(a):
    return _unary(a, np.log, lambda g, x, o: g / x)


def sqrt(a):
    return _unary(a, np.sqrt, lambda g, x, o: g * 0.5 / o)


def square(a):
    return _unary(a, np.square, lambda g, x, o: g * 2.0 * x)


def _sigmoid_fwd(x):
    # exp of a non-positive argument only, so no overflow for large |x|
    t = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))


def sigmoid(a):
    return _unary(a, _sigmoid_fwd, lambda g, x, o: g * o * (1.0 - o))


def clamp_min(a, floor: float):
    """Elementwise max(a, floor); gradient passes only where a > floor."""
    return _unary(
        a,
        lambda x: np.maximum(x, floor),
        lambda g, x, o: g * (x > floor),
    )


def reduce_sum(a, axis=None, keepdims=False):
    def fwd(x):
        return np.sum(x, axis=axis, keepdims=keepdims)

    def grad(g, x, o):
        g = np.asarray(g, dtype=np.float64)
        if axis is None:
            return np.broadcast_to(g, x.shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, x.shape).copy()

    return _unary(a, fwd, grad)


def take_rows(a, idx):
    """Row gather a[idx]; gradient scatters back with accumulation."""
    idx = np.asarray(idx, dtype=np.intp)

    def grad(g, x, o):
        full = np.zeros_like(x)
        np.add.at(full, idx, g)
        return full

    return _unary(a, lambda x: x[idx], grad)


def spmm(s, d):
    """Sparse-dense product s @ d with explicit dimension validation.

    `s` is always a constant (graph structure); gradients flow through the
    dense operand only. Deterministic: scipy CSR matvec has a fixed
    reduction order.
    """
    if not sp.issparse(s):
        raise ValueError("spmm expects a scipy sparse matrix on the left")
    dense = _as_array(d)
    if dense.ndim != 2:
        raise ValueError("spmm expects a 2-D dense operand")
    if s.shape[1] != dense.shape[0]:
        raise ValueError(
            f"spmm dimension mismatch: sparse is {s.shape}, dense is {dense.shape}"
        )
    s = s.tocsr()
    if not _is_tensor(d):
        return np.asarray(s @ dense)
    st = s.T.tocsr()
    return _unary(d, lambda x: np.asarray(s @ x), lambda g, x, o: np.asarray(st @ g))


def finite_diff_gradient(loss_fn, params, eps: float):
    """Central-difference gradient of loss_fn at params, one entry at a time.

    loss_fn takes a list of numpy arrays and returns a float. This is the
    independent oracle for every tape gradient in the package; it must not
    share code with the tape.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = [np.array(p, dtype=np.float64) for p in params]
    grads = []
    for pi in range(len(base)):
        g = np.zeros_like(base[pi])
        flat_p = base[pi].reshape(-1)
        flat_g = g.reshape(-1)
        for j in range(flat_p.size):
            orig = flat_p[j]
            flat_p[j] = orig + eps
            hi = float(loss_fn(base))
            flat_p[j] = orig - eps
            lo = float(loss_fn(base))
            flat_p[j] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NumericError(
                    f"non-finite loss probing parameter {pi} at flat index {j}"
                )
            flat_g[j] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def relative_gradient_error(tape_grads, fd_grads, floor: float = 1e-8) -> float:
    """Max elementwise |tape - fd| / max(|fd|, floor) across parameters."""
    worst = 0.0
    for gt, gf in zip(tape_grads, fd_grads):
        gt = np.asarray(gt, dtype=np.float64)
        gf = np.asarray(gf, dtype=np.float64)
        rel = np.abs(gt - gf) / np.maximum(np.abs(gf), floor)
        if rel.size:
            worst = max(worst, float(rel.max()))
    return worst
