"""Dense tensors with reverse-mode automatic differentiation.

The engine is define-by-run: every op that produces a tensor records its
parents and a backward closure on the result. Node ids are assigned from a
monotonically increasing counter, so append order is a topological order and
the backward pass simply walks reachable nodes in descending id order.
"""

import itertools
import math

import numpy as np
from scipy.special import erf

# Global switches. grad recording can be turned off for evaluation passes;
# verify mode adds finiteness assertions on every op output (used by the
# gradient-check and verification paths, too slow for training).
_GRAD_ENABLED = True
_VERIFY = False

_node_counter = itertools.count()


class ShapeError(ValueError):
    """Raised when operand shapes do not conform."""


class GradError(RuntimeError):
    """Raised on backward-pass contract violations (e.g. non-scalar loss)."""


class no_grad:
    """Context manager that disables graph recording."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def set_verify(flag):
    """Enable/disable finiteness assertions on op outputs."""
    global _VERIFY
    _VERIFY = bool(flag)


def grad_enabled():
    return _GRAD_ENABLED


class Tensor:
    """N-d array of real scalars participating in an autodiff graph.

    data is a numpy array (float32 for training, float64 for verification).
    grad is populated by backward() for tensors with requires_grad=True.
    """

    __slots__ = ("data", "grad", "requires_grad", "name",
                 "_parents", "_backward", "_nid")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None
        self._nid = next(_node_counter)

    # -- graph construction ------------------------------------------------

    @staticmethod
    def _from_op(data, parents, backward):
        if _VERIFY and not np.all(np.isfinite(data)):
            raise FloatingPointError("non-finite value produced by op")
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad or p._backward is not None
                                 for p in parents):
            out._parents = tuple(parents)
            out._backward = backward
            out.requires_grad = False
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(-1)[0])

    def astype(self, dtype):
        t = Tensor(self.data.astype(dtype), requires_grad=self.requires_grad,
                   name=self.name)
        return t

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype})"

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other, self.dtype)
        _check_broadcast(self.shape, other.shape)
        data = self.data + other.data

        def bwd(g, a=self, b=other):
            return (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
        return Tensor._from_op(data, (self, other), bwd)

    __radd__ = __add__

    def __sub__(self, other):
        other = _wrap(other, self.dtype)
        _check_broadcast(self.shape, other.shape)
        data = self.data - other.data

        def bwd(g, a=self, b=other):
            return (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))
        return Tensor._from_op(data, (self, other), bwd)

    def __neg__(self):
        def bwd(g):
            return (-g,)
        return Tensor._from_op(-self.data, (self,), bwd)

    def __mul__(self, other):
        other = _wrap(other, self.dtype)
        _check_broadcast(self.shape, other.shape)
        data = self.data * other.data

        def bwd(g, a=self, b=other):
            return (_unbroadcast(g * b.data, a.shape),
                    _unbroadcast(g * a.data, b.shape))
        return Tensor._from_op(data, (self, other), bwd)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise TypeError("tensor/tensor division is not an engine op")
        return self * (1.0 / scalar)

    def matmul(self, other):
        other = _wrap(other, self.dtype)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeError(
                f"matmul needs rank>=2 operands, got {self.shape} and "
                f"{other.shape}")
        if self.shape[-1] != other.shape[-2]:
            raise ShapeError(
                f"matmul inner dims disagree: {self.shape} vs {other.shape}")
        _check_broadcast(self.shape[:-2], other.shape[:-2])
        data = np.matmul(self.data, other.data)

        def bwd(g, a=self, b=other):
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))
        return Tensor._from_op(data, (self, other), bwd)

    __matmul__ = matmul

    # -- shape ops ---------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        data = self.data.reshape(shape)

        def bwd(g):
            return (g.reshape(old),)
        return Tensor._from_op(data, (self,), bwd)

    def transpose(self):
        """Swap the trailing two dims."""
        if self.ndim < 2:
            raise ShapeError(f"transpose needs rank>=2, got {self.shape}")
        data = np.swapaxes(self.data, -1, -2)

        def bwd(g):
            return (np.swapaxes(g, -1, -2),)
        return Tensor._from_op(data, (self,), bwd)

    def permute(self, axes):
        axes = tuple(axes)
        inv = tuple(np.argsort(axes))
        data = np.transpose(self.data, axes)

        def bwd(g):
            return (np.transpose(g, inv),)
        return Tensor._from_op(data, (self,), bwd)

    # -- reductions --------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        data = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.shape

        def bwd(g, axis=axis, keepdims=keepdims):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)
        return Tensor._from_op(data, (self,), bwd)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.size
        else:
            n = self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- nonlinear ops (fused forward/backward) ----------------------------

    def softmax(self, axis=-1):
        if not -self.ndim <= axis < self.ndim:
            raise ShapeError(f"softmax axis {axis} out of range for "
                             f"shape {self.shape}")
        x = self.data
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=axis, keepdims=True)

        def bwd(g, y=y, axis=axis):
            inner = (g * y).sum(axis=axis, keepdims=True)
            return (y * (g - inner),)
        return Tensor._from_op(y, (self,), bwd)

    def gelu(self):
        """x * Phi(x) with the exact Gaussian CDF (erf form)."""
        x = self.data
        inv_sqrt2 = 1.0 / math.sqrt(2.0)
        phi_cdf = 0.5 * (1.0 + erf(x * inv_sqrt2))
        y = x * phi_cdf

        def bwd(g, x=x, phi_cdf=phi_cdf):
            pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
            return (g * (phi_cdf + x * pdf),)
        return Tensor._from_op(y, (self,), bwd)

    def layernorm(self, gamma, beta, eps=1e-5):
        """Standardize over the last dim (biased variance), then affine."""
        d = self.shape[-1]
        if gamma.shape != (d,) or beta.shape != (d,):
            raise ShapeError(
                f"layernorm gamma/beta must have shape ({d},), got "
                f"{gamma.shape} and {beta.shape}")
        x = self.data
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = xc * inv_std
        y = xhat * gamma.data + beta.data

        def bwd(g, xhat=xhat, inv_std=inv_std, gamma=gamma, d=d):
            gg = (g * xhat).sum(axis=tuple(range(g.ndim - 1)))
            gb = g.sum(axis=tuple(range(g.ndim - 1)))
            gx_hat = g * gamma.data
            gx = inv_std / d * (
                d * gx_hat
                - gx_hat.sum(axis=-1, keepdims=True)
                - xhat * (gx_hat * xhat).sum(axis=-1, keepdims=True))
            return (gx, gg, gb)
        return Tensor._from_op(y, (self, gamma, beta), bwd)

    # -- backward ----------------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(leaf) into .grad of every reachable leaf."""
        if self.size != 1:
            raise GradError(
                f"backward requires a scalar loss, got shape {self.shape}")
        nodes = _reachable(self)
        grads = {self._nid: np.ones_like(self.data)}
        for node in sorted(nodes, key=lambda n: n._nid, reverse=True):
            g = grads.pop(node._nid, None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None:
                    continue
                acc = grads.get(parent._nid)
                grads[parent._nid] = pg if acc is None else acc + pg


def _reachable(root):
    seen = {root._nid: root}
    stack = [root]
    while stack:
        node = stack.pop()
        for p in node._parents:
            if p._nid not in seen:
                seen[p._nid] = p
                stack.append(p)
    return list(seen.values())


def _wrap(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _check_broadcast(sa, sb):
    for a, b in zip(reversed(sa), reversed(sb)):
        if a != b and a != 1 and b != 1:
            raise ShapeError(f"shapes {tuple(sa)} and {tuple(sb)} do not "
                             "broadcast")


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, (g, s) in enumerate(zip(grad.shape, shape)):
        if s == 1 and g != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad
