"""Truncated second-order Taylor arithmetic for array-valued quantities.

A :class:`TaylorArray` carries a value together with its first and second
partial derivatives with respect to a fixed set of variables.  Derivative axes
are always trailing: ``d1[..., a]`` is the derivative along variable ``a`` and
``d2[..., a, b]`` the mixed second derivative.  Arithmetic follows the Leibniz
and chain rules and is truncated at the lowest order among the operands.

The class speaks enough of the numpy protocol (ufuncs, indexing, ``einsum``)
that closures written with ``np.sin`` and friends can be evaluated on seeded
variables to obtain exact derivatives.
"""

from __future__ import annotations

import functools
import string

import numpy as np

__all__ = [
    "TaylorArray",
    "seed",
    "constant",
    "stack",
    "einsum",
    "inv",
    "compose",
    "value",
    "as_taylor",
]


class TaylorArray:
    __array_priority__ = 1000

    def __init__(self, val, d1=None, d2=None, nvars=None):
        self.val = np.asarray(val, dtype=float)
        self.d1 = None if d1 is None else np.asarray(d1, dtype=float)
        self.d2 = None if d2 is None else np.asarray(d2, dtype=float)
        if self.d2 is not None and self.d1 is None:
            raise ValueError("second derivative given without first")
        if self.d1 is not None:
            nvars = self.d1.shape[-1]
        if nvars is None:
            raise ValueError("nvars required for an order-0 TaylorArray")
        self.nvars = int(nvars)

    @property
    def order(self) -> int:
        if self.d1 is None:
            return 0
        return 1 if self.d2 is None else 2

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    def __len__(self):
        return len(self.val)

    def __repr__(self):
        return f"TaylorArray(order={self.order}, nvars={self.nvars}, val={self.val!r})"

    # ------------------------------------------------------------------ shape

    def truncate(self, order: int) -> "TaylorArray":
        if order >= self.order:
            return self
        return TaylorArray(
            self.val,
            self.d1 if order >= 1 else None,
            self.d2 if order >= 2 else None,
            nvars=self.nvars,
        )

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis or i is None for i in idx):
            raise IndexError("TaylorArray indexing supports leading-axis ints and slices only")
        return TaylorArray(
            self.val[idx],
            None if self.d1 is None else self.d1[idx],
            None if self.d2 is None else self.d2[idx],
            nvars=self.nvars,
        )

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        nd = self.ndim
        return TaylorArray(
            self.val.transpose(axes),
            None if self.d1 is None else self.d1.transpose(axes + (nd,)),
            None if self.d2 is None else self.d2.transpose(axes + (nd, nd + 1)),
            nvars=self.nvars,
        )

    @property
    def T(self):
        return self.transpose()

    def derivative(self) -> "TaylorArray":
        """Gradient as a field: value ``d1`` (new trailing axis), one order lower."""
        if self.d1 is None:
            raise ValueError("order-0 TaylorArray has no derivative")
        return TaylorArray(self.d1, self.d2, None, nvars=self.nvars)

    def restrict(self, idx) -> "TaylorArray":
        """Keep only the derivative variables listed in ``idx``."""
        idx = np.asarray(idx)
        d1 = None if self.d1 is None else self.d1[..., idx]
        d2 = None if self.d2 is None else self.d2[..., idx[:, None], idx[None, :]]
        return TaylorArray(self.val, d1, d2, nvars=len(idx))

    # ------------------------------------------------------------ arithmetic

    def _like(self, other) -> "TaylorArray":
        if isinstance(other, TaylorArray):
            if other.nvars != self.nvars:
                raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
            return other
        return None

    def __add__(self, other):
        o = self._like(other)
        if o is None:
            val = self.val + np.asarray(other, float)
            return TaylorArray(val, _bcast(self.d1, val.shape, 1), _bcast(self.d2, val.shape, 2), self.nvars)
        order = min(self.order, o.order)
        val = self.val + o.val
        d1 = self.d1 + o.d1 if order >= 1 else None
        d2 = self.d2 + o.d2 if order >= 2 else None
        return TaylorArray(val, _bcast(d1, val.shape, 1), _bcast(d2, val.shape, 2), self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return TaylorArray(
            -self.val,
            None if self.d1 is None else -self.d1,
            None if self.d2 is None else -self.d2,
            self.nvars,
        )

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._like(other)
        if o is None:
            c = np.asarray(other, float)
            val = self.val * c
            d1 = None if self.d1 is None else _bcast(self.d1 * c[..., None], val.shape, 1)
            d2 = None if self.d2 is None else _bcast(self.d2 * c[..., None, None], val.shape, 2)
            return TaylorArray(val, d1, d2, self.nvars)
        order = min(self.order, o.order)
        a, b = self, o
        val = a.val * b.val
        d1 = d2 = None
        if order >= 1:
            d1 = a.d1 * b.val[..., None] + a.val[..., None] * b.d1
        if order >= 2:
            cross = a.d1[..., :, None] * b.d1[..., None, :]
            d2 = (
                a.d2 * b.val[..., None, None]
                + cross
                + np.swapaxes(cross, -1, -2)
                + a.val[..., None, None] * b.d2
            )
        return TaylorArray(val, _bcast(d1, val.shape, 1), _bcast(d2, val.shape, 2), self.nvars)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorArray):
            return self * reciprocal(other)
        return self * (1.0 / np.asarray(other, float))

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, TaylorArray):
            return exp(p * log(self))
        p = float(p)
        x = self.val
        f0 = x**p
        f1 = p * x ** (p - 1) if p != 0 else np.zeros_like(x)
        f2 = p * (p - 1) * x ** (p - 2) if p * (p - 1) != 0 else np.zeros_like(x)
        return _unary(self, f0, f1, f2)

    def __rpow__(self, base):
        return exp(self * np.log(np.asarray(base, float)))

    # -------------------------------------------------------- numpy protocol

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        binary = {
            np.add: lambda a, b: _as_left(a, b, "__add__", "__radd__"),
            np.subtract: lambda a, b: _as_left(a, b, "__sub__", "__rsub__"),
            np.multiply: lambda a, b: _as_left(a, b, "__mul__", "__rmul__"),
            np.true_divide: lambda a, b: _as_left(a, b, "__truediv__", "__rtruediv__"),
            np.power: lambda a, b: _as_left(a, b, "__pow__", "__rpow__"),
        }
        if ufunc in binary:
            return binary[ufunc](*inputs)
        unary = {
            np.negative: lambda a: -a,
            np.positive: lambda a: a,
            np.sin: sin,
            np.cos: cos,
            np.tan: tan,
            np.exp: exp,
            np.log: log,
            np.sqrt: sqrt,
            np.sinh: sinh,
            np.cosh: cosh,
            np.tanh: tanh,
            np.arctan: arctan,
            np.square: lambda a: a * a,
            np.reciprocal: reciprocal,
        }
        if ufunc in unary:
            return unary[ufunc](inputs[0])
        return NotImplemented


def _as_left(a, b, left, right):
    if isinstance(a, TaylorArray):
        return getattr(a, left)(b)
    return getattr(b, right)(a)


def _bcast(d, shape, k):
    if d is None:
        return None
    target = tuple(shape) + d.shape[d.ndim - k:]
    if d.shape == target:
        return d
    return np.broadcast_to(d, target).copy()


def _unary(a: TaylorArray, f0, f1, f2) -> TaylorArray:
    """Chain rule for an elementwise function given its value and two derivatives."""
    d1 = d2 = None
    if a.order >= 1:
        d1 = f1[..., None] * a.d1
    if a.order >= 2:
        d2 = f2[..., None, None] * a.d1[..., :, None] * a.d1[..., None, :] + f1[..., None, None] * a.d2
    return TaylorArray(f0, d1, d2, a.nvars)


def sin(a):
    if not isinstance(a, TaylorArray):
        return np.sin(a)
    s, c = np.sin(a.val), np.cos(a.val)
    return _unary(a, s, c, -s)


def cos(a):
    if not isinstance(a, TaylorArray):
        return np.cos(a)
    s, c = np.sin(a.val), np.cos(a.val)
    return _unary(a, c, -s, -c)


def tan(a):
    if not isinstance(a, TaylorArray):
        return np.tan(a)
    t = np.tan(a.val)
    sec2 = 1.0 + t * t
    return _unary(a, t, sec2, 2.0 * t * sec2)


def exp(a):
    if not isinstance(a, TaylorArray):
        return np.exp(a)
    e = np.exp(a.val)
    return _unary(a, e, e, e)


def log(a):
    if not isinstance(a, TaylorArray):
        return np.log(a)
    x = a.val
    return _unary(a, np.log(x), 1.0 / x, -1.0 / (x * x))


def sqrt(a):
    if not isinstance(a, TaylorArray):
        return np.sqrt(a)
    r = np.sqrt(a.val)
    return _unary(a, r, 0.5 / r, -0.25 / (r * a.val))


def sinh(a):
    if not isinstance(a, TaylorArray):
        return np.sinh(a)
    s, c = np.sinh(a.val), np.cosh(a.val)
    return _unary(a, s, c, s)


def cosh(a):
    if not isinstance(a, TaylorArray):
        return np.cosh(a)
    s, c = np.sinh(a.val), np.cosh(a.val)
    return _unary(a, c, s, c)


def tanh(a):
    if not isinstance(a, TaylorArray):
        return np.tanh(a)
    t = np.tanh(a.val)
    s2 = 1.0 - t * t
    return _unary(a, t, s2, -2.0 * t * s2)


def arctan(a):
    if not isinstance(a, TaylorArray):
        return np.arctan(a)
    x = a.val
    q = 1.0 / (1.0 + x * x)
    return _unary(a, np.arctan(x), q, -2.0 * x * q * q)


def reciprocal(a):
    if not isinstance(a, TaylorArray):
        return 1.0 / np.asarray(a, float)
    x = a.val
    r = 1.0 / x
    return _unary(a, r, -r * r, 2.0 * r * r * r)


# ------------------------------------------------------------- constructors


def seed(x, order: int = 2) -> TaylorArray:
    """Independent variables at ``x``: identity first derivative, zero second."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    d1 = np.eye(n) if order >= 1 else None
    d2 = np.zeros((n, n, n)) if order >= 2 else None
    return TaylorArray(x.copy(), d1, d2, nvars=n)


def constant(val, nvars: int, order: int = 2) -> TaylorArray:
    val = np.asarray(val, dtype=float)
    d1 = np.zeros(val.shape + (nvars,)) if order >= 1 else None
    d2 = np.zeros(val.shape + (nvars, nvars)) if order >= 2 else None
    return TaylorArray(val, d1, d2, nvars=nvars)


def value(a):
    return a.val if isinstance(a, TaylorArray) else np.asarray(a, dtype=float)


def as_taylor(a, nvars: int, order: int) -> TaylorArray:
    if isinstance(a, TaylorArray):
        return a
    return constant(a, nvars, order)


def _leaves(obj, out):
    if isinstance(obj, (list, tuple)):
        for o in obj:
            _leaves(o, out)
    else:
        out.append(obj)


def stack(nested):
    """Assemble a nested list of scalars / TaylorArrays into one TaylorArray.

    Returns a plain ndarray when no leaf carries derivatives.
    """
    if isinstance(nested, TaylorArray):
        return nested
    leaves = []
    _leaves(nested, leaves)
    jets = [leaf for leaf in leaves if isinstance(leaf, TaylorArray)]
    if not jets:
        return np.asarray(nested, dtype=float)
    nvars = jets[0].nvars
    order = min(j.order for j in jets)

    def build(obj):
        if isinstance(obj, (list, tuple)):
            parts = [build(o) for o in obj]
            return TaylorArray(
                np.stack([p.val for p in parts]),
                np.stack([p.d1 for p in parts]) if order >= 1 else None,
                np.stack([p.d2 for p in parts]) if order >= 2 else None,
                nvars=nvars,
            )
        return as_taylor(obj, nvars, order).truncate(order)

    return build(nested)


# ---------------------------------------------------------------- algebra


@functools.lru_cache(maxsize=4096)
def _leibniz_specs(subscripts: str, live: tuple[int, ...]):
    """Subscripts for the first- and second-order Leibniz terms of an einsum."""
    lhs, out = subscripts.replace(" ", "").split("->")
    ins = lhs.split(",")
    free = [c for c in string.ascii_letters if c not in subscripts]
    p, q = free[0], free[1]

    def spec(tags, tail):
        return ",".join(s + tags.get(j, "") for j, s in enumerate(ins)) + "->" + out + tail

    first = tuple((i, spec({i: p}, p)) for i in live)
    second = tuple((i, spec({i: p + q}, p + q)) for i in live)
    mixed = tuple((i, k, spec({i: p, k: q}, p + q)) for i in live for k in live if i < k)
    return first, second, mixed


def einsum(subscripts: str, *operands):
    """``np.einsum`` with the Leibniz rule applied to TaylorArray operands."""
    jets = [o for o in operands if isinstance(o, TaylorArray)]
    if not jets:
        return np.einsum(subscripts, *operands)
    nvars = jets[0].nvars
    if any(j.nvars != nvars for j in jets):
        raise ValueError("variable count mismatch in einsum")
    order = min(j.order for j in jets)
    vals = [value(o) for o in operands]
    val = np.einsum(subscripts, *vals)
    if order == 0:
        return TaylorArray(val, nvars=nvars)
    live = tuple(i for i, o in enumerate(operands) if isinstance(o, TaylorArray))
    first, second, mixed = _leibniz_specs(subscripts, live)

    d1 = np.zeros(val.shape + (nvars,))
    for i, spec in first:
        args = list(vals)
        args[i] = operands[i].d1
        d1 += np.einsum(spec, *args)
    d2 = None
    if order >= 2:
        d2 = np.zeros(val.shape + (nvars, nvars))
        for i, spec in second:
            args = list(vals)
            args[i] = operands[i].d2
            d2 += np.einsum(spec, *args)
        for i, k, spec in mixed:
            args = list(vals)
            args[i] = operands[i].d1
            args[k] = operands[k].d1
            t = np.einsum(spec, *args)
            d2 += t + np.swapaxes(t, -1, -2)
    return TaylorArray(val, d1, d2, nvars=nvars)


def inv(a):
    """Matrix inverse with derivatives: d(A^-1) = -A^-1 dA A^-1."""
    if not isinstance(a, TaylorArray):
        return np.linalg.inv(a)
    ai = np.linalg.inv(a.val)
    d1 = d2 = None
    if a.order >= 1:
        d1 = -np.einsum("ij,jkY,kl->ilY", ai, a.d1, ai)
    if a.order >= 2:
        t = np.einsum("ijY,jk,klZ->ilYZ", a.d1, ai, a.d1)
        d2 = np.einsum("ij,jkYZ,kl->ilYZ", ai, t + np.swapaxes(t, -1, -2) - a.d2, ai)
    return TaylorArray(ai, d1, d2, nvars=a.nvars)


def compose(outer: TaylorArray, inner: TaylorArray) -> TaylorArray:
    """Chain rule: ``outer`` is a jet in x at ``inner.val``; ``inner`` is x(s)."""
    if not isinstance(inner, TaylorArray):
        return outer
    order = min(outer.order, inner.order)
    d1 = d2 = None
    if order >= 1:
        d1 = np.einsum("...a,aS->...S", outer.d1, inner.d1)
    if order >= 2:
        d2 = np.einsum("...ab,aS,bT->...ST", outer.d2, inner.d1, inner.d1) + np.einsum(
            "...a,aST->...ST", outer.d1, inner.d2
        )
    return TaylorArray(outer.val, d1, d2, nvars=inner.nvars)
