"""Truncated power series in t with array-valued coefficients.

``Taylor(c)`` stores c[k] = (d/dt)^k u(0) / k!.  Elementary functions act
through the numpy ufunc protocol, so model code written with ``np.exp``,
``np.sin`` and plain arithmetic runs unchanged on series.
"""

from __future__ import annotations

from math import factorial

import numpy as np


class Taylor:
    __array_priority__ = 1000

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def from_derivatives(cls, derivs) -> "Taylor":
        return cls(np.stack([np.asarray(d, dtype=float) / factorial(k) for k, d in enumerate(derivs)]))

    @classmethod
    def constant(cls, value, order: int, shape=()) -> "Taylor":
        v = np.broadcast_to(np.asarray(value, dtype=float), shape)
        c = np.zeros((order,) + v.shape)
        c[0] = v
        return cls(c)

    @property
    def order(self) -> int:
        return self.c.shape[0]

    def derivative(self, k: int) -> np.ndarray:
        """The k-th time derivative at t = 0."""
        return self.c[k] * factorial(k)

    def derivatives(self) -> list[np.ndarray]:
        return [self.derivative(k) for k in range(self.order)]

    def dt(self) -> "Taylor":
        out = np.zeros_like(self.c)
        k = np.arange(1, self.order).reshape((-1,) + (1,) * (self.c.ndim - 1))
        out[:-1] = self.c[1:] * k
        return Taylor(out)

    def map_coeffs(self, fn) -> "Taylor":
        return Taylor(np.stack([fn(x) for x in self.c]))

    def __call__(self, t: float) -> np.ndarray:
        out = np.zeros_like(self.c[0])
        for k in range(self.order - 1, -1, -1):
            out = out * t + self.c[k]
        return out

    def __repr__(self) -> str:
        return f"Taylor(order={self.order}, shape={self.c.shape[1:]})"

    # arithmetic -----------------------------------------------------------

    def _lift(self, other) -> "Taylor":
        if isinstance(other, Taylor):
            return other
        v = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(v.shape, self.c.shape[1:])
        return Taylor.constant(v, self.order, shape)

    def __add__(self, other):
        o = self._lift(other)
        return Taylor(self.c + o.c)

    __radd__ = __add__

    def __sub__(self, other):
        return Taylor(self.c - self._lift(other).c)

    def __rsub__(self, other):
        return Taylor(self._lift(other).c - self.c)

    def __neg__(self):
        return Taylor(-self.c)

    def __mul__(self, other):
        if not isinstance(other, Taylor):
            v = np.asarray(other, dtype=float)
            return Taylor(self.c * v[None])
        return Taylor(_cauchy(self.c, other.c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Taylor):
            return Taylor(self.c / np.asarray(other, dtype=float)[None])
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = Taylor.constant(1.0, self.order, self.c.shape[1:])
            for _ in range(int(p)):
                out = out * self
            return out
        return np.exp(np.log(self) * p)

    def reciprocal(self) -> "Taylor":
        a = self.c
        r = np.zeros_like(a)
        r[0] = 1.0 / a[0]
        for k in range(1, self.order):
            acc = np.zeros_like(a[0])
            for i in range(1, k + 1):
                acc = acc + a[i] * r[k - i]
            r[k] = -acc / a[0]
        return Taylor(r)

    # ufuncs ---------------------------------------------------------------

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        binary = {
            np.add: lambda a, b: a + b,
            np.subtract: lambda a, b: a - b,
            np.multiply: lambda a, b: a * b,
            np.true_divide: lambda a, b: a / b,
            np.power: lambda a, b: a**b,
        }
        if ufunc in binary:
            a, b = inputs
            if not isinstance(a, Taylor):
                a = b._lift(a)
            return binary[ufunc](a, b)
        unary = {
            np.negative: lambda x: -x,
            np.exp: _exp,
            np.sin: lambda x: _sincos(x)[0],
            np.cos: lambda x: _sincos(x)[1],
            np.log: _log,
            np.sqrt: lambda x: _exp(_log(x) * 0.5),
            np.square: lambda x: x * x,
        }
        if ufunc in unary:
            return unary[ufunc](inputs[0])
        return NotImplemented


def _cauchy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    K = min(a.shape[0], b.shape[0])
    shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    out = np.zeros((K,) + shape)
    for k in range(K):
        acc = np.zeros(shape)
        for i in range(k + 1):
            acc = acc + a[i] * b[k - i]
        out[k] = acc
    return out


def _exp(x: Taylor) -> Taylor:
    a = x.c
    e = np.zeros_like(a)
    e[0] = np.exp(a[0])
    for k in range(1, x.order):
        acc = np.zeros_like(a[0])
        for i in range(1, k + 1):
            acc = acc + i * a[i] * e[k - i]
        e[k] = acc / k
    return Taylor(e)


def _log(x: Taylor) -> Taylor:
    a = x.c
    out = np.zeros_like(a)
    out[0] = np.log(a[0])
    for k in range(1, x.order):
        acc = np.zeros_like(a[0])
        for i in range(1, k):
            acc = acc + i * out[i] * a[k - i]
        out[k] = (a[k] - acc / k) / a[0]
    return Taylor(out)


def _sincos(x: Taylor) -> tuple[Taylor, Taylor]:
    a = x.c
    s = np.zeros_like(a)
    c = np.zeros_like(a)
    s[0], c[0] = np.sin(a[0]), np.cos(a[0])
    for k in range(1, x.order):
        acc_s = np.zeros_like(a[0])
        acc_c = np.zeros_like(a[0])
        for i in range(1, k + 1):
            acc_s = acc_s + i * a[i] * c[k - i]
            acc_c = acc_c + i * a[i] * s[k - i]
        s[k] = acc_s / k
        c[k] = -acc_c / k
    return Taylor(s), Taylor(c)


def as_series(x, order: int, shape) -> Taylor:
    return x if isinstance(x, Taylor) else Taylor.constant(x, order, shape)
