"""Forward-mode automatic differentiation with vector-tangent dual numbers.

A :class:`Dual` carries a float value together with the full gradient row with
respect to the seed coordinates, so one evaluation of a closure on a seeded
state yields the exact Jacobian row by row.  Closures stay ordinary Python:
they receive an object ndarray of duals and may use ``+ - * / **``, ``abs``,
``np.sqrt`` / ``np.sin`` / ``np.cos`` / ``np.exp`` / ``np.log`` (numpy
dispatches these to the methods below on object arrays) and the module-level
:func:`sign`.

Analytic derivatives are preferred wherever they exist; this module is the
fallback for user closures and for differentiating through the linear solve
of the feedback synthesis.  Central finite differences are deliberately not
provided here: they belong to test oracles.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["Dual", "sign", "value", "seed_state", "gradient", "jacobian"]


class Dual:
    """Value plus gradient row; supports nesting (grad entries may be Duals)."""

    __slots__ = ("val", "grad")

    def __init__(self, val, grad):
        self.val = val
        self.grad = grad

    def __repr__(self):
        return f"Dual({self.val!r}, {self.grad!r})"

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.grad + other.grad)
        return Dual(self.val + other, self.grad)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.grad - other.grad)
        return Dual(self.val - other, self.grad)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.grad)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.val * other.grad + other.val * self.grad)
        return Dual(self.val * other, self.grad * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(self.val * inv,
                        (self.grad - (self.val * inv) * other.grad) * inv)
        return Dual(self.val / other, self.grad / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        return Dual(other * inv, (-other * inv * inv) * self.grad)

    def __neg__(self):
        return Dual(-self.val, -self.grad)

    def __pos__(self):
        return self

    def __pow__(self, c):
        if isinstance(c, Dual):
            raise TypeError("dual exponents are not supported")
        if c == 1:
            return Dual(self.val, self.grad)
        if self.val == 0.0:
            # limit of c*v**(c-1) as v -> 0; undefined below exponent 1
            if c > 1:
                return Dual(0.0, 0.0 * self.grad)
            return Dual(0.0, math.nan * self.grad)
        return Dual(self.val ** c, (c * self.val ** (c - 1)) * self.grad)

    def __abs__(self):
        s = 1.0 if self.val > 0 else (-1.0 if self.val < 0 else 0.0)
        return Dual(abs(self.val), s * self.grad)

    # comparisons act on the value (used for pivoting and np.sign) ----------
    def __lt__(self, other):
        return self.val < (other.val if isinstance(other, Dual) else other)

    def __le__(self, other):
        return self.val <= (other.val if isinstance(other, Dual) else other)

    def __gt__(self, other):
        return self.val > (other.val if isinstance(other, Dual) else other)

    def __ge__(self, other):
        return self.val >= (other.val if isinstance(other, Dual) else other)

    def __eq__(self, other):
        return self.val == (other.val if isinstance(other, Dual) else other)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    # elementary functions (numpy calls these by name on object arrays) -----
    def sqrt(self):
        if self.val == 0.0:
            # meaningful only when the tangent also vanishes (kink convention)
            return Dual(0.0, 0.0 * self.grad)
        r = math.sqrt(self.val)
        return Dual(r, (0.5 / r) * self.grad)

    def sin(self):
        return Dual(math.sin(self.val), math.cos(self.val) * self.grad)

    def cos(self):
        return Dual(math.cos(self.val), -math.sin(self.val) * self.grad)

    def exp(self):
        e = math.exp(self.val)
        return Dual(e, e * self.grad)

    def log(self):
        return Dual(math.log(self.val), self.grad / self.val)


def sign(x):
    """Sign with sign(0) = 0; works on floats, duals and ndarrays.

    The derivative of the sign is taken as zero everywhere, so the result is
    always a plain float (or float array).
    """
    if isinstance(x, Dual):
        return 1.0 if x.val > 0 else (-1.0 if x.val < 0 else 0.0)
    if isinstance(x, np.ndarray) and x.dtype == object:
        return np.array([sign(e) for e in x])
    return np.sign(x)


def value(x):
    """Strip dual parts: float for Dual input, float ndarray for object arrays."""
    if isinstance(x, Dual):
        return x.val
    if isinstance(x, np.ndarray) and x.dtype == object:
        return np.array([value(e) for e in x], dtype=float)
    return x


def seed_state(x):
    """Object ndarray of duals with identity tangents for the point ``x``."""
    x = np.asarray(x)
    n = x.shape[0]
    out = np.empty(n, dtype=object)
    for i in range(n):
        g = np.zeros(n)
        g[i] = 1.0
        out[i] = Dual(float(x[i]) if x.dtype != object else x[i], g)
    return out


def gradient(f, x):
    """Value and gradient of a scalar-valued closure at ``x``.

    Returns ``(f(x), grad)`` with ``grad`` of shape ``(n,)``.  If ``f`` turns
    out to be locally constant (returns a plain float) the gradient is zero.
    """
    x = np.asarray(x, dtype=float)
    r = f(seed_state(x))
    if isinstance(r, Dual):
        return r.val, np.asarray(r.grad, dtype=float)
    return float(r), np.zeros(x.shape[0])


def jacobian(f, x):
    """Value and Jacobian of a vector-valued closure at ``x``.

    Returns ``(f(x), J)`` with ``J[k, i] = d f_k / d x_i``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    r = f(seed_state(x))
    vals = np.empty(len(r))
    jac = np.zeros((len(r), n))
    for k, e in enumerate(r):
        if isinstance(e, Dual):
            vals[k] = e.val
            jac[k] = e.grad
        else:
            vals[k] = e
    return vals, jac
