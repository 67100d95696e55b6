"""Forward-mode automatic differentiation with first-order dual numbers.

A :class:`Dual` carries a value and a gradient vector with respect to a fixed
set of seed variables.  ``Dual2`` (two seeds, X and Y) is what the potential
code uses; the invariant Jacobians seed all 2N phase coordinates at once.
"""

from __future__ import annotations

import math
from numbers import Real

import numpy as np


class DomainError(ValueError):
    """Raised when an elementary function is evaluated outside its domain."""


class Dual:
    __slots__ = ("value", "grad")
    # make numpy scalars defer to the reflected Dual operators
    __array_ufunc__ = None

    def __init__(self, value, grad):
        self.value = float(value)
        self.grad = np.asarray(grad, dtype=float)

    @classmethod
    def seed(cls, values, index_offset: int = 0, size: int | None = None) -> list["Dual"]:
        """Independent variables ``x_i`` with unit gradients ``e_{offset+i}``."""
        values = list(values)
        size = len(values) + index_offset if size is None else size
        out = []
        for i, v in enumerate(values):
            g = np.zeros(size)
            g[index_offset + i] = 1.0
            out.append(cls(v, g))
        return out

    def _lift(self, other) -> "Dual":
        if isinstance(other, Dual):
            return other
        if isinstance(other, (Real, np.floating, np.integer)):
            return Dual(other, np.zeros_like(self.grad))
        raise TypeError(f"cannot combine Dual with {type(other).__name__}")

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.grad + other.grad)
        if isinstance(other, (Real, np.floating, np.integer)):
            return Dual(self.value + float(other), self.grad)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.value, -self.grad)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.grad - other.grad)
        if isinstance(other, (Real, np.floating, np.integer)):
            return Dual(self.value - float(other), self.grad)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value * other.value, self.value * other.grad + other.value * self.grad)
        if isinstance(other, (Real, np.floating, np.integer)):
            c = float(other)
            return Dual(self.value * c, self.grad * c)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (Real, np.floating, np.integer)):
            if other == 0:
                raise DomainError("division by zero")
            c = float(other)
            return Dual(self.value / c, self.grad / c)
        if not isinstance(other, Dual):
            return NotImplemented
        if other.value == 0.0:
            raise DomainError("division by zero")
        v = self.value / other.value
        return Dual(v, (self.grad - v * other.grad) / other.value)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("Dual supports integer powers only")
        n = int(n)
        if n == 0:
            return Dual(1.0, np.zeros_like(self.grad))
        if n < 0:
            if self.value == 0.0:
                raise DomainError("zero raised to a negative power")
            return 1.0 / self ** (-n)
        return Dual(self.value**n, n * self.value ** (n - 1) * self.grad)

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"Dual({self.value!r}, {self.grad.tolist()!r})"


def Dual2(value: float, d_x: float = 0.0, d_y: float = 0.0) -> Dual:
    """A dual number carrying partials with respect to two variables X and Y."""
    return Dual(value, (d_x, d_y))


# elementary functions, valid for both floats and Duals


def exp(x):
    if isinstance(x, Dual):
        v = math.exp(x.value)
        return Dual(v, v * x.grad)
    return math.exp(x)


def log(x):
    v = x.value if isinstance(x, Dual) else x
    if v <= 0:
        raise DomainError(f"log of non-positive value {v!r}")
    if isinstance(x, Dual):
        return Dual(math.log(v), x.grad / v)
    return math.log(v)


def sqrt(x):
    v = x.value if isinstance(x, Dual) else x
    if v < 0:
        raise DomainError(f"sqrt of negative value {v!r}")
    if isinstance(x, Dual):
        if v == 0:
            raise DomainError("sqrt is not differentiable at 0")
        r = math.sqrt(v)
        return Dual(r, x.grad / (2.0 * r))
    return math.sqrt(v)


def sin(x):
    if isinstance(x, Dual):
        return Dual(math.sin(x.value), math.cos(x.value) * x.grad)
    return math.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(math.cos(x.value), -math.sin(x.value) * x.grad)
    return math.cos(x)


def value_of(x) -> float:
    return x.value if isinstance(x, Dual) else float(x)


def gradient(f, x0) -> np.ndarray:
    """Gradient of a scalar function of a vector, by one dual evaluation."""
    x0 = np.asarray(x0, dtype=float)
    out = f(Dual.seed(x0))
    if isinstance(out, Dual):
        return out.grad.copy()
    return np.zeros_like(x0)
