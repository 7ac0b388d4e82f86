"""Truncated Taylor jets in the real coordinates (x, y, t).

A jet of order K holds, for a batch of N base points, the complex Taylor
coefficients c_a of f(p + h) = sum_a c_a h^a over all multi-indices a with
|a| <= K.  Monomials are ordered by total degree first, so truncating a jet
to a lower order is a column prefix of its coefficient array.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import product
from math import comb, factorial
from typing import Callable, Union

import numpy as np

from .utils import JetOrderError

MAX_ORDER = 8
AXES = {"x": 0, "y": 1, "t": 2}

Number = Union[int, float, complex, np.ndarray]


def _build_monomials(max_order: int) -> list[tuple[int, int, int]]:
    monos = [m for m in product(range(max_order + 1), repeat=3) if sum(m) <= max_order]
    monos.sort(key=lambda m: (sum(m), tuple(-e for e in m)))
    return monos


MONOMIALS = _build_monomials(MAX_ORDER)
INDEX = {m: i for i, m in enumerate(MONOMIALS)}


def n_coefficients(order: int) -> int:
    """Number of monomials of total degree <= order in three variables."""
    return comb(order + 3, 3)


@lru_cache(maxsize=None)
def _product_table(order: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    size = n_coefficients(order)
    table = []
    for i in range(size):
        a = MONOMIALS[i]
        cols, targets = [], []
        for j in range(size):
            b = MONOMIALS[j]
            if sum(a) + sum(b) > order:
                break
            cols.append(j)
            targets.append(INDEX[(a[0] + b[0], a[1] + b[1], a[2] + b[2])])
        table.append((np.asarray(cols, dtype=np.intp), np.asarray(targets, dtype=np.intp)))
    return tuple(table)


@lru_cache(maxsize=None)
def _partial_table(order: int, axis: int) -> tuple[np.ndarray, np.ndarray]:
    # d/dx_axis of sum c_a h^a: coefficient at b is (b_axis + 1) c_{b + e_axis}
    size = n_coefficients(order - 1)
    src = np.empty(size, dtype=np.intp)
    fac = np.empty(size)
    for k in range(size):
        b = list(MONOMIALS[k])
        fac[k] = b[axis] + 1
        b[axis] += 1
        src[k] = INDEX[tuple(b)]
    return src, fac


class Jet:
    """Batch of truncated Taylor expansions sharing one order."""

    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, coef: np.ndarray, order: int):
        if order < 0:
            raise JetOrderError("jet order exhausted: a derivative needs more Taylor coefficients")
        if order > MAX_ORDER:
            raise JetOrderError(f"jet order {order} exceeds the supported maximum {MAX_ORDER}")
        self.coef = coef
        self.order = order

    # construction -----------------------------------------------------

    @classmethod
    def constant(cls, value: Number, n: int, order: int) -> "Jet":
        coef = np.zeros((n, n_coefficients(order)), dtype=complex)
        coef[:, 0] = value
        return cls(coef, order)

    @classmethod
    def variable(cls, values: np.ndarray, axis: str, order: int) -> "Jet":
        values = np.asarray(values, dtype=float)
        jet = cls.constant(values, values.shape[0], order)
        if order >= 1:
            e = [0, 0, 0]
            e[AXES[axis]] = 1
            jet.coef[:, INDEX[tuple(e)]] = 1.0
        return jet

    # basic accessors --------------------------------------------------

    @property
    def n(self) -> int:
        return self.coef.shape[0]

    @property
    def value(self) -> np.ndarray:
        return self.coef[:, 0]

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise JetOrderError(f"cannot raise a jet of order {self.order} to {order}")
        return Jet(self.coef[:, : n_coefficients(order)], order)

    def derivative(self, alpha: tuple[int, int, int]) -> np.ndarray:
        """Plain partial derivative d^alpha f at the base points."""
        if sum(alpha) > self.order:
            raise JetOrderError(f"derivative of degree {sum(alpha)} from a jet of order {self.order}")
        scale = factorial(alpha[0]) * factorial(alpha[1]) * factorial(alpha[2])
        return scale * self.coef[:, INDEX[tuple(alpha)]]

    def partial(self, axis: str) -> "Jet":
        if self.order == 0:
            raise JetOrderError("cannot differentiate a jet of order 0")
        src, fac = _partial_table(self.order, AXES[axis])
        return Jet(self.coef[:, src] * fac, self.order - 1)

    def conj(self) -> "Jet":
        return Jet(np.conj(self.coef), self.order)

    @property
    def real(self) -> "Jet":
        return Jet(self.coef.real.astype(complex), self.order)

    @property
    def imag(self) -> "Jet":
        return Jet(self.coef.imag.astype(complex), self.order)

    # arithmetic -------------------------------------------------------

    def _align(self, other: "Jet") -> tuple["Jet", "Jet"]:
        order = min(self.order, other.order)
        return self.truncate(order), other.truncate(order)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.coef + b.coef, a.order)
        coef = self.coef.copy()
        coef[:, 0] += other
        return Jet(coef, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coef, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(_multiply(a.coef, b.coef, a.order), a.order)
        other = np.asarray(other)
        if other.ndim == 1:
            other = other[:, None]
        return Jet(self.coef * other, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = np.asarray(other)
        if other.ndim == 1:
            other = other[:, None]
        return Jet(self.coef / other, self.order)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and 0 <= p <= 4:
            out = Jet.constant(1.0, self.n, self.order)
            for _ in range(int(p)):
                out = out * self
            return out
        return power(self, p)

    def reciprocal(self) -> "Jet":
        return power(self, -1)

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, n={self.n})"


def _multiply(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    out = np.zeros_like(a, dtype=complex)
    for i, (cols, targets) in enumerate(_product_table(order)):
        out[:, targets] += a[:, i : i + 1] * b[:, cols]
    return out


def compose(f: Jet, taylor: Callable[[np.ndarray, int], list[np.ndarray]]) -> Jet:
    """g(f) from the normalised derivatives g^(n)(f0)/n!, n = 0..K, of g at the base values."""
    coeffs = taylor(f.value, f.order)
    h = Jet(f.coef.copy(), f.order)
    h.coef[:, 0] = 0.0
    out = Jet.constant(coeffs[f.order], f.n, f.order)
    for n in range(f.order - 1, -1, -1):
        out = out * h + coeffs[n]
    return out


def exp(f: Jet) -> Jet:
    return compose(f, lambda v, k: [np.exp(v) / factorial(n) for n in range(k + 1)])


def log(f: Jet) -> Jet:
    """Principal complex logarithm."""

    def taylor(v, k):
        out = [np.log(v.astype(complex))]
        for n in range(1, k + 1):
            out.append((-1) ** (n - 1) / (n * v**n))
        return out

    return compose(f, taylor)


def power(f: Jet, p: float | complex) -> Jet:
    """Principal power f**p."""

    def taylor(v, k):
        v = v.astype(complex)
        out = []
        coef = 1.0
        for n in range(k + 1):
            out.append(coef * v ** (p - n))
            coef = coef * (p - n) / (n + 1)
        return out

    return compose(f, taylor)


def sqrt(f: Jet) -> Jet:
    return power(f, 0.5)


def smooth_step(f: Jet) -> Jet:
    """C-infinity step of a real jet: 0 for f <= 0, 1 for f >= 1, flat to all orders at both ends."""
    x = f.value.real
    # exp(-1/x) is below double precision within 1e-3 of either end
    inside = (x > 1e-3) & (x < 1.0 - 1e-3)
    safe = Jet(f.coef.copy(), f.order)
    safe.coef[~inside, 0] = 0.5
    a = exp(-safe.reciprocal())
    b = exp(-(1.0 - safe).reciprocal())
    coef = (a / (a + b)).coef
    coef[~inside] = 0.0
    coef[x >= 1.0 - 1e-3, 0] = 1.0
    return Jet(coef, f.order)


def sin(f: Jet) -> Jet:
    def taylor(v, k):
        cyc = [np.sin(v), np.cos(v), -np.sin(v), -np.cos(v)]
        return [cyc[n % 4] / factorial(n) for n in range(k + 1)]

    return compose(f, taylor)


def cos(f: Jet) -> Jet:
    def taylor(v, k):
        cyc = [np.cos(v), -np.sin(v), -np.cos(v), np.sin(v)]
        return [cyc[n % 4] / factorial(n) for n in range(k + 1)]

    return compose(f, taylor)
