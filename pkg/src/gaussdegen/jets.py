"""Truncated multivariate Taylor expansions (jets) and exact rationals.

A jet stores the Taylor coefficients ``f_alpha = d^alpha f / alpha!`` of a
function at a point, for every multi-index with ``|alpha| <= order``.  The
coefficient array has the multi-index axis first; any trailing axes are a
batch of independent expansion points, which lets a whole sample grid be
differentiated in one pass.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

MAX_ORDER_MULTIVARIATE = 3
MAX_ORDER_UNIVARIATE = 4


class JetError(ValueError):
    pass


def to_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or float.

    Floats go through their shortest repr, so ``0.1`` becomes ``1/10``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        return Fraction(repr(float(value)))
    return Fraction(str(value).strip())


@lru_cache(maxsize=None)
def multi_indices(order: int, nvars: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of total degree <= order, graded then reverse-lex."""
    out = []
    for deg in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), deg):
            alpha = [0] * nvars
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return tuple(out)


@lru_cache(maxsize=None)
def _index_of(order: int, nvars: int) -> dict:
    return {alpha: k for k, alpha in enumerate(multi_indices(order, nvars))}


@lru_cache(maxsize=None)
def _mul_pairs(order: int, nvars: int):
    """Index pairs (i, j) with alpha_i + alpha_j in range, and the 0/1 matrix summing them into k."""
    idx = multi_indices(order, nvars)
    pos = _index_of(order, nvars)
    I, J, K = [], [], []
    for i, a in enumerate(idx):
        for j, b in enumerate(idx):
            k = pos.get(tuple(x + y for x, y in zip(a, b)))
            if k is not None:
                I.append(i)
                J.append(j)
                K.append(k)
    S = np.zeros((len(idx), len(K)))
    S[K, np.arange(len(K))] = 1.0
    return np.array(I), np.array(J), S


def _check_order(order: int, nvars: int) -> None:
    if nvars < 1:
        raise JetError("nvars must be >= 1")
    limit = MAX_ORDER_UNIVARIATE if nvars == 1 else MAX_ORDER_MULTIVARIATE
    if not 0 <= order <= limit:
        raise JetError(f"jet order {order} not supported for {nvars} variable(s) (max {limit})")


class Jet:
    """Truncated Taylor series in ``nvars`` variables up to total degree ``order``.

    Jets are immutable; every operation returns a new jet.
    """

    __slots__ = ("order", "nvars", "coeffs")

    def __init__(self, order: int, nvars: int, coeffs):
        _check_order(order, nvars)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != len(multi_indices(order, nvars)):
            raise JetError("coefficient table has the wrong length")
        coeffs.setflags(write=False)
        self.order = order
        self.nvars = nvars
        self.coeffs = coeffs

    # construction -----------------------------------------------------

    @classmethod
    def constant(cls, value, order: int, nvars: int, batch_shape=()) -> "Jet":
        m = len(multi_indices(order, nvars))
        c = np.zeros((m,) + tuple(batch_shape))
        c[0] = value
        return cls(order, nvars, c)

    @classmethod
    def variable(cls, value, index: int, order: int, nvars: int) -> "Jet":
        """Jet of the coordinate function ``t_index`` expanded at ``value``."""
        value = np.asarray(value, dtype=float)
        m = len(multi_indices(order, nvars))
        c = np.zeros((m,) + value.shape)
        c[0] = value
        if order >= 1:
            alpha = [0] * nvars
            alpha[index] = 1
            c[_index_of(order, nvars)[tuple(alpha)]] = 1.0
        return cls(order, nvars, c)

    @classmethod
    def from_dict(cls, order: int, nvars: int, coeffs: dict) -> "Jet":
        c = np.zeros(len(multi_indices(order, nvars)))
        pos = _index_of(order, nvars)
        for alpha, v in coeffs.items():
            c[pos[tuple(alpha)]] = v
        return cls(order, nvars, c)

    # access -----------------------------------------------------------

    @property
    def batch_shape(self) -> tuple:
        return self.coeffs.shape[1:]

    @property
    def value(self):
        return self.coeffs[0]

    def coeff(self, alpha):
        alpha = tuple(alpha)
        if len(alpha) != self.nvars or sum(alpha) > self.order or min(alpha) < 0:
            raise JetError(f"multi-index {alpha} out of range")
        return self.coeffs[_index_of(self.order, self.nvars)[alpha]]

    def partial(self, alpha):
        """True partial derivative ``d^alpha f`` at the expansion point."""
        factor = math.prod(math.factorial(a) for a in alpha)
        return factor * self.coeff(alpha)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError("cannot raise the order of a jet")
        m = len(multi_indices(order, self.nvars))
        return Jet(order, self.nvars, self.coeffs[:m])

    def nilpotent_part(self) -> "Jet":
        c = np.array(self.coeffs)
        c[0] = 0.0
        return Jet(self.order, self.nvars, c)

    # arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if (other.order, other.nvars) != (self.order, self.nvars):
                raise JetError(
                    f"jet mismatch: ({self.order}, {self.nvars}) vs ({other.order}, {other.nvars})"
                )
            return other
        shape = np.broadcast_shapes(np.shape(other), self.batch_shape)
        return Jet.constant(other, self.order, self.nvars, shape)

    def __add__(self, other):
        other = self._coerce(other)
        return Jet(self.order, self.nvars, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.order, self.nvars, -self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.order, self.nvars, self.coeffs * other)
        other = self._coerce(other)
        I, J, S = _mul_pairs(self.order, self.nvars)
        a, b = np.broadcast_arrays(self.coeffs, other.coeffs)
        prod = a[I] * b[J]
        c = (S @ prod.reshape(len(I), -1)).reshape((S.shape[0],) + prod.shape[1:])
        return Jet(self.order, self.nvars, c)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        b0 = np.asarray(self.value)
        if np.any(b0 == 0.0):
            raise ZeroDivisionError("jet division by a series with zero constant term")
        h = self.nilpotent_part()
        # 1/(b0 + h) = sum_k (-h)^k / b0^(k+1)
        term = Jet.constant(1.0 / b0, self.order, self.nvars, b0.shape)
        total = term
        for _ in range(self.order):
            term = term * h * (-1.0 / b0)
            total = total + term
        return total

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            if np.any(np.asarray(other) == 0):
                raise ZeroDivisionError("jet division by zero")
            return Jet(self.order, self.nvars, self.coeffs / other)
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def __pow__(self, k):
        if isinstance(k, Jet) or int(k) != k:
            raise JetError("jets only support integer powers")
        k = int(k)
        if k < 0:
            return self.reciprocal() ** (-k)
        result = Jet.constant(1.0, self.order, self.nvars, self.batch_shape)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def compose(self, derivs) -> "Jet":
        """Compose ``f`` with this jet given ``derivs[k] = f^(k)(value)``."""
        h = self.nilpotent_part()
        total = Jet.constant(derivs[0], self.order, self.nvars, self.batch_shape)
        power = None
        for k in range(1, self.order + 1):
            power = h if power is None else power * h
            total = total + power * (derivs[k] / math.factorial(k))
        return total

    def __repr__(self):
        return f"Jet(order={self.order}, nvars={self.nvars}, coeffs={self.coeffs.tolist()})"


def jet_sin(a: Jet) -> Jet:
    s, c = np.sin(a.value), np.cos(a.value)
    return a.compose([s, c, -s, -c, s][: a.order + 1])


def jet_cos(a: Jet) -> Jet:
    s, c = np.sin(a.value), np.cos(a.value)
    return a.compose([c, -s, -c, s, c][: a.order + 1])


def jet_exp(a: Jet) -> Jet:
    e = np.exp(a.value)
    return a.compose([e] * (a.order + 1))


ELEMENTARY = {"sin": jet_sin, "cos": jet_cos, "exp": jet_exp}


def jet_elementary(name: str, a: Jet) -> Jet:
    try:
        return ELEMENTARY[name](a)
    except KeyError:
        raise JetError(f"unknown elementary function {name!r}") from None


def derivative_arrays(jets: list[Jet], max_order: int):
    """Stack partial derivatives of a vector of jets.

    Returns ``[x, X1, X2, ...]`` where ``x`` has shape ``batch + (m,)``,
    ``X1[..., i, :]`` is the i-th first partial, ``X2[..., i, j, :]`` the
    (i, j) second partial and ``X3[..., i, j, k, :]`` the third.
    """
    nvars = jets[0].nvars
    out = []
    for deg in range(max_order + 1):
        shape = (nvars,) * deg
        cols = []
        for jet in jets:
            arr = np.zeros(shape + jet.batch_shape)
            for combo in itertools.product(range(nvars), repeat=deg):
                alpha = [0] * nvars
                for i in combo:
                    alpha[i] += 1
                arr[combo] = jet.partial(alpha)
            cols.append(arr)
        stacked = np.stack(cols, axis=-1)  # shape + batch + (m,)
        # move batch axes to the front
        nb = len(jets[0].batch_shape)
        stacked = np.moveaxis(stacked, list(range(deg)), list(range(nb, nb + deg)))
        out.append(stacked)
    return out
