"""Supported activation functions and their Maclaurin coefficients.

Derivatives at zero are exact. For tanh and sigmoid the n-th derivative is a
polynomial in the function value itself (``tanh' = 1 - tanh^2``,
``sigmoid' = sigmoid (1 - sigmoid)``), which is differentiated symbolically
with rational coefficients and evaluated at ``g(0)``.
"""

from __future__ import annotations

import math
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np

DEFAULT_MAX_TAYLOR_ORDER = 30


class UnsupportedActivationError(ValueError):
    pass


class ActivationKind(str, Enum):
    TANH = "tanh"
    SIGMOID = "sigmoid"
    SOFTPLUS = "softplus"
    LINEAR = "linear"

    @classmethod
    def parse(cls, name) -> "ActivationKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            if str(name).lower() == "relu":
                msg = "relu is not supported: it is not differentiable at 0, so it has no Taylor expansion"
            else:
                msg = f"unsupported activation {name!r}"
            raise UnsupportedActivationError(
                f"{msg} (supported: {', '.join(a.value for a in cls)})"
            ) from None

    @property
    def is_linear(self) -> bool:
        return self is ActivationKind.LINEAR

    def __call__(self, x):
        return apply_activation(self, x)

    def derivative(self, x, y=None):
        """First derivative at ``x``; ``y = g(x)`` may be passed to skip recomputation."""
        x = np.asarray(x, dtype=np.float64)
        if self is ActivationKind.LINEAR:
            return np.ones_like(x)
        if self is ActivationKind.SOFTPLUS:
            return _sigmoid(x)
        if y is None:
            y = apply_activation(self, x)
        if self is ActivationKind.TANH:
            return 1.0 - y * y
        return y * (1.0 - y)


def _sigmoid(x):
    # Split by sign so exp never overflows.
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def apply_activation(act: ActivationKind, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if act is ActivationKind.TANH:
        return np.tanh(x)
    if act is ActivationKind.SIGMOID:
        return _sigmoid(x)
    if act is ActivationKind.SOFTPLUS:
        return np.logaddexp(0.0, x)
    return x.copy()


def _poly_derivative(coeffs: list[Fraction]) -> list[Fraction]:
    return [k * c for k, c in enumerate(coeffs)][1:] or [Fraction(0)]


def _poly_mul(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _poly_eval(coeffs: list[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


@lru_cache(maxsize=None)
def _exact_derivatives(act: ActivationKind, n_max: int) -> tuple[Fraction, ...]:
    """Exact g^(n)(0) for n = 0..n_max (softplus value at 0 excluded)."""
    if act is ActivationKind.LINEAR:
        return tuple(Fraction(1 if n == 1 else 0) for n in range(n_max + 1))
    if act is ActivationKind.SOFTPLUS:
        sig = _exact_derivatives(ActivationKind.SIGMOID, max(n_max - 1, 0))
        # Entry 0 is a placeholder; ln 2 is irrational.
        return (Fraction(0),) + sig[: n_max]
    if act is ActivationKind.TANH:
        g0, gprime = Fraction(0), [Fraction(1), Fraction(0), Fraction(-1)]
    else:
        g0, gprime = Fraction(1, 2), [Fraction(0), Fraction(1), Fraction(-1)]
    # P_0(g) = g; P_{n+1}(g) = P_n'(g) * g'(g).
    poly = [Fraction(0), Fraction(1)]
    out = []
    for _ in range(n_max + 1):
        out.append(_poly_eval(poly, g0))
        poly = _poly_mul(_poly_derivative(poly), gprime)
    return tuple(out)


def derivative_at_zero(act, n: int) -> float:
    """The n-th derivative of the activation at 0."""
    act = ActivationKind.parse(act)
    if n < 0:
        raise ValueError("derivative order must be non-negative")
    if act is ActivationKind.SOFTPLUS and n == 0:
        return math.log(2.0)
    return float(_exact_derivatives(act, n)[n])


def taylor_coefficients(act, q: int, max_q: int = DEFAULT_MAX_TAYLOR_ORDER) -> np.ndarray:
    """Maclaurin coefficients ``g^(n)(0) / n!`` for ``n = 0..q``."""
    act = ActivationKind.parse(act)
    if q < 0:
        raise ValueError("Taylor order must be non-negative")
    if q > max_q:
        raise ValueError(f"Taylor order {q} exceeds cap {max_q}")
    exact = _exact_derivatives(act, q)
    coeffs = [float(exact[n] / math.factorial(n)) for n in range(q + 1)]
    if act is ActivationKind.SOFTPLUS:
        coeffs[0] = math.log(2.0)
    return np.array(coeffs)
