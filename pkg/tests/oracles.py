"""Independent reference computations used by the test suite.

Nothing here calls the code paths it is used to check.
"""

from __future__ import annotations

import itertools

import mpmath
import numpy as np
import sympy


def set_partitions(n: int):
    """All partitions of positions ``0..n-1`` via restricted growth strings."""

    def rec(i, assignment, n_blocks):
        if i == n:
            yield list(assignment)
            return
        for b in range(n_blocks + 1):
            assignment.append(b)
            yield from rec(i + 1, assignment, max(n_blocks, b + 1))
            assignment.pop()

    yield from rec(0, [], 0)


def brute_force_multiset_partitions(elements) -> set:
    """Distinct multiset partitions as a set of sorted tuples of sorted blocks."""
    elements = list(elements)
    out = set()
    for rgs in set_partitions(len(elements)):
        blocks = {}
        for pos, b in enumerate(rgs):
            blocks.setdefault(b, []).append(elements[pos])
        out.add(tuple(sorted(tuple(sorted(bl)) for bl in blocks.values())))
    return out


def bell_numbers(n_max: int) -> list[int]:
    """Bell numbers B_0..B_n_max from the Bell triangle."""
    bells = [1]
    row = [1]
    for _ in range(n_max):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
        bells.append(row[0])
    return bells


def fd_derivative_at_zero(fn, n: int, h="1e-2", dps: int = 60) -> float:
    """n-th derivative at 0 by central differences with two Richardson steps.

    Runs in high precision so cancellation in the difference stencil is
    harmless; the remaining error is the truncation term in ``h``.
    """
    with mpmath.workdps(dps):
        def central(step):
            step = mpmath.mpf(step)
            acc = mpmath.mpf(0)
            for k in range(n + 1):
                acc += (-1) ** k * mpmath.binomial(n, k) * fn((n / mpmath.mpf(2) - k) * step)
            return acc / step**n

        h = mpmath.mpf(h)
        d1, d2, d3 = central(h), central(h / 2), central(h / 4)
        # Central stencils have even-power error expansions in h.
        r1 = (4 * d2 - d1) / 3
        r2 = (4 * d3 - d2) / 3
        return float((16 * r2 - r1) / 15)


MP_FUNCS = {
    "tanh": mpmath.tanh,
    "sigmoid": lambda x: 1 / (1 + mpmath.exp(-x)),
    "softplus": lambda x: mpmath.log(1 + mpmath.exp(x)),
    "linear": lambda x: x,
}

_x = sympy.Symbol("x")
_SYMPY_FUNCS = {
    "tanh": sympy.tanh(_x),
    "sigmoid": 1 / (1 + sympy.exp(-_x)),
    "softplus": sympy.log(1 + sympy.exp(_x)),
    "linear": _x,
}
_series_cache: dict = {}


def series_coefficients(name: str, q: int) -> list[float]:
    """Maclaurin coefficients from sympy's symbolic series."""
    key = (name, q)
    if key not in _series_cache:
        expr = sympy.series(_SYMPY_FUNCS[name], _x, 0, q + 1).removeO()
        poly = sympy.Poly(expr, _x)
        _series_cache[key] = [float(poly.coeff_monomial(_x**k)) for k in range(q + 1)]
    return _series_cache[key]


# Dict polynomials: {exponent tuple (length p): coefficient}.

def dp_affine(bias: float, weights, p: int) -> dict:
    poly = {(0,) * p: float(bias)}
    for i, w in enumerate(weights):
        e = [0] * p
        e[i] = 1
        poly[tuple(e)] = poly.get(tuple(e), 0.0) + float(w)
    return poly


def dp_mul(a: dict, b: dict, max_order: int) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            if sum(e) <= max_order:
                out[e] = out.get(e, 0.0) + ca * cb
    return out


def dp_add(a: dict, b: dict, scale: float = 1.0) -> dict:
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0.0) + scale * c
    return out


def dp_substitute_series(coeffs, inner: dict, p: int, max_order: int) -> dict:
    """``sum_n coeffs[n] * inner^n`` by repeated naive multiplication."""
    result = {(0,) * p: float(coeffs[0])}
    power = {(0,) * p: 1.0}
    for c in coeffs[1:]:
        power = dp_mul(power, inner, max_order)
        result = dp_add(result, power, c)
    return result


def dp_network(weights, activations, taylor_orders, max_order: int) -> list[dict]:
    """Truncated polynomial expansion of an MLP by direct substitution.

    Returns one dict polynomial per output neuron.
    """
    p = np.asarray(weights[0]).shape[0] - 1
    current = [dp_affine(0.0, np.eye(p)[i], p) for i in range(p)]
    for W, act, q in zip(weights, activations, taylor_orders):
        W = np.asarray(W, dtype=float)
        nxt = []
        for j in range(W.shape[1]):
            u = {(0,) * p: float(W[0, j])}
            for i, poly in enumerate(current):
                u = dp_add(u, poly, W[i + 1, j])
            if act != "linear":
                u = dp_substitute_series(series_coefficients(act, q), u, p, max_order)
            nxt.append(u)
        current = nxt
    return current


def exponent_to_label(e) -> tuple:
    return tuple(i + 1 for i, k in enumerate(e) for _ in range(k))


def all_multisets(max_size: int, max_distinct: int):
    """Sorted element tuples of size 1..max_size over elements 1..max_distinct."""
    for size in range(1, max_size + 1):
        yield from itertools.combinations_with_replacement(range(1, max_distinct + 1), size)
