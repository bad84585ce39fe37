"""Convert a trained MLP into an equivalent polynomial.

Each layer alternates two steps on polynomials in the network inputs:

* a linear step, where the next layer's pre-activation polynomials are the
  bias-first weighted sums of the current post-activation polynomials, and
* an activation step, where the activation's truncated Maclaurin series is
  evaluated on a polynomial argument.

For the activation step, the coefficient of a monomial ``t`` in ``P^n`` is a
sum over the multiset partitions of ``t``: each partition into ``m`` blocks
names ``m`` monomials of ``P`` whose product is ``t``, weighted by the
multinomial count of orderings. The intercept ``b`` of ``P`` does not appear
in any partition; it is folded in through ``(b + R)^n = sum_m C(n, m) b^(n-m) R^m``.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .activations import DEFAULT_MAX_TAYLOR_ORDER, ActivationKind, taylor_coefficients
from .combinatorics import DEFAULT_PARTITION_CEILING, PartitionCache, build_cache, partitions_for_label
from .network import NetworkSpec
from .polynomial import INTERCEPT, Polynomial, combine_channels, full_labels

log = logging.getLogger(__name__)

DEFAULT_MAX_ORDER = 3
DEFAULT_TAYLOR_ORDER = 8


@dataclass(frozen=True)
class TransformConfig:
    """Options for :func:`transform`.

    ``taylor_orders`` is either one order used for every nonlinear layer or a
    list with one entry per nonlinear layer. Linear layers are never expanded.
    """

    max_order: int = DEFAULT_MAX_ORDER
    taylor_orders: int | Sequence[int] = DEFAULT_TAYLOR_ORDER
    keep_layers: bool = False
    partition_ceiling: int = DEFAULT_PARTITION_CEILING
    max_taylor_order: int = DEFAULT_MAX_TAYLOR_ORDER

    def __post_init__(self):
        if self.max_order < 1:
            raise ValueError(f"max_order must be >= 1, got {self.max_order}")
        orders = self.taylor_orders
        if isinstance(orders, (int, np.integer)):
            orders = [orders]
        else:
            orders = list(orders)
            object.__setattr__(self, "taylor_orders", tuple(int(q) for q in orders))
        for q in orders:
            if q < 1:
                raise ValueError(f"Taylor orders must be >= 1, got {q}")
            if q > self.max_taylor_order:
                raise ValueError(f"Taylor order {q} exceeds cap {self.max_taylor_order}")


@dataclass(frozen=True)
class LayerPolynomials:
    """Pre- and post-activation polynomials of one layer, one channel per neuron."""

    input: Polynomial
    output: Polynomial


def layer_taylor_orders(config: TransformConfig, net: NetworkSpec) -> list[int]:
    """Taylor order per layer; linear layers get 1."""
    nonlinear = [i for i, layer in enumerate(net.layers) if not layer.activation.is_linear]
    if isinstance(config.taylor_orders, (int, np.integer)):
        per = [int(config.taylor_orders)] * len(nonlinear)
    else:
        per = list(config.taylor_orders)
        if len(per) != len(nonlinear):
            raise ValueError(
                f"{len(per)} Taylor orders given for {len(nonlinear)} nonlinear layers"
            )
    orders = [1] * len(net.layers)
    for i, q in zip(nonlinear, per):
        orders[i] = q
    return orders


def derive_order_schedule(config: TransformConfig, net: NetworkSpec) -> list[int]:
    """Order cap after each layer: ``min(max_order, previous * q)`` for nonlinear layers."""
    caps = []
    order = 1
    for layer, q in zip(net.layers, layer_taylor_orders(config, net)):
        if not layer.activation.is_linear:
            order = min(config.max_order, order * q)
        caps.append(order)
    return caps


class _ExpansionPlan:
    """Partition terms contributing to each output monomial, grouped by block count.

    For block count ``m``: ``rows[m]`` are output row indices, ``factors[m]``
    the multinomial counts, ``blocks[m]`` an ``(n_terms, m)`` array of input
    row indices. Blocks above ``in_order`` are excluded; their coefficients
    are zero in a polynomial of that order.
    """

    def __init__(self, out_labels, in_index: dict, in_order: int, cap: int, cache: PartitionCache):
        grouped: dict[int, tuple[list, list, list]] = {}
        for r, label in enumerate(out_labels):
            if not label or len(label) > cap:
                continue
            for part in partitions_for_label(cache, label):
                if any(len(block) > in_order for block in part):
                    continue
                idx = [in_index.get(block) for block in part]
                if None in idx:
                    continue
                m = len(part)
                factor = math.factorial(m)
                for k in Counter(part).values():
                    factor //= math.factorial(k)
                rows, factors, blocks = grouped.setdefault(m, ([], [], []))
                rows.append(r)
                factors.append(float(factor))
                blocks.append(idx)
        self.rows = {m: np.array(g[0], dtype=np.intp) for m, g in grouped.items()}
        self.factors = {m: np.array(g[1]) for m, g in grouped.items()}
        self.blocks = {m: np.array(g[2], dtype=np.intp) for m, g in grouped.items()}
        self.n_out = len(out_labels)
        self.out_intercept = (
            out_labels.index(INTERCEPT) if INTERCEPT in out_labels else None
        )

    def apply(self, in_values: np.ndarray, in_intercept: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        q = len(coeffs) - 1
        channels = in_values.shape[1]
        # amp[m] = sum_{n >= m} c_n C(n, m) b^(n - m): the weight of R^m.
        powers = np.vstack([in_intercept**k for k in range(q + 1)])
        amp = np.zeros((q + 1, channels))
        for m in range(q + 1):
            for n in range(m, q + 1):
                if coeffs[n] != 0.0:
                    amp[m] += coeffs[n] * math.comb(n, m) * powers[n - m]
        out = np.zeros((self.n_out, channels))
        if self.out_intercept is not None:
            out[self.out_intercept] = amp[0]
        for m, rows in self.rows.items():
            if m > q:
                continue
            prod = np.prod(in_values[self.blocks[m]], axis=1)
            contrib = self.factors[m][:, None] * prod * amp[m]
            np.add.at(out, rows, contrib)
        return out


def activation_step(
    in_poly: Polynomial,
    act,
    q: int,
    order_cap: int,
    cache: PartitionCache,
    *,
    in_order: int | None = None,
    label_order: int | None = None,
) -> Polynomial:
    """Apply the order-``q`` Maclaurin expansion of ``act`` to every channel of ``in_poly``.

    The result lives on all monomials up to ``label_order`` (default
    ``order_cap``); only those up to ``order_cap`` are computed, the rest are
    zero. ``in_order`` is the highest order carried by ``in_poly``.
    """
    act = ActivationKind.parse(act)
    if act.is_linear:
        return in_poly
    if q < 1:
        raise ValueError(f"Taylor order must be >= 1 for {act.value}, got {q}")
    if in_order is None:
        in_order = in_poly.max_order
    if label_order is None:
        label_order = order_cap
    out_labels = full_labels(in_poly.p, label_order)
    plan = _ExpansionPlan(out_labels, in_poly._index, in_order, order_cap, cache)
    return _apply_plan(plan, in_poly, taylor_coefficients(act, q), out_labels, label_order)


def _apply_plan(plan, in_poly, coeffs, out_labels, label_order) -> Polynomial:
    r0 = in_poly.index_of(INTERCEPT)
    intercept = in_poly.values[r0] if r0 is not None else np.zeros(in_poly.n_channels)
    values = plan.apply(in_poly.values, intercept, coeffs)
    return Polynomial(in_poly.p, tuple(out_labels), values, label_order)


def _input_polynomial(p: int, max_order: int) -> Polynomial:
    """``p`` channels; channel ``i`` is the monomial ``x_{i+1}``."""
    labels = full_labels(p, max_order)
    values = np.zeros((len(labels), p))
    for i in range(p):
        values[labels.index((i + 1,)), i] = 1.0
    return Polynomial(p, tuple(labels), values, max_order)


def transform(net: NetworkSpec, config: TransformConfig | None = None, cache: PartitionCache | None = None):
    """Polynomial representation of ``net``.

    Returns the final multi-output :class:`Polynomial`, or with
    ``config.keep_layers`` a list with one :class:`LayerPolynomials` per
    layer whose last ``output`` is the final polynomial. All polynomials
    share the full label list up to ``config.max_order``.
    """
    config = config or TransformConfig()
    p = net.n_inputs
    qmax = config.max_order
    q_per_layer = layer_taylor_orders(config, net)
    caps = derive_order_schedule(config, net)
    if cache is None:
        cache = build_cache(p, qmax, config.partition_ceiling)
    elif cache.max_order < qmax:
        raise ValueError(f"cache built for order {cache.max_order}, need {qmax}")
    labels = full_labels(p, qmax)
    plans: dict[tuple[int, int], _ExpansionPlan] = {}

    current = _input_polynomial(p, qmax)
    order = 1
    kept = []
    for l, (layer, q, cap) in enumerate(zip(net.layers, q_per_layer, caps), start=1):
        in_poly = combine_channels(current, layer.weights)
        if layer.activation.is_linear:
            out_poly = in_poly
        else:
            key = (order, cap)
            if key not in plans:
                plans[key] = _ExpansionPlan(labels, in_poly._index, order, cap, cache)
            coeffs = taylor_coefficients(layer.activation, q, config.max_taylor_order)
            out_poly = _apply_plan(plans[key], in_poly, coeffs, labels, qmax)
            if order * q > cap:
                log.info(
                    "layer %d: expansion reaches order %d, truncated to %d", l, order * q, cap
                )
        order = cap
        if config.keep_layers:
            kept.append(LayerPolynomials(in_poly, out_poly))
        current = out_poly
    return kept if config.keep_layers else current
