"""Sparse multivariate polynomials with one or more output channels.

A monomial is stored as a non-decreasing tuple of 1-based variable indices,
so ``(1, 1, 2)`` is ``x1^2 * x2``. The intercept is the empty tuple
internally and ``[0]`` when serialized.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

Monomial = tuple[int, ...]

INTERCEPT: Monomial = ()


class PolynomialError(ValueError):
    """Raised for malformed labels, values or polynomial files."""


def canonicalize_label(raw: Iterable[int], p: int) -> Monomial:
    """Normalize a user label to a sorted monomial.

    ``[0]`` and ``[]`` both denote the intercept. A ``0`` mixed with other
    indices is rejected, as is any index outside ``1..p``.
    """
    idx = [int(i) for i in raw]
    if idx == [0] or not idx:
        return INTERCEPT
    if 0 in idx:
        raise PolynomialError(f"label {idx}: 0 (intercept) cannot be mixed with variables")
    for i in idx:
        if i < 1 or i > p:
            raise PolynomialError(f"label {idx}: index {i} out of range 1..{p}")
    return tuple(sorted(idx))


def graded_key(label: Monomial) -> tuple[int, Monomial]:
    """Sort key for graded lexicographic order."""
    return (len(label), label)


def full_labels(p: int, max_order: int) -> list[Monomial]:
    """All monomials in ``p`` variables up to ``max_order``, graded-lex ordered."""
    labels: list[Monomial] = [INTERCEPT]
    for k in range(1, max_order + 1):
        labels.extend(combinations_with_replacement(range(1, p + 1), k))
    return labels


def n_terms(p: int, max_order: int) -> int:
    """Number of monomials of order at most ``max_order`` in ``p`` variables."""
    return sum(math.comb(p + k - 1, k) for k in range(max_order + 1))


def format_label(label: Monomial) -> str:
    """Render a monomial as ``x1^2*x3``; the intercept renders as ``1``."""
    if not label:
        return "1"
    parts = []
    i = 0
    while i < len(label):
        j = i
        while j < len(label) and label[j] == label[i]:
            j += 1
        power = j - i
        parts.append(f"x{label[i]}" if power == 1 else f"x{label[i]}^{power}")
        i = j
    return "*".join(parts)


@dataclass(frozen=True)
class Polynomial:
    """A polynomial in ``p`` variables with ``values.shape[1]`` output channels.

    ``values[r, j]`` is the coefficient of ``labels[r]`` in channel ``j``.
    Instances are treated as immutable; ``values`` is made read-only.
    """

    p: int
    labels: tuple[Monomial, ...]
    values: np.ndarray
    max_order: int
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.p < 1:
            raise PolynomialError(f"p must be positive, got {self.p}")
        labels = tuple(tuple(lab) for lab in self.labels)
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] != len(labels):
            raise PolynomialError(
                f"values shape {values.shape} does not match {len(labels)} labels"
            )
        if values.shape[1] < 1:
            raise PolynomialError("polynomial needs at least one output channel")
        index = {}
        for r, lab in enumerate(labels):
            if list(lab) != sorted(lab):
                raise PolynomialError(f"label {lab} is not sorted")
            if lab and (lab[0] < 1 or lab[-1] > self.p):
                raise PolynomialError(f"label {lab} out of range 1..{self.p}")
            if len(lab) > self.max_order:
                raise PolynomialError(f"label {lab} exceeds max_order {self.max_order}")
            if lab in index:
                raise PolynomialError(f"duplicate label {list(lab) or [0]}")
            index[lab] = r
        values.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_terms(cls, p, terms, max_order=None):
        """Build a single-channel polynomial from ``{raw_label: value}`` pairs."""
        items = terms.items() if isinstance(terms, Mapping) else terms
        labels, vals = [], []
        for raw, v in items:
            labels.append(canonicalize_label([raw] if isinstance(raw, int) else raw, p))
            vals.append(float(v))
        if max_order is None:
            max_order = max((len(lab) for lab in labels), default=0)
        return cls(p, tuple(labels), np.array(vals).reshape(-1, 1), max_order)

    @classmethod
    def zeros(cls, p: int, max_order: int, channels: int = 1) -> "Polynomial":
        labels = full_labels(p, max_order)
        return cls(p, tuple(labels), np.zeros((len(labels), channels)), max_order)

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def index_of(self, label: Monomial) -> int | None:
        return self._index.get(label)

    def coefficient(self, label: Sequence[int], channel: int = 0) -> float:
        """Coefficient of ``label`` (raw form accepted); 0.0 if absent."""
        r = self._index.get(canonicalize_label(label, self.p))
        return 0.0 if r is None else float(self.values[r, channel])

    def channel(self, j: int) -> "Polynomial":
        return Polynomial(self.p, self.labels, self.values[:, [j]], self.max_order)

    def order_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for lab in self.labels:
            counts[len(lab)] = counts.get(len(lab), 0) + 1
        return dict(sorted(counts.items()))

    def same_labels(self, other: "Polynomial") -> bool:
        return self.p == other.p and self.labels == other.labels

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "max_order": self.max_order,
            "labels": [list(lab) if lab else [0] for lab in self.labels],
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Polynomial":
        try:
            p = int(obj["p"])
            raw_labels = obj["labels"]
            raw_values = obj["values"]
        except (KeyError, TypeError) as exc:
            raise PolynomialError(f"polynomial object missing field: {exc}") from None
        if len(raw_values) != len(raw_labels):
            raise PolynomialError(
                f"{len(raw_labels)} labels but {len(raw_values)} value rows"
            )
        rows = [r if isinstance(r, list) else [r] for r in raw_values]
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise PolynomialError(f"ragged value rows (widths {sorted(widths)})")
        labels = [canonicalize_label(lab, p) for lab in raw_labels]
        max_order = obj.get("max_order")
        if max_order is None:
            max_order = max((len(lab) for lab in labels), default=0)
        values = np.array(rows, dtype=np.float64).reshape(len(rows), widths.pop() if widths else 1)
        return cls(p, tuple(labels), values, int(max_order))


def eval_poly(poly: Polynomial, X) -> np.ndarray:
    """Evaluate ``poly`` on the rows of ``X``; returns an ``n x c`` array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != poly.p:
        raise PolynomialError(f"X has shape {X.shape}, polynomial expects {poly.p} columns")
    n = X.shape[0]
    # Monomial columns are built incrementally from their prefix.
    cache: dict[Monomial, np.ndarray] = {INTERCEPT: np.ones(n)}

    def column(lab: Monomial) -> np.ndarray:
        col = cache.get(lab)
        if col is None:
            col = column(lab[:-1]) * X[:, lab[-1] - 1]
            cache[lab] = col
        return col

    features = np.empty((n, len(poly.labels)))
    for r, lab in enumerate(poly.labels):
        features[:, r] = column(lab)
    return features @ poly.values


def linear_combine(polys: Sequence[Polynomial], weights) -> Polynomial:
    """Return ``weights[0] + sum_i weights[i+1] * polys[i]``.

    All polynomials must be single-channel and share a label list.
    """
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if len(weights) != len(polys) + 1:
        raise PolynomialError(
            f"expected {len(polys) + 1} weights (bias first), got {len(weights)}"
        )
    if not polys:
        raise PolynomialError("linear_combine needs at least one polynomial")
    first = polys[0]
    for q in polys:
        if not first.same_labels(q) or q.n_channels != 1:
            raise PolynomialError("polynomials must be single-channel with a shared label space")
    stacked = np.hstack([q.values for q in polys])
    return combine_channels(
        Polynomial(first.p, first.labels, stacked, first.max_order),
        weights.reshape(-1, 1),
    )


def combine_channels(poly: Polynomial, W) -> Polynomial:
    """Apply a bias-first weight matrix to the channels of ``poly``.

    ``W`` has shape ``(1 + c, h)``; output channel ``j`` is
    ``W[0, j] + sum_i W[i+1, j] * channel_i``.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != poly.n_channels + 1:
        raise PolynomialError(
            f"weight matrix shape {W.shape} incompatible with {poly.n_channels} channels"
        )
    values = poly.values @ W[1:]
    r0 = poly.index_of(INTERCEPT)
    labels, max_order = poly.labels, poly.max_order
    if r0 is None:
        labels = (INTERCEPT,) + labels
        values = np.vstack([np.zeros((1, values.shape[1])), values])
        r0 = 0
    values[r0] += W[0]
    return Polynomial(poly.p, labels, values, max_order)


def top_n_coefficients(poly: Polynomial, n: int) -> list[list[tuple[Monomial, float]]]:
    """Per channel, the ``n`` non-intercept terms with largest ``|value|``.

    Ties are broken by graded lexicographic label order.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    ranked = []
    for j in range(poly.n_channels):
        terms = [
            (lab, float(poly.values[r, j]))
            for r, lab in enumerate(poly.labels)
            if lab
        ]
        terms.sort(key=lambda tv: (-abs(tv[1]), graded_key(tv[0])))
        ranked.append(terms[:n])
    return ranked


def save_polynomial(poly: Polynomial, path) -> None:
    atomic_write_text(path, json.dumps(poly.to_dict()))


def load_polynomial(path) -> Polynomial:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PolynomialError(f"{path}: invalid JSON ({exc})") from None
    return Polynomial.from_dict(obj)


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
