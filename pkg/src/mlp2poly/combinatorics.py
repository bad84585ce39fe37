"""Multiset partitions and the signature-keyed partition cache.

A monomial such as ``x1^2 * x2 * x4`` corresponds to the multiset
``{1, 1, 2, 4}``. Every way of writing that monomial as a product of smaller
monomials is a partition of the multiset, so the coefficient expansion of a
power of a polynomial reduces to enumerating multiset partitions.

Partitions depend only on the multiplicity profile (the *signature*), so
they are enumerated once per signature on a canonical representative with
elements ``1..d`` and relabelled on demand.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Sequence

DEFAULT_PARTITION_CEILING = 10**7

# A block is a sorted tuple of elements, e.g. (1, 1, 2).
Block = tuple[int, ...]
Partition = tuple[Block, ...]
Signature = tuple[int, ...]


class PartitionCeilingError(RuntimeError):
    """The partition cache would exceed its configured size."""


class MissingSignatureError(KeyError):
    pass


@dataclass(frozen=True)
class Multiset:
    """Sorted ``(element, multiplicity)`` pairs."""

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        elems = [e for e, _ in self.entries]
        if any(b <= a for a, b in zip(elems, elems[1:])):
            raise ValueError(f"multiset elements must be strictly increasing: {elems}")
        if any(m < 1 for _, m in self.entries):
            raise ValueError("multiplicities must be positive")

    @classmethod
    def from_elements(cls, elements: Sequence[int]) -> "Multiset":
        return cls(tuple(sorted(Counter(elements).items())))

    @property
    def size(self) -> int:
        return sum(m for _, m in self.entries)

    def elements(self) -> tuple[int, ...]:
        return tuple(e for e, m in self.entries for _ in range(m))


def multiset_from_label(label: Sequence[int]) -> Multiset:
    """The multiset of variable occurrences in a (non-intercept) monomial."""
    if not label:
        raise ValueError("the intercept has no associated multiset")
    return Multiset.from_elements(label)


def signature_of(ms: Multiset) -> Signature:
    return tuple(sorted((m for _, m in ms.entries), reverse=True))


def _partitions_of_multiplicities(mult: Sequence[int]) -> Iterator[list[list[int]]]:
    """Knuth's Algorithm M (TAOCP 7.2.1.5).

    Yields each partition of the multiset with multiplicity vector ``mult``
    as a list of part vectors, in decreasing lexicographic order. Parts
    within a partition are listed in decreasing order as well.
    """
    m = len(mult)
    n = sum(mult)
    size = n * m + 1
    c = [0] * size  # component index
    u = [0] * size  # multiplicity still available
    v = [0] * size  # multiplicity used by this part
    f = [0] * (n + 2)  # f[l] = start of part l on the stack

    for j in range(m):
        c[j] = j
        u[j] = v[j] = mult[j]
    a, b, lvl = 0, m, 0
    f[0], f[1] = 0, m

    while True:
        # M2/M3: spread unallocated multiplicity into new parts.
        while True:
            j, k, changed = a, b, False
            while j < b:
                u[k] = u[j] - v[j]
                if u[k] == 0:
                    changed = True
                elif not changed:
                    c[k] = c[j]
                    v[k] = min(v[j], u[k])
                    changed = u[k] < v[j]
                    k += 1
                else:
                    c[k] = c[j]
                    v[k] = u[k]
                    k += 1
                j += 1
            if k > b:
                a, b = b, k
                lvl += 1
                f[lvl + 1] = b
            else:
                break

        # M4: visit.
        parts = []
        for i in range(lvl + 1):
            vec = [0] * m
            for s in range(f[i], f[i + 1]):
                vec[c[s]] = v[s]
            parts.append(vec)
        yield parts

        # M5/M6: decrease the rightmost decrementable part, backtracking as needed.
        while True:
            j = b - 1
            while v[j] == 0:
                j -= 1
            if j == a and v[j] == 1:
                if lvl == 0:
                    return
                lvl -= 1
                b = a
                a = f[lvl]
            else:
                v[j] -= 1
                for s in range(j + 1, b):
                    v[s] = u[s]
                break


def enumerate_partitions(ms: Multiset) -> list[Partition]:
    """All distinct partitions of ``ms``, each exactly once.

    Order is Knuth's decreasing order: the single-block partition first and
    the all-singletons partition last.
    """
    if ms.size < 1:
        raise ValueError("cannot partition an empty multiset")
    elems = [e for e, _ in ms.entries]
    mult = [m for _, m in ms.entries]
    out = []
    for parts in _partitions_of_multiplicities(mult):
        out.append(
            tuple(
                tuple(e for e, k in zip(elems, vec) for _ in range(k))
                for vec in parts
            )
        )
    return out


def canonical_multiset(sig: Signature) -> Multiset:
    """Representative with elements ``1..d`` carrying ``sig`` in order."""
    return Multiset(tuple((i + 1, m) for i, m in enumerate(sig)))


def _integer_partitions(total: int, max_part: int, max_len: int) -> Iterator[Signature]:
    if total == 0:
        yield ()
        return
    if max_len == 0:
        return
    for first in range(min(total, max_part), 0, -1):
        for rest in _integer_partitions(total - first, first, max_len - 1):
            yield (first,) + rest


def signatures_up_to(p: int, max_order: int) -> list[Signature]:
    """Every signature of a monomial of order ``1..max_order`` in ``p`` variables."""
    sigs = []
    for total in range(1, max_order + 1):
        sigs.extend(_integer_partitions(total, total, p))
    return sigs


class PartitionCache:
    """Partition lists keyed by signature, immutable once built."""

    def __init__(self, p: int, max_order: int, table: dict[Signature, tuple[Partition, ...]]):
        self.p = p
        self.max_order = max_order
        self._table = dict(table)

    def __contains__(self, sig) -> bool:
        return tuple(sig) in self._table

    def __len__(self) -> int:
        return len(self._table)

    def signatures(self) -> list[Signature]:
        return list(self._table)

    def canonical(self, sig: Signature) -> tuple[Partition, ...]:
        try:
            return self._table[tuple(sig)]
        except KeyError:
            raise MissingSignatureError(
                f"signature {tuple(sig)} not in cache (built for order <= {self.max_order})"
            ) from None

    @property
    def total_partitions(self) -> int:
        return sum(len(v) for v in self._table.values())

    def partitions_for(self, label: Sequence[int]) -> tuple[Partition, ...]:
        return partitions_for_label(self, label)


def build_cache(p: int, max_order: int, ceiling: int = DEFAULT_PARTITION_CEILING) -> PartitionCache:
    """Enumerate partitions for every signature reachable at ``max_order``."""
    if p < 1 or max_order < 1:
        raise ValueError("p and max_order must be positive")
    table = {}
    total = 0
    for sig in signatures_up_to(p, max_order):
        parts = tuple(enumerate_partitions(canonical_multiset(sig)))
        total += len(parts)
        if total > ceiling:
            raise PartitionCeilingError(
                f"partition cache exceeds ceiling of {ceiling} partitions at signature {sig}; "
                f"reduce max_order (currently {max_order})"
            )
        table[sig] = parts
    return PartitionCache(p, max_order, table)


def relabelling(label: Sequence[int]) -> dict[int, int]:
    """Map canonical elements ``1..d`` to the variables of ``label``.

    Variables are paired with canonical elements by descending multiplicity,
    ties broken by ascending variable index.
    """
    counts = Counter(label)
    order = sorted(counts, key=lambda var: (-counts[var], var))
    return {i + 1: var for i, var in enumerate(order)}


def partitions_for_label(cache: PartitionCache, label: Sequence[int]) -> tuple[Partition, ...]:
    """Partitions of ``label``'s multiset, taken from the cache and relabelled."""
    ms = multiset_from_label(label)
    canon = cache.canonical(signature_of(ms))
    mapping = relabelling(label)
    return tuple(
        tuple(tuple(sorted(mapping[e] for e in block)) for block in part)
        for part in canon
    )


def format_partitions(parts: Sequence[Partition]) -> str:
    """Debug dump: one partition per line, blocks split by ``|``."""
    return "\n".join(
        "|".join(",".join(str(e) for e in block) for block in part) for part in parts
    )
