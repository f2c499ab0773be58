"""Brute-force ground truth by direct enumeration.

Nothing here touches the series engine: partitions are listed one by one and
weights are multiplied out, so these functions serve as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Callable, Sequence

from .errors import DomainError
from .limits import ENUMERATION_LIMIT, SET_PARTITION_LIMIT, check_enumeration
from .measure import CountLawTable, LawKind, PartitionState, structure_weight
from .weights import AnySpec


@dataclass(frozen=True)
class PartitionList:
    """All partitions of ``n`` ordered lexicographically on ``(k_n, ..., k_1)``."""

    n: int
    items: tuple

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def index(self, eta) -> int:
        key = eta.k if isinstance(eta, PartitionState) else tuple(eta)
        return self._index()[key]

    def _index(self):
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {s.k: i for i, s in enumerate(self.items)}
            object.__setattr__(self, "_idx", idx)
        return idx


def _parts(n: int, largest: int):
    # partitions of n into parts <= largest, as descending lists
    if n == 0:
        yield []
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _parts(n - first, first):
            yield [first] + rest


def _to_counts(parts, n):
    k = [0] * n
    for s in parts:
        k[s - 1] += 1
    return tuple(k)


def enumerate_partitions(n: int, limit: int = ENUMERATION_LIMIT) -> PartitionList:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    check_enumeration(n, limit, "partition enumeration")
    counts = [_to_counts(ps, n) for ps in _parts(n, n)]
    counts.sort(key=lambda k: k[::-1])
    return PartitionList(n, tuple(PartitionState(k) for k in counts))


def enumerate_partitions_k(n: int, k: int, limit: int = ENUMERATION_LIMIT) -> list:
    """Partitions of ``n`` into exactly ``k`` parts, in the same canonical order."""
    return [eta for eta in enumerate_partitions(n, limit) if eta.parts == k]


def brute_c_tilde(spec: AnySpec, n: int, limit: int = ENUMERATION_LIMIT) -> Fraction:
    """Scaled partition function as a sum over all of ``Omega_n``."""
    return sum((structure_weight(spec, eta) for eta in enumerate_partitions(n, limit)), Fraction(0))


def brute_mu(spec: AnySpec, n: int, limit: int = ENUMERATION_LIMIT) -> dict:
    """``{state: mu_n(state)}`` by enumeration; zero-mass states are kept."""
    states = enumerate_partitions(n, limit)
    w = {eta: structure_weight(spec, eta) for eta in states}
    total = sum(w.values(), Fraction(0))
    if total == 0:
        raise DomainError(f"c~_{n} = 0: the measure on partitions of {n} is undefined")
    return {eta: v / total for eta, v in w.items()}


def brute_marginal(spec: AnySpec, n: int, l: int, limit: int = ENUMERATION_LIMIT) -> CountLawTable:
    if not 1 <= l <= n:
        raise DomainError(f"need 1 <= l <= n, got l={l}, n={n}")
    out: dict = {}
    for eta, v in brute_mu(spec, n, limit).items():
        if v:
            key = eta.k[:l]
            out[key] = out.get(key, Fraction(0)) + v
    return CountLawTable(n, l, out, LawKind.EXACT)


# ---------------------------------------------------------------------------
# set partitions and Bell polynomials

Weights = Sequence | Callable[[int], object]


def _m(m: Weights, j: int):
    return Fraction(m(j)) if callable(m) else Fraction(m[j - 1])


def _set_partitions(n: int):
    """Restricted growth strings of length n: a[i] is the block of element i."""
    a = [0] * n

    def rec(i, blocks):
        if i == n:
            yield a, blocks
            return
        for b in range(blocks + 1):
            a[i] = b
            yield from rec(i + 1, max(blocks, b + 1))

    if n == 0:
        yield [], 0
        return
    yield from rec(1, 1)


def set_partition_count(eta) -> int:
    """Number of set partitions of ``[n]`` with block-size profile ``eta``."""
    eta = eta if isinstance(eta, PartitionState) else PartitionState(tuple(eta))
    den = 1
    for j, kj in enumerate(eta.k, start=1):
        den *= factorial(kj) * factorial(j) ** kj
    return factorial(eta.n) // den


def bell_polynomial_sets(m: Weights, n: int, k: int, limit: int = SET_PARTITION_LIMIT) -> Fraction:
    """Sum over set partitions of ``[n]`` into ``k`` blocks of ``prod m_{|A|}``."""
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    check_enumeration(n, limit, "set-partition enumeration")
    total = Fraction(0)
    for a, blocks in _set_partitions(n):
        if blocks != k:
            continue
        sizes = [0] * blocks
        for b in a:
            sizes[b] += 1
        w = Fraction(1)
        for s in sizes:
            w *= _m(m, s)
        total += w
    return total


def _profile_weight(m: Weights, eta: PartitionState) -> Fraction:
    w = Fraction(1)
    for j, kj in enumerate(eta.k, start=1):
        if kj:
            w *= (_m(m, j) / factorial(j)) ** kj / factorial(kj)
    return w


def bell_polynomial_profiles(m: Weights, n: int, k: int, limit: int = ENUMERATION_LIMIT) -> Fraction:
    """``n! * sum over Omega_{n,k} of prod (m_j/j!)^{k_j} / k_j!``."""
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    total = sum((_profile_weight(m, eta) for eta in enumerate_partitions_k(n, k, limit)), Fraction(0))
    return factorial(n) * total


def bell_polynomial(m: Weights, n: int, k: int) -> Fraction:
    """Partial Bell polynomial; both evaluation paths are run and compared when n is small enough."""
    via_profiles = bell_polynomial_profiles(m, n, k)
    if n <= SET_PARTITION_LIMIT:
        via_sets = bell_polynomial_sets(m, n, k)
        if via_sets != via_profiles:
            raise AssertionError(f"Bell polynomial paths disagree at n={n}, k={k}: {via_sets} vs {via_profiles}")
    return via_profiles


def gibbs_pnk(m: Weights, n: int, k: int, eta) -> Fraction:
    """Microcanonical Gibbs mass of ``eta`` among partitions of ``n`` into ``k`` parts."""
    eta = eta if isinstance(eta, PartitionState) else PartitionState(tuple(eta))
    if eta.n != n or eta.parts != k:
        raise DomainError(f"{eta} is not a partition of {n} into {k} parts")
    B = bell_polynomial_profiles(m, n, k)
    if B == 0:
        raise DomainError(f"B_{{{n},{k}}} = 0: the Gibbs distribution is undefined")
    return factorial(n) * _profile_weight(m, eta) / B


# ---------------------------------------------------------------------------
# engine cross-check

@dataclass(frozen=True)
class Mismatch:
    n: int
    prefix: tuple  # () marks a partition-function mismatch
    engine: Fraction
    oracle: Fraction

    def __str__(self):
        what = "c~_n" if not self.prefix else f"prefix {self.prefix}"
        return f"n={self.n} {what}: engine {self.engine} != oracle {self.oracle}"


def cross_check(spec: AnySpec, n_max: int, l_max: int = 4, fdd_table=None, c_tilde=None) -> Mismatch | None:
    """Compare the series engine with enumeration; return the first exact mismatch.

    ``fdd_table`` and ``c_tilde`` default to the engine's own functions and can
    be swapped to check that a broken engine is caught.
    """
    from .measure import fdd_table as engine_fdd
    from .series import g_tilde

    check_enumeration(n_max)
    fdd_table = fdd_table or engine_fdd
    coeffs = c_tilde(spec, n_max) if c_tilde else g_tilde(spec, n_max).coeffs
    if coeffs[0] != 1:
        return Mismatch(0, (), coeffs[0], Fraction(1))
    for n in range(1, n_max + 1):
        want = brute_c_tilde(spec, n)
        if coeffs[n] != want:
            return Mismatch(n, (), coeffs[n], want)
        if want == 0:
            continue
        for l in range(1, min(l_max, n) + 1):
            got = fdd_table(spec, n, l)
            ref = brute_marginal(spec, n, l)
            for key in sorted(set(got.entries) | set(ref.entries)):
                a, b = got.prob(key), ref.prob(key)
                if a != b:
                    return Mismatch(n, key, Fraction(a), Fraction(b))
    return None
