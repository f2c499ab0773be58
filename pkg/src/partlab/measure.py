"""Multiplicative measures on partitions of n.

Everything is computed in scaled form: the normalisers ``a_0^(j)`` cancel, so

    mu_n(eta) = prod_j a~_{k_j}^(j) / c~_n
    P(K_1 = k_1, ..., K_l = k_l) = prod_{j<=l} a~_{k_j}^(j) * T~^(l)_{n - M_l} / c~_n

with ``M_l = sum_{j<=l} j k_j``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import DomainError, TruncationError
from .series import ScaledTables, SjClosedForm, g_tilde, scaled_tables
from .weights import AnySpec, Family, TiltedSpec, component_weights, max_count, scaled_weight, unwrap

LIMIT_TAIL = 1e-12
LIMIT_FLOOR = 1e-18


@dataclass(frozen=True)
class PartitionState:
    """Multiplicity vector ``(k_1, ..., k_n)`` of a partition of ``n``."""

    k: tuple

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        if not k:
            raise DomainError("a partition state needs n >= 1")
        if any(v < 0 for v in k):
            raise DomainError(f"multiplicities must be >= 0: {k}")
        if sum(j * v for j, v in enumerate(k, start=1)) != len(k):
            raise DomainError(f"{k} is not a partition of {len(k)}")
        object.__setattr__(self, "k", k)

    @property
    def n(self) -> int:
        return len(self.k)

    def __getitem__(self, j: int) -> int:
        """Count of parts of size ``j`` (1-based); 0 outside ``1..n``."""
        return self.k[j - 1] if 1 <= j <= len(self.k) else 0

    @property
    def parts(self) -> int:
        return sum(self.k)

    def __str__(self):
        return "(" + ",".join(str(v) for v in self.k) + ")"


def as_state(eta) -> PartitionState:
    return eta if isinstance(eta, PartitionState) else PartitionState(tuple(eta))


def structure_weight(spec: AnySpec, eta) -> Fraction:
    """``prod_j a~_{k_j}^(j)``, the unnormalised scaled mass of ``eta``."""
    eta = as_state(eta)
    w = Fraction(1)
    for j, kj in enumerate(eta.k, start=1):
        if kj:
            w *= scaled_weight(spec, j, kj)
            if not w:
                return w
    return w


def _c_tilde(spec, n, tables):
    if tables is None:
        return g_tilde(spec, n)[n]
    if tables.N < n:
        raise TruncationError(f"tables reach order {tables.N}, order {n} needed")
    return tables.c_tilde[n]


def mu_point(spec: AnySpec, eta, tables: ScaledTables | None = None) -> Fraction:
    eta = as_state(eta)
    c = _c_tilde(spec, eta.n, tables)
    if c == 0:
        raise DomainError(f"c~_{eta.n} = 0: the measure on partitions of {eta.n} is undefined")
    return structure_weight(spec, eta) / c


def _tail_table(spec, n, l, tables):
    if tables is None:
        tables = scaled_tables(spec, n, [l])
    if tables.N < n:
        raise TruncationError(f"tables reach order {tables.N}, order {n} needed")
    if l not in tables.t_tilde:
        raise TruncationError(f"tables carry no tail series for l = {l}")
    return tables


def fdd(spec: AnySpec, n: int, l: int, prefix: Sequence[int], tables: ScaledTables | None = None) -> Fraction:
    """``P(K_1 = k_1, ..., K_l = k_l)`` under ``mu_n``, exactly."""
    if not 1 <= l <= n:
        raise DomainError(f"need 1 <= l <= n, got l={l}, n={n}")
    if len(prefix) != l:
        raise DomainError(f"prefix has {len(prefix)} entries, expected {l}")
    if any(k < 0 for k in prefix):
        raise DomainError(f"counts must be >= 0: {tuple(prefix)}")
    M = sum(j * k for j, k in enumerate(prefix, start=1))
    if M > n:
        return Fraction(0)
    tables = _tail_table(spec, n, l, tables)
    c = tables.c_tilde[n]
    if c == 0:
        raise DomainError(f"c~_{n} = 0: the measure on partitions of {n} is undefined")
    w = Fraction(1)
    for j, k in enumerate(prefix, start=1):
        if k:
            w *= scaled_weight(spec, j, k)
    return w * tables.t_tilde[l][n - M] / c


class LawKind(enum.Enum):
    EXACT = "exact"
    LIMIT = "limit"


@dataclass(frozen=True)
class CountLawTable:
    """Joint law of ``(K_1, ..., K_l)``; ``n is None`` marks a limit law."""

    n: int | None
    l: int
    entries: dict
    kind: LawKind
    truncation_mass: float = 0.0
    factors: tuple = field(default=(), compare=False)

    def total(self):
        if self.kind is LawKind.EXACT:
            return sum(self.entries.values(), Fraction(0))
        return math.fsum(self.entries.values())

    def prob(self, prefix) -> Fraction | float:
        return self.entries.get(tuple(prefix), 0)

    def marginal(self, l: int) -> "CountLawTable":
        """Law of the first ``l`` counts."""
        if not 1 <= l <= self.l:
            raise DomainError(f"cannot marginalise {self.l} counts to {l}")
        out: dict = {}
        for key, v in self.entries.items():
            out[key[:l]] = out.get(key[:l], 0) + v
        return CountLawTable(self.n, l, out, self.kind, self.truncation_mass, self.factors[:l])

    def moment(self, fn):
        vals = [fn(key) * v for key, v in self.entries.items()]
        return sum(vals, Fraction(0)) if self.kind is LawKind.EXACT else math.fsum(vals)


def _prefixes(n: int, l: int, caps):
    """All ``(k_1..k_l)`` with ``sum j k_j <= n`` and ``k_j <= caps[j]``."""

    def rec(j, budget):
        if j > l:
            yield ()
            return
        top = budget // j
        if caps[j - 1] is not None:
            top = min(top, caps[j - 1])
        for k in range(top + 1):
            for rest in rec(j + 1, budget - j * k):
                yield (k,) + rest

    return rec(1, n)


def fdd_table(spec: AnySpec, n: int, l: int, tables: ScaledTables | None = None) -> CountLawTable:
    """The full exact law of ``(K_1..K_l)`` under ``mu_n``; zero-mass prefixes omitted."""
    if not 1 <= l <= n:
        raise DomainError(f"need 1 <= l <= n, got l={l}, n={n}")
    tables = _tail_table(spec, n, l, tables)
    c = tables.c_tilde[n]
    if c == 0:
        raise DomainError(f"c~_{n} = 0: the measure on partitions of {n} is undefined")
    tail = tables.t_tilde[l]
    weights = [component_weights(spec, j, n // j) for j in range(1, l + 1)]
    caps = [max_count(spec, j) for j in range(1, l + 1)]
    entries = {}
    for pre in _prefixes(n, l, caps):
        w = Fraction(1)
        M = 0
        for j, k in enumerate(pre, start=1):
            if k:
                w *= weights[j - 1][k]
                M += j * k
        if not w:
            continue
        t = tail[n - M]
        if t:
            entries[pre] = w * t / c
    return CountLawTable(n, l, entries, LawKind.EXACT)


def count_covariance(spec: AnySpec, n: int, i: int, j: int) -> Fraction:
    """Exact ``cov(K_i, K_j)`` under ``mu_n``."""
    l = max(i, j)
    table = fdd_table(spec, n, l)
    e_i = table.moment(lambda key: key[i - 1])
    e_j = table.moment(lambda key: key[j - 1])
    e_ij = table.moment(lambda key: key[i - 1] * key[j - 1])
    return e_ij - e_i * e_j


# ---------------------------------------------------------------------------
# tilting and limit laws

def tilt(spec: AnySpec, rho) -> TiltedSpec:
    return TiltedSpec(spec, Fraction(rho))


@dataclass(frozen=True)
class ComponentLaw:
    """Law of one tilted component count, truncated once the tail drops below 1e-12."""

    j: int
    rho: Fraction | float
    pmf: tuple
    tail: Fraction | float
    exact: bool

    def prob(self, k: int):
        return self.pmf[k] if 0 <= k < len(self.pmf) else 0

    def mean(self):
        vals = [k * p for k, p in enumerate(self.pmf)]
        return sum(vals, Fraction(0)) if self.exact else math.fsum(vals)


def tilted_component_law(spec: AnySpec, rho, j: int) -> ComponentLaw:
    """``k -> rho^(jk) a~_k^(j) / S~_j(rho)``; ``rho = 0`` is the point mass at 0."""
    if isinstance(rho, float):
        rho_q = Fraction(rho)
    else:
        rho_q = Fraction(rho)
    if rho_q < 0:
        raise DomainError(f"tilt parameter must be >= 0, got {rho}")
    if rho_q == 0:
        return ComponentLaw(j, rho_q, (Fraction(1),), Fraction(0), True)
    base, theta = unwrap(spec)
    if base.family is Family.MULTISET and base.param(j) and base.p * theta * rho_q >= 1:
        raise DomainError(f"S~_{j}(rho) diverges at rho={rho}: p*rho >= 1")
    x = theta * rho_q
    S, _ = SjClosedForm(base, j).evaluate(x)
    exact = not isinstance(S, float) and base.exact
    cap = max_count(base, j)
    pmf = []
    cum = Fraction(0) if exact else 0.0
    k = 0
    if base.family is Family.ASSEMBLY:
        lam = float(base.param(j)) * float(x) ** j
        logp0 = -lam
    while True:
        if exact:
            p = scaled_weight(base, j, k) * x ** (j * k) / S
        elif base.family is Family.ASSEMBLY:
            p = math.exp(logp0 + k * math.log(lam) - math.lgamma(k + 1)) if lam > 0 else float(k == 0)
        else:
            p = float(scaled_weight(base, j, k)) * float(x) ** (j * k) / float(S)
        pmf.append(p)
        cum += p
        k += 1
        if cap is not None and k > cap:
            break
        remaining = 1 - cum
        if remaining < LIMIT_TAIL and (base.family is not Family.ASSEMBLY or k > lam):
            break
    tail = 1 - cum
    if not exact:
        tail = max(tail, 0.0)
    return ComponentLaw(j, rho_q, tuple(pmf), tail, exact)


def limit_law(spec: AnySpec, rho, l: int) -> CountLawTable:
    """Product of the tilted component laws for ``j = 1..l``."""
    if l < 1:
        raise DomainError(f"l must be >= 1, got {l}")
    laws = tuple(tilted_component_law(spec, rho, j) for j in range(1, l + 1))
    # entries below LIMIT_FLOOR are dropped and counted in the truncation mass
    cells = [((), 1.0)]
    for law in laws:
        pmf = [float(v) for v in law.pmf]
        cells = [(key + (k,), v * pk) for key, v in cells for k, pk in enumerate(pmf) if v * pk >= LIMIT_FLOOR]
    entries = dict(cells)
    mass = max(0.0, 1.0 - math.fsum(entries.values()))
    return CountLawTable(None, l, entries, LawKind.LIMIT, mass, laws)


def tv_distance(a: CountLawTable, b: CountLawTable):
    """Total variation distance; the truncation masses enter as an upper-bound slack."""
    if a.l != b.l:
        raise DomainError(f"laws of different dimension: l={a.l} vs l={b.l}")
    keys = set(a.entries) | set(b.entries)
    if a.kind is LawKind.EXACT and b.kind is LawKind.EXACT:
        s = sum((abs(a.entries.get(k, 0) - b.entries.get(k, 0)) for k in keys), Fraction(0))
        return s / 2
    s = math.fsum(abs(float(a.entries.get(k, 0)) - float(b.entries.get(k, 0))) for k in keys)
    return 0.5 * s + 0.5 * (float(a.truncation_mass) + float(b.truncation_mass))
