"""Reversible coagulation-fragmentation chains on partitions of n.

A coagulation merges one cluster of size i with one of size j; a fragmentation
splits a cluster of size i+j into sizes i and j (one transition per unordered
pair {i, j}).  Reversibility with respect to mu_n only fixes the ratio

    q(eta; i, j) = u_c(eta -> eta^(i,j)) / u_f(eta^(i,j) -> eta) = mu_n(eta^(i,j)) / mu_n(eta),

so a gauge is needed.  Fragmentation runs at unit rate per cluster:
``psi = 1`` in mean-field mode and ``u_f = k_{i+j}`` in ratio-gauge mode.
"""

from __future__ import annotations

import enum
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, ReducibleChainError
from .limits import ENUMERATION_LIMIT, SIMULATION_LIMIT, STATIONARY_LIMIT, check_enumeration
from .measure import PartitionState, structure_weight
from .oracle import enumerate_partitions
from .weights import Family, WeightSpec, scaled_weight


class RateMode(enum.Enum):
    MEANFIELD = "meanfield"
    RATIO = "ratio"


class Kind(enum.Enum):
    COAG = "coag"
    FRAG = "frag"


@dataclass(frozen=True)
class Transition:
    source: PartitionState
    kind: Kind
    i: int
    j: int
    target: PartitionState
    rate: Fraction


def _state(eta) -> PartitionState:
    return eta if isinstance(eta, PartitionState) else PartitionState(tuple(eta))


def coagulate(eta, i: int, j: int) -> PartitionState:
    k = list(_state(eta).k)
    k[i - 1] -= 1
    k[j - 1] -= 1
    k[i + j - 1] += 1
    if min(k) < 0:
        raise DomainError(f"no clusters of sizes {i} and {j} to merge in {_state(eta)}")
    return PartitionState(tuple(k))


def fragment(eta, i: int, j: int) -> PartitionState:
    k = list(_state(eta).k)
    k[i + j - 1] -= 1
    k[i - 1] += 1
    k[j - 1] += 1
    if min(k) < 0:
        raise DomainError(f"no cluster of size {i + j} to split in {_state(eta)}")
    return PartitionState(tuple(k))


def _check_pair(eta: PartitionState, i: int, j: int) -> None:
    if i < 1 or j < 1 or i + j > eta.n:
        raise DomainError(f"need i, j >= 1 and i + j <= n, got i={i}, j={j}, n={eta.n}")
    if i != j and (eta[i] < 1 or eta[j] < 1):
        raise DomainError(f"coagulating sizes {i} != {j} needs k_i, k_j > 0 in {eta}")
    if i == j and eta[i] < 2:
        raise DomainError(f"coagulating two clusters of size {i} needs k_{i} >= 2 in {eta}")


def q_ratio(spec, eta, i: int, j: int) -> Fraction:
    """``mu_n(eta^(i,j)) / mu_n(eta)`` from scaled weights; the normalisers cancel."""
    eta = _state(eta)
    _check_pair(eta, i, j)
    s = i + j
    if i != j:
        num = scaled_weight(spec, i, eta[i] - 1) * scaled_weight(spec, j, eta[j] - 1)
        den = scaled_weight(spec, i, eta[i]) * scaled_weight(spec, j, eta[j])
    else:
        num = scaled_weight(spec, i, eta[i] - 2)
        den = scaled_weight(spec, i, eta[i])
    num *= scaled_weight(spec, s, eta[s] + 1)
    den *= scaled_weight(spec, s, eta[s])
    if den == 0:
        raise DomainError(f"{eta} has zero mass, so q is undefined there")
    return Fraction(num) / den


def _V(eta, i, j):
    s = i + j
    if i != j:
        return Fraction(eta[i] * eta[j], eta[s] + 1)
    return Fraction(eta[i] * (eta[i] - 1), eta[s] + 1)


def q_assembly(spec: WeightSpec, eta, i: int, j: int) -> Fraction:
    """``V * a_{i+j} / (a_i a_j)``."""
    eta = _state(eta)
    _check_pair(eta, i, j)
    a = spec.param
    return _V(eta, i, j) * Fraction(a(i + j)) / (Fraction(a(i)) * a(j))


def q_multiset(spec: WeightSpec, eta, i: int, j: int) -> Fraction:
    eta = _state(eta)
    _check_pair(eta, i, j)
    m, s = spec.param, i + j
    if i != j:
        factor = Fraction(m(s) + eta[s], (m(i) + eta[i] - 1) * (m(j) + eta[j] - 1))
    else:
        factor = Fraction(m(s) + eta[s], (m(i) + eta[i] - 1) * (m(i) + eta[i] - 2))
    return _V(eta, i, j) * factor


def q_selection(spec: WeightSpec, eta, i: int, j: int) -> Fraction:
    eta = _state(eta)
    _check_pair(eta, i, j)
    m, s = spec.param, i + j
    if i != j:
        factor = Fraction(m(s) - eta[s], (m(i) - eta[i] + 1) * (m(j) - eta[j] + 1))
    else:
        factor = Fraction(m(s) - eta[s], (m(i) - eta[i] + 1) * (m(i) - eta[i] + 2))
    return _V(eta, i, j) * factor


@dataclass(frozen=True)
class CfpModel:
    """A chain on the support of mu_n.

    ``perturb`` maps ``(state tuple, kind, i, j)`` to a factor applied to that
    one rate; it exists to build negative controls.
    """

    n: int
    spec: WeightSpec
    mode: RateMode = RateMode.RATIO
    perturb: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        mode = RateMode(self.mode) if not isinstance(self.mode, RateMode) else self.mode
        object.__setattr__(self, "mode", mode)
        base = self.spec
        if mode is RateMode.MEANFIELD:
            if base.family is not Family.ASSEMBLY:
                raise DomainError("mean-field rates are defined for assemblies only")
            for j in range(1, self.n + 1):
                if not base.param(j) > 0:
                    raise DomainError(f"mean-field rates need a_j > 0; a_{j} = {base.param(j)}")

    @property
    def gauge(self) -> str:
        if self.mode is RateMode.MEANFIELD:
            return "unit single-fragmentation rate (psi = 1), phi(i,j) = a_{i+j}/(a_i a_j)"
        return "unit per-cluster fragmentation (u_f = k_{i+j}), u_c = q * k'_{i+j}"

    def weight(self, eta) -> Fraction:
        return structure_weight(self.spec, eta)

    def phi(self, i: int, j: int) -> Fraction:
        a = self.spec.param
        return Fraction(a(i + j)) / (Fraction(a(i)) * a(j))

    def _factor(self, eta, kind, i, j):
        return self.perturb.get((eta.k, kind, i, j), 1) if self.perturb else 1


def build_rates(model: CfpModel, eta) -> list:
    """All transitions out of ``eta`` with positive rate."""
    eta = _state(eta)
    if eta.n != model.n:
        raise DomainError(f"{eta} is not a state of the chain on n = {model.n}")
    out = []
    n = model.n
    for s in range(2, n + 1):
        for i in range(1, s // 2 + 1):
            j = s - i
            # coagulation i + j -> s
            if (i != j and eta[i] and eta[j]) or (i == j and eta[i] >= 2):
                target = coagulate(eta, i, j)
                if model.mode is RateMode.MEANFIELD:
                    pairs = eta[i] * eta[j] if i != j else eta[i] * (eta[i] - 1)
                    rate = pairs * model.phi(i, j)
                elif model.weight(target):
                    rate = q_ratio(model.spec, eta, i, j) * target[s]
                else:
                    rate = Fraction(0)
                rate *= model._factor(eta, Kind.COAG, i, j)
                if rate:
                    out.append(Transition(eta, Kind.COAG, i, j, target, Fraction(rate)))
            # fragmentation s -> i + j
            if eta[s]:
                target = fragment(eta, i, j)
                if model.mode is RateMode.RATIO and not model.weight(target):
                    continue
                rate = Fraction(eta[s]) * model._factor(eta, Kind.FRAG, i, j)
                if rate:
                    out.append(Transition(eta, Kind.FRAG, i, j, target, rate))
    return out


def support(model: CfpModel, limit: int = ENUMERATION_LIMIT) -> list:
    """States of positive mass, in canonical order."""
    return [eta for eta in enumerate_partitions(model.n, limit) if model.weight(eta)]


@dataclass(frozen=True)
class Violation:
    lower: PartitionState  # state before coagulation
    upper: PartitionState  # state after coagulation
    i: int
    j: int
    lhs: Fraction  # mu(lower) * u_c(lower -> upper)
    rhs: Fraction  # mu(upper) * u_f(upper -> lower)


def check_detailed_balance(model: CfpModel, limit: int = ENUMERATION_LIMIT) -> list:
    """Exact detailed-balance check over every coagulation/fragmentation pair; returns violations."""
    check_enumeration(model.n, limit, "detailed-balance check")
    states = support(model, limit)
    weights = {eta: model.weight(eta) for eta in states}
    pairs: dict = {}
    for eta in states:
        for t in build_rates(model, eta):
            if t.kind is Kind.COAG:
                key = (eta, t.i, t.j)
                pairs.setdefault(key, [t.target, 0, 0])[1] = t.rate
            else:
                key = (t.target, t.i, t.j)
                pairs.setdefault(key, [eta, 0, 0])[2] = t.rate
    out = []
    for (lower, i, j), (upper, uc, uf) in pairs.items():
        lhs = weights.get(lower, 0) * uc
        rhs = weights.get(upper, 0) * uf
        if lhs != rhs:
            out.append(Violation(lower, upper, i, j, lhs, rhs))
    return out


def meanfield_witness(model: CfpModel, limit: int = ENUMERATION_LIMIT):
    """Look for two states where ``u_c / (number of pairs)`` differs for the same (i, j).

    Returns None when the coagulation rates factor as in a mean-field model,
    else ``(i, j, eta1, value1, eta2, value2)``.
    """
    seen = {}
    for eta in support(model, limit):
        for t in build_rates(model, eta):
            if t.kind is not Kind.COAG:
                continue
            pairs = eta[t.i] * eta[t.j] if t.i != t.j else eta[t.i] * (eta[t.i] - 1)
            v = t.rate / pairs
            prev = seen.setdefault((t.i, t.j), (eta, v))
            if prev[1] != v:
                return (t.i, t.j, prev[0], prev[1], eta, v)
    return None


# ---------------------------------------------------------------------------
# exact stationary law

@dataclass(frozen=True)
class StationaryResult:
    states: tuple
    pi: tuple
    residual_zero: bool
    mu: tuple

    @property
    def matches_mu(self) -> bool:
        return self.pi == self.mu


def _reachable(start: int, adj: list) -> set:
    seen = {start}
    todo = deque([start])
    while todo:
        u = todo.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return seen


def stationary_exact(model: CfpModel, limit: int = STATIONARY_LIMIT) -> StationaryResult:
    """Solve ``pi Q = 0, sum pi = 1`` by exact elimination on the support of mu_n."""
    check_enumeration(model.n, limit, "exact stationary solve")
    states = support(model, ENUMERATION_LIMIT)
    index = {eta: a for a, eta in enumerate(states)}
    S = len(states)
    rows = [dict() for _ in range(S)]  # rows[a][b] = rate a -> b
    for a, eta in enumerate(states):
        for t in build_rates(model, eta):
            b = index.get(t.target)
            if b is None:
                continue
            rows[a][b] = rows[a].get(b, 0) + t.rate
    fwd = [list(r) for r in rows]
    bwd = [[] for _ in range(S)]
    for a, r in enumerate(rows):
        for b in r:
            bwd[b].append(a)
    if len(_reachable(0, fwd)) < S or len(_reachable(0, bwd)) < S:
        raise ReducibleChainError(
            f"the chain on the support of mu_{model.n} is reducible ({S} states); "
            "no unique stationary law"
        )
    # columns of Q^T: equation b is sum_a pi_a Q[a][b] = 0
    A = [[Fraction(0)] * S for _ in range(S)]
    for a, r in enumerate(rows):
        out = sum(r.values(), Fraction(0))
        A[a][a] -= out
        for b, v in r.items():
            A[b][a] += v
    rhs = [Fraction(0)] * S
    A[-1] = [Fraction(1)] * S  # replace one balance equation by normalisation
    rhs[-1] = Fraction(1)
    pi = _solve(A, rhs)
    residual = []
    for b in range(S):
        acc = Fraction(0)
        for a, r in enumerate(rows):
            if b in r:
                acc += pi[a] * r[b]
        acc -= pi[b] * sum(rows[b].values(), Fraction(0))
        residual.append(acc)
    weights = [model.weight(eta) for eta in states]
    total = sum(weights, Fraction(0))
    mu = tuple(w / total for w in weights)
    return StationaryResult(tuple(states), tuple(pi), all(v == 0 for v in residual), mu)


def _solve(A, b):
    S = len(A)
    M = [row[:] + [b[r]] for r, row in enumerate(A)]
    for col in range(S):
        piv = next((r for r in range(col, S) if M[r][col] != 0), None)
        if piv is None:
            raise ReducibleChainError("singular balance system")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(S):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[r][S] for r in range(S)]


# ---------------------------------------------------------------------------
# simulation

STATE_REPORT_LIMIT = 20
DEFAULT_BATCHES = 20
DEFAULT_SEED = 12345


@dataclass(frozen=True)
class SimulationReport:
    n: int
    t_max: float
    seed: int
    events: int
    initial: PartitionState
    time_scale: float  # rates were divided by this factor before sampling
    states: tuple = ()  # per-state mode
    occupation: tuple = ()
    stderr: tuple = ()
    histograms: dict = field(default_factory=dict)  # j -> {k: (fraction, stderr)}


def simulate(model: CfpModel, t_max: float, seed: int = DEFAULT_SEED, initial=None,
             batches: int = DEFAULT_BATCHES, l: int = 3, per_state: bool | None = None,
             limit: int = SIMULATION_LIMIT) -> SimulationReport:
    """Continuous-time simulation with exponential holding times.

    Occupation is the fraction of time spent in each state (or, for large n,
    with ``K_j = k`` for j <= l).  Standard errors come from ``batches`` equal
    time blocks.  The run is a deterministic function of ``seed``.
    """
    n = model.n
    check_enumeration(n, limit, "simulation")
    if t_max < 0:
        raise DomainError(f"t_max must be >= 0, got {t_max}")
    if batches < 2:
        raise DomainError("need at least two batches for standard errors")
    start = _state(initial) if initial is not None else PartitionState((0,) * (n - 1) + (1,))
    if start.n != n:
        raise DomainError(f"initial state {start} is not a partition of {n}")
    if not model.weight(start):
        raise DomainError(f"initial state {start} has zero mass under mu_{n}")
    if per_state is None:
        per_state = n <= STATE_REPORT_LIMIT

    cache: dict = {}
    exact_cache: dict = {}

    def exact_out(eta):
        hit = exact_cache.get(eta.k)
        if hit is None:
            trs = build_rates(model, eta)
            hit = ([t.target for t in trs], [t.rate for t in trs])
            exact_cache[eta.k] = hit
        return hit

    # a global power-of-two time rescaling keeps every rate inside float range
    shift = 0
    if per_state:
        for eta in support(model):
            for r in exact_out(eta)[1]:
                shift = max(shift, r.numerator.bit_length() - r.denominator.bit_length() - 900)
    scale = Fraction(2) ** shift if shift > 0 else Fraction(1)

    def out(eta):
        hit = cache.get(eta.k)
        if hit is None:
            targets, rates = exact_out(eta)
            try:
                fr = np.array([float(r / scale) for r in rates], dtype=float)
            except OverflowError:
                fr = None
            if fr is None or not np.all(np.isfinite(fr)):
                raise OverflowError("rates exceed float range; run in per-state mode to rescale")
            hit = (targets, np.cumsum(fr), float(fr.sum()) if len(fr) else 0.0)
            cache[eta.k] = hit
        return hit

    if shift > 0:
        warnings.warn(f"rates rescaled by 2^-{shift} to fit float range; times are in rescaled units",
                      RuntimeWarning, stacklevel=2)

    rng = np.random.default_rng(seed)
    edges = np.linspace(0.0, float(t_max), batches + 1)
    occ_time: list = [dict() for _ in range(batches)]

    def credit(key, t0, t1):
        # split [t0, t1) across batch boundaries
        if t1 <= t0:
            return
        b = min(int(np.searchsorted(edges, t0, side="right")) - 1, batches - 1)
        while t0 < t1 and b < batches:
            hi = min(t1, edges[b + 1]) if b < batches - 1 else t1
            d = occ_time[b]
            d[key] = d.get(key, 0.0) + (hi - t0)
            t0 = hi
            b += 1

    eta, t, events = start, 0.0, 0
    while True:
        targets, cum, total = out(eta)
        if total <= 0:
            credit(eta.k, t, t_max)
            break
        dt = rng.exponential(1.0 / total)
        if t + dt >= t_max:
            credit(eta.k, t, t_max)
            break
        credit(eta.k, t, t + dt)
        t += dt
        u = rng.random() * total
        idx = int(np.searchsorted(cum, u, side="right"))
        eta = targets[min(idx, len(targets) - 1)]
        events += 1

    width = np.diff(edges)
    if t_max == 0:
        occupation_batches = [{start.k: 1.0} for _ in range(batches)]
    else:
        occupation_batches = [{k: v / w for k, v in d.items()} for d, w in zip(occ_time, width)]

    def summarize(keys, extract):
        mat = np.array([[extract(d, k) for k in keys] for d in occupation_batches])
        mean = mat.mean(axis=0)
        se = mat.std(axis=0, ddof=1) / math.sqrt(batches)
        return mean, se

    if per_state:
        states = tuple(support(model))
        keys = [s.k for s in states]
        mean, se = summarize(keys, lambda d, k: d.get(k, 0.0))
        return SimulationReport(n, float(t_max), seed, events, start, float(scale), states,
                                tuple(float(v) for v in mean), tuple(float(v) for v in se))
    hists = {}
    for j in range(1, min(l, n) + 1):
        ks = sorted({key[j - 1] for d in occupation_batches for key in d})

        def ext(d, k, j=j):
            return sum(v for key, v in d.items() if key[j - 1] == k)

        mean, se = summarize(ks, ext)
        hists[j] = {k: (float(m), float(s)) for k, m, s in zip(ks, mean, se)}
    return SimulationReport(n, float(t_max), seed, events, start, float(scale), histograms=hists)
