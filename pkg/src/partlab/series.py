"""Truncated power series with exact rational coefficients, plus a log-space
float mirror for long horizons.

The generating functions of interest are

    g~(x)  = prod_{j>=1} S~_j(x)        (coefficients c~_n)
    g~_l(x) = prod_{j>l}  S~_j(x)        (coefficients T~^(l)_n)

with ``S~_j(x) = sum_k a~_k^(j) x^(jk)``.  Multisets and selections are built
over the integers in the variable ``p*x`` and rescaled at the end; assemblies go
through the exponential recurrence since ``prod exp(a_j x^j) = exp(sum a_j x^j)``.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, TruncationError, WorkLimitError
from .limits import bit_budget
from .weights import (
    AnySpec,
    Family,
    component_weights,
    log_abs,
    unwrap,
)


class Series:
    """Immutable truncated power series ``d_0 + d_1 x + ... + d_N x^N``."""

    __slots__ = ("_c",)

    def __init__(self, coeffs: Iterable):
        c = tuple(coeffs)
        if not c:
            raise ValueError("a series needs at least the constant coefficient")
        for v in c:
            if isinstance(v, float):
                raise TypeError("Series holds exact rationals; use LogSeries for floats")
        self._c = c

    @classmethod
    def one(cls, N: int) -> "Series":
        return cls([1] + [0] * N)

    @property
    def N(self) -> int:
        return len(self._c) - 1

    @property
    def coeffs(self) -> tuple:
        return self._c

    @property
    def nonnegative(self) -> bool:
        return all(v >= 0 for v in self._c)

    def __len__(self):
        return len(self._c)

    def __getitem__(self, n):
        return self._c[n]

    def __iter__(self):
        return iter(self._c)

    def __eq__(self, other):
        if isinstance(other, Series):
            return self._c == other._c
        return NotImplemented

    def __hash__(self):
        return hash(self._c)

    def __repr__(self):
        head = ", ".join(str(v) for v in self._c[:6])
        more = ", ..." if len(self._c) > 6 else ""
        return f"Series([{head}{more}], N={self.N})"

    def truncate(self, N: int) -> "Series":
        _need(self, N)
        return Series(self._c[: N + 1])

    def __mul__(self, other):
        if isinstance(other, Series):
            return cauchy_product(self, other, min(self.N, other.N))
        return Series(v * other for v in self._c)

    __rmul__ = __mul__

    def __add__(self, other):
        N = min(self.N, other.N)
        return Series(a + b for a, b in zip(self._c[: N + 1], other._c[: N + 1]))

    def __sub__(self, other):
        N = min(self.N, other.N)
        return Series(a - b for a, b in zip(self._c[: N + 1], other._c[: N + 1]))


def _need(f: Series, N: int) -> None:
    if f.N < N:
        raise TruncationError(f"series truncated at order {f.N}, order {N} needed")


def as_series(coeffs: Sequence, N: int | None = None) -> Series:
    """Pad or cut a coefficient list into a Series of order ``N``."""
    c = list(coeffs)
    if N is None:
        N = len(c) - 1
    c = c[: N + 1] + [0] * (N + 1 - len(c))
    return Series(c)


# ---------------------------------------------------------------------------
# algebra

def cauchy_product(f: Series, g: Series, N: int) -> Series:
    _need(f, N)
    _need(g, N)
    a, b = f.coeffs, g.coeffs
    nz = [(i, v) for i, v in enumerate(a[: N + 1]) if v]
    out = []
    for n in range(N + 1):
        s = 0
        for i, v in nz:
            if i > n:
                break
            w = b[n - i]
            if w:
                s += v * w
        out.append(s)
    return Series(out)


def series_exp(q: Series, N: int) -> Series:
    """``exp(q)`` via ``n e_n = sum_{k=1}^n k q_k e_{n-k}``."""
    _need(q, N)
    if q[0] != 0:
        raise DomainError("series_exp needs a zero constant term")
    kq = [(k, k * q[k]) for k in range(1, N + 1) if q[k]]
    e = [Fraction(1)]
    for n in range(1, N + 1):
        s = 0
        for k, v in kq:
            if k > n:
                break
            s += v * e[n - k]
        e.append(Fraction(s) / n)
    return Series(e)


def series_log(f: Series, N: int) -> Series:
    """``log(f)`` for ``f_0 = 1``; the inverse of :func:`series_exp`."""
    _need(f, N)
    if f[0] != 1:
        raise DomainError("series_log needs constant term 1")
    out = [Fraction(0)]
    for n in range(1, N + 1):
        s = Fraction(0)
        for k in range(1, n):
            if out[k] and f[n - k]:
                s += k * out[k] * f[n - k]
        out.append(f[n] - s / n)
    return Series(out)


def series_divide(f: Series, g: Series, N: int) -> Series:
    _need(f, N)
    _need(g, N)
    g0 = g[0]
    if g0 == 0:
        raise DomainError("division by a series with zero constant term")
    gnz = [(k, g[k]) for k in range(1, N + 1) if g[k]]
    h = []
    for n in range(N + 1):
        s = f[n]
        for k, v in gnz:
            if k > n:
                break
            s -= v * h[n - k]
        h.append(Fraction(s) / g0 if g0 != 1 else s)
    return Series(h)


# ---------------------------------------------------------------------------
# generating functions of a spec

def sj_series(spec: AnySpec, j: int, N: int) -> Series:
    """``S~_j(x) = sum_k a~_k^(j) x^(jk)`` truncated at ``N``."""
    spec.require_exact()
    out = [Fraction(0)] * (N + 1)
    for k, w in enumerate(component_weights(spec, j, N // j)):
        out[j * k] = w
    return Series(out)


_CACHE_SIZE = 128
_product_cache: OrderedDict = OrderedDict()
_cache_lock = threading.Lock()


def _bits(v) -> int:
    if isinstance(v, int):
        return v.bit_length()
    return v.numerator.bit_length() + v.denominator.bit_length()


def _check_bits(coeffs: list, what: str) -> None:
    estimate = _bits(coeffs[-1]) * len(coeffs)
    if estimate > bit_budget():
        raise WorkLimitError(
            f"{what}: exact coefficients would hold about {estimate} bits, above the budget "
            f"{bit_budget()} (lower N, use float mode, or raise PARTLAB_WORK_LIMIT)"
        )


def _product(spec: AnySpec, lo: int, N: int) -> Series:
    """Exact ``prod_{j=lo}^{N} S~_j`` truncated at ``N``."""
    spec.require_exact()
    key = (spec, lo)
    with _cache_lock:
        hit = _product_cache.get(key)
        if hit is not None and hit.N >= N:
            _product_cache.move_to_end(key)
            return hit.truncate(N)
    base, theta = unwrap(spec)
    fam = base.family
    what = f"generating function of {spec.label}"
    if fam is Family.ASSEMBLY:
        q = [Fraction(0)] * (N + 1)
        for j in range(lo, N + 1):
            q[j] = base.param(j) * theta**j
        if lo > 1:
            _product(spec, 1, N)  # primes the integer cache used by the tail shortcut
        result = _integer_exp(q, N, spec=spec, lo=lo)
        if result is None:
            result = series_exp(Series(q), N)
        _check_bits(list(result.coeffs), what)
    elif fam in (Family.MULTISET, Family.SELECTION):
        d = _integer_euler_product(base, lo, N, what)
        scale = base.p * theta
        out, power = [], Fraction(1)
        for v in d:
            out.append(v * power if v else Fraction(0))
            power *= scale
        result = Series(out)
    else:
        d = [Fraction(1)] + [Fraction(0)] * N
        for j in range(lo, N + 1):
            w = component_weights(spec, j, N // j)
            _sparse_multiply(d, j, w, N)
            if j & (j - 1) == 0:
                _check_bits(d, what)
        result = Series(d)
    with _cache_lock:
        _product_cache[key] = result
        _product_cache.move_to_end(key)
        while len(_product_cache) > _CACHE_SIZE:
            _product_cache.popitem(last=False)
    return result


_egf_cache: OrderedDict = OrderedDict()


def _egf_scale(q: list, max_scale_bits: int):
    egf = [Fraction(v) * math.factorial(k) for k, v in enumerate(q)]
    D = 1
    for v in egf:
        D = math.lcm(D, v.denominator)
        if D.bit_length() > max_scale_bits:
            return None, None
    return D, [(k, int(v * D**k)) for k, v in enumerate(egf) if k and v]


def _egf_exp(Q: list, N: int) -> list:
    E = [1]
    for n in range(1, N + 1):
        s, c, prev = 0, 1, 1  # c = C(n-1, k-1), advanced along the sparse k list
        for k, v in Q:
            if k > n:
                break
            while prev < k:
                c = c * (n - prev) // prev
                prev += 1
            s += c * v * E[n - k]
        E.append(s)
    return E


def _integer_exp(q: list, N: int, max_scale_bits: int = 256, spec=None, lo: int = 1) -> Series | None:
    """``exp(sum q_k x^k)`` in exponential-generating-function form over the integers.

    With ``Q_k = q_k k! D^k`` integral, ``E_n = n! D^n e_n`` satisfies
    ``E_n = sum_k C(n-1, k-1) Q_k E_{n-k}``; no gcd work until the final division.
    For a tail (``lo > 1``) of a spec whose full product is cached, the tail is
    the full product times ``exp(-sum_{k<lo} q_k x^k)``, whose coefficients are
    small.  Returns None when no small common scale ``D`` exists.
    """
    full = None
    if spec is not None and lo > 1:
        with _cache_lock:
            full = _egf_cache.get(spec)
        if full is not None and len(full[1]) <= N:
            full = None
    if full is not None:
        D, G, Qfull = full
        Qh = [(k, -v) for k, v in Qfull if k < lo]
        H = _egf_exp(Qh, N)
        E = []
        for n in range(N + 1):
            s, c = 0, 1
            for k in range(n + 1):
                if H[k]:
                    s += c * H[k] * G[n - k]
                c = c * (n - k) // (k + 1)
            E.append(s)
    else:
        if spec is not None and lo > 1:
            return None
        D, Q = _egf_scale(q, max_scale_bits)
        if D is None:
            return None
        E = _egf_exp(Q, N)
        if spec is not None:
            with _cache_lock:
                _egf_cache[spec] = (D, E, Q)
                _egf_cache.move_to_end(spec)
                while len(_egf_cache) > 8:
                    _egf_cache.popitem(last=False)
    out, scale = [], 1
    for n, v in enumerate(E):
        if n:
            scale *= n * D
        out.append(Fraction(v, scale))
    return Series(out)


def _sparse_multiply(d: list, j: int, w: list, N: int) -> None:
    """In place ``d <- d * sum_k w_k x^(jk)`` with ``w_0 == 1``; touches only
    exponents reached by multiples of ``j``."""
    terms = [(k * j, c) for k, c in enumerate(w) if k and c and k * j <= N]
    if not terms:
        return
    for n in range(N, j - 1, -1):
        s = d[n]
        for shift, c in terms:
            if shift > n:
                break
            v = d[n - shift]
            if v:
                s += c * v
        d[n] = s


def _integer_euler_product(spec, lo: int, N: int, what: str) -> list:
    """Coefficients of ``prod_{j=lo}^N (1 -+ x^j)^(-+m_j)`` over the integers."""
    multiset = spec.family is Family.MULTISET
    d = [1] + [0] * N
    for j in range(lo, N + 1):
        m = spec.param(j)
        if not m:
            continue
        if m == 1:
            if multiset:
                for n in range(j, N + 1):
                    d[n] += d[n - j]
            else:
                for n in range(N, j - 1, -1):
                    d[n] += d[n - j]
        else:
            kmax = N // j if multiset else min(m, N // j)
            w = [comb(m + k - 1, k) if multiset else comb(m, k) for k in range(kmax + 1)]
            _sparse_multiply(d, j, w, N)
        if j & (j - 1) == 0:
            _check_bits(d, what)
    return d


def g_tilde(spec: AnySpec, N: int) -> Series:
    """Coefficients ``c~_0 .. c~_N``."""
    return _product(spec, 1, N)


def tail_series(spec: AnySpec, l: int, N: int) -> Series:
    """Coefficients ``T~^(l)_0 .. T~^(l)_N`` (``l = 0`` gives ``g~``)."""
    if l < 0:
        raise DomainError(f"l must be >= 0, got {l}")
    if l >= N:
        return Series.one(N)
    return _product(spec, l + 1, N)


def head_series(spec: AnySpec, l: int, N: int) -> Series:
    """``g~^(l) = prod_{j<=l} S~_j`` truncated at ``N``."""
    d = [Fraction(1)] + [Fraction(0)] * N
    for j in range(1, min(l, N) + 1):
        _sparse_multiply(d, j, component_weights(spec, j, N // j), N)
    return Series(d)


@dataclass(frozen=True)
class ScaledTables:
    c_tilde: Series
    t_tilde: dict = field(default_factory=dict)
    rho_hint: Fraction | None = None

    @property
    def N(self) -> int:
        return self.c_tilde.N


def scaled_tables(spec: AnySpec, N: int, ls: Iterable[int] = (), rho_hint=None) -> ScaledTables:
    return ScaledTables(
        c_tilde=g_tilde(spec, N),
        t_tilde={l: tail_series(spec, l, N) for l in sorted(set(ls))},
        rho_hint=rho_hint,
    )


# ---------------------------------------------------------------------------
# evaluation

class SjClosedForm:
    """Closed form of ``S~_j`` (or of ``prod_{j in js} S~_j``) as a function of rho."""

    def __init__(self, spec: AnySpec, js):
        self.spec = spec
        self.js = (js,) if isinstance(js, int) else tuple(js)

    def radius(self):
        base, theta = unwrap(self.spec)
        if base.family is Family.MULTISET and any(base.param(j) for j in self.js):
            return 1 / (base.p * theta)
        return math.inf

    def evaluate(self, rho):
        base, theta = unwrap(self.spec)
        rho = Fraction(rho) if not isinstance(rho, float) else rho
        value, err = Fraction(1), 0.0
        for j in self.js:
            v, e = _sj_at(base, theta, j, rho)
            if isinstance(v, float) or isinstance(value, float):
                err = abs(value) * e + abs(v) * err + err * e
            value = value * v
        return value, err


def _sj_at(base, theta, j, rho):
    fam = base.family
    m = base.param(j)
    if rho == 0:
        return Fraction(1), 0.0
    x = theta * rho
    if fam is Family.ASSEMBLY:
        arg = float(m) * float(x) ** j
        v = math.exp(arg)
        return v, v * 4e-16 * max(1.0, arg)
    if fam is Family.MULTISET:
        if not m:
            return Fraction(1), 0.0
        y = (base.p * x) ** j
        if y >= 1:
            raise DomainError(f"S~_{j} diverges at rho={rho}: p*rho >= 1")
        return (1 - y) ** (-m), 0.0
    if fam is Family.SELECTION:
        return (1 + (base.p * x) ** j) ** m, 0.0
    w = m
    return sum(Fraction(wk, w[0]) * x ** (j * k) for k, wk in enumerate(w)), 0.0


def eval_at(f, rho, majorant: tuple | None = None):
    """Value of ``f`` at ``rho`` and an error bound, in the style of ``(value, abserr)``.

    Closed forms (see :class:`SjClosedForm`) are exact for rational families and
    float for assemblies.  A truncated :class:`Series` yields its partial sum; the
    error is ``None`` unless a geometric majorant ``(C, r)`` with ``|d_n| <= C r^n``
    is supplied.
    """
    if hasattr(f, "evaluate"):
        return f.evaluate(rho)
    if not isinstance(f, Series):
        raise TypeError(f"cannot evaluate {type(f).__name__}")
    if isinstance(rho, float):
        s = math.fsum(float(c) * rho**n for n, c in enumerate(f.coeffs))
    else:
        rho = Fraction(rho)
        s, power = Fraction(0), Fraction(1)
        for c in f.coeffs:
            if c:
                s += c * power
            power *= rho
    if majorant is None:
        return s, None
    C, r = majorant
    t = float(r) * float(rho)
    if t >= 1:
        return s, math.inf
    return s, float(C) * t ** (f.N + 1) / (1 - t)


# ---------------------------------------------------------------------------
# log-space float mode

@dataclass(frozen=True)
class LogSeries:
    """Coefficients stored as ``ln d_n`` (``-inf`` for zeros); nonnegative series only."""

    logs: np.ndarray

    @property
    def N(self) -> int:
        return len(self.logs) - 1

    def __len__(self):
        return len(self.logs)

    def __getitem__(self, n):
        return self.logs[n]

    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.logs)

    @classmethod
    def from_series(cls, f: Series) -> "LogSeries":
        if not f.nonnegative:
            raise DomainError("log-space series need nonnegative coefficients")
        return cls(np.array([log_abs(v) for v in f.coeffs]))


def _logsumexp(t: np.ndarray) -> float:
    m = t.max()
    if m == -np.inf:
        return -np.inf
    return m + math.log(np.exp(t - m).sum())


def log_cauchy_product(f: LogSeries, g: LogSeries, N: int) -> LogSeries:
    if f.N < N or g.N < N:
        raise TruncationError(f"log series shorter than order {N}")
    a, b = f.logs, g.logs
    return LogSeries(np.array([_logsumexp(a[: n + 1] + b[n::-1]) for n in range(N + 1)]))


def log_series_exp(lkq: np.ndarray, N: int) -> LogSeries:
    """``exp(q)`` for nonnegative ``q`` given ``lkq[k] = ln(k q_k)`` (index 0 ignored)."""
    le = np.full(N + 1, -np.inf)
    le[0] = 0.0
    for n in range(1, N + 1):
        le[n] = _logsumexp(lkq[1 : n + 1] + le[n - 1 :: -1]) - math.log(n)
    return LogSeries(le)


def log_tail_series(spec: AnySpec, l: int, N: int) -> LogSeries:
    """Float mirror of :func:`tail_series`: ``ln T~^(l)_n`` for ``n <= N``."""
    base, theta = unwrap(spec)
    fam = base.family
    lo = l + 1
    ltheta = math.log(theta) if theta else -math.inf
    if lo > N:
        out = np.full(N + 1, -np.inf)
        out[0] = 0.0
        return LogSeries(out)
    if fam is Family.ASSEMBLY:
        lkq = np.full(N + 1, -np.inf)
        for j in range(lo, N + 1):
            lkq[j] = math.log(j) + log_abs(base.param(j)) + j * ltheta
        return log_series_exp(lkq, N)
    if fam is Family.MULTISET:
        # ln g~ = sum_n m*_n x^n with m*_n = P^n sum_{dk=n, d>l} m_d / k >= 0
        lp = math.log(base.p) + ltheta
        lstar = np.full(N + 1, -np.inf)
        for d in range(lo, N + 1):
            m = base.param(d)
            if not m:
                continue
            ks = np.arange(1, N // d + 1)
            np.logaddexp.at(lstar, d * ks, math.log(m) + d * ks * lp - np.log(ks))
        lkq = lstar + np.log(np.maximum(np.arange(N + 1), 1))
        return log_series_exp(lkq, N)
    # selections and custom tables: incremental product of nonnegative factors
    acc = np.full(N + 1, -np.inf)
    acc[0] = 0.0
    for j in range(lo, N + 1):
        if fam is Family.SELECTION:
            m = base.param(j)
            lp = j * (math.log(base.p) + ltheta)
            kmax = min(m, N // j)
            lw = [math.log(comb(m, k)) + k * lp for k in range(kmax + 1)]
        else:
            w = base.param(j)
            lw = [log_abs(Fraction(wk, w[0])) + j * k * ltheta for k, wk in enumerate(w) if j * k <= N]
        old = acc.copy()
        for k in range(1, len(lw)):
            if lw[k] == -math.inf:
                continue
            s = j * k
            acc[s:] = np.logaddexp(acc[s:], lw[k] + old[: N + 1 - s])
    return LogSeries(acc)


def log_g_tilde(spec: AnySpec, N: int) -> LogSeries:
    return log_tail_series(spec, 0, N)
