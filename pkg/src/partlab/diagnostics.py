"""Ratio diagnostics, q^(l) comparison, Schur ratio checks and the convergence classifier.

All verdicts are heuristics.  Membership of a sequence in RT_rho (ratios
``d_{n-1}/d_n -> rho``) is a limit property; finite data can only be
consistent with it.  Reports keep the raw ratios so a reader can judge.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Sequence

import numpy as np

from .errors import DomainError
from .series import (
    LogSeries,
    Series,
    SjClosedForm,
    cauchy_product,
    eval_at,
    g_tilde,
    log_g_tilde,
    log_tail_series,
    series_exp,
    tail_series,
)
from .weights import AnySpec, Family, unwrap

DEFAULT_WINDOW = 25
DEFAULT_TOL = 1e-3
DEFAULT_N = 400
DEFAULT_FLOAT_N = 5000
# below this scale the window test becomes absolute rather than relative
SCALE_FLOOR = 1e-3
RICHARDSON_ORDER = 3
# relative noise assumed for ratios coming out of log-space coefficients
_FLOAT_NOISE = 1e-13


class Verdict(enum.Enum):
    RT = "RT"
    OSCILLATING = "Oscillating"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class RatioReport:
    ratios: tuple  # floats, r_n = d_{n-1}/d_n for n = offset, offset+1, ...
    offset: int
    window: int
    tol: float
    verdict: Verdict
    estimate: float | None = None
    rho_last: float | None = None
    fluctuation: float | None = None
    subseq_limits: tuple | None = None
    note: str = ""

    def rows(self):
        return [(self.offset + i, r) for i, r in enumerate(self.ratios)]

    def describe(self) -> str:
        if self.verdict is Verdict.RT:
            return f"RT({self.estimate:.6g})"
        if self.verdict is Verdict.OSCILLATING:
            even, odd = self.subseq_limits
            return f"Oscillating(even->{even:.6g}, odd->{odd:.6g})"
        return "Inconclusive" + (f" ({self.note})" if self.note else "")


def richardson(values: Sequence, n_last: int, order: int):
    """Richardson extrapolation of a sequence with a ``1/n`` expansion.

    Uses the last ``order + 1`` values, the final one sitting at index ``n_last``.
    Exact when the values are rationals.
    """
    K = min(order, len(values) - 1)
    if K <= 0:
        return values[-1]
    n = n_last - K
    tail = values[-(K + 1):]
    exact = all(isinstance(v, (int, Fraction)) for v in tail)
    acc = Fraction(0) if exact else 0.0
    for i, v in enumerate(tail):
        c = Fraction((n + i) ** K * (-1) ** (i + K), factorial(i) * factorial(K - i))
        acc += c * v if exact else float(c) * float(v)
    return acc


def _float_order(n_last: int, order: int) -> int:
    # keep the amplified float noise of the extrapolation under ~1e-7
    K = order
    while K > 0:
        amp = sum((n_last - K + i) ** K / (factorial(i) * factorial(K - i)) for i in range(K + 1))
        if amp * _FLOAT_NOISE <= 1e-7:
            break
        K -= 1
    return K


def _settles(values, tol) -> tuple[bool, float]:
    fl = max(values) - min(values)
    scale = max(abs(values[-1]), SCALE_FLOOR)
    return fl <= tol * scale, fl


def _growth_exponent(ratios, N, window, tol):
    """Decay exponent ``s`` of the ratio increments when they suggest ``r_n -> inf``.

    Increments decaying like ``n^-s`` with ``s <= 1`` sum to infinity.  Returns
    ``s`` when the tail is increasing and ``s`` stays below 1.25, else None.
    """
    half = N // 2
    if half - window < 1 or len(ratios) < N - half + window + 1:
        return None
    r = {N - i: v for i, v in enumerate(reversed(ratios))}
    tail = [r[n] for n in range(N - 2 * window, N + 1)]
    if any(b < a for a, b in zip(tail, tail[1:])):
        return None
    if r[N] <= r[half] * (1 + tol):
        return None
    inc_half = (r[half] - r[half - window]) / window
    inc_full = (r[N] - r[N - window]) / window
    if inc_half <= 0 or inc_full <= 0:
        return None
    s = math.log(inc_half / inc_full) / math.log(N / half)
    return s if s < 1.25 else None


def _coefficients(d):
    """Return ``(values, kind)`` where kind is 'exact', 'float' or 'log'."""
    if isinstance(d, LogSeries):
        return list(d.logs), "log"
    if isinstance(d, Series):
        return list(d.coeffs), "exact"
    vals = list(d)
    if all(isinstance(v, (int, Fraction)) for v in vals):
        return [Fraction(v) for v in vals], "exact"
    return [float(v) for v in vals], "float"


def ratio_report(d, window: int = DEFAULT_WINDOW, tol: float = DEFAULT_TOL) -> RatioReport:
    """Classify the ratio sequence ``d_{n-1}/d_n`` of a nonnegative sequence."""
    vals, kind = _coefficients(d)
    N = len(vals) - 1
    if window < 2:
        raise DomainError(f"window must be >= 2, got {window}")
    if N < 2 * window:
        raise DomainError(f"need at least {2 * window} ratios for window {window}, got {max(N, 0)}")
    if kind == "log":
        zero = [not math.isfinite(v) for v in vals]
    else:
        if any(v < 0 for v in vals):
            raise DomainError("ratio diagnostics need a nonnegative sequence")
        zero = [v == 0 for v in vals]
    last_zero = max((i for i, z in enumerate(zero) if z), default=-1)
    start = last_zero + 1
    if N - start < 2 * window:
        note = "coefficients vanish near the end (periodic or sparse support)"
        return RatioReport((), start + 1, window, tol, Verdict.INCONCLUSIVE, note=note)

    if kind == "exact":
        exact_r = [vals[n - 1] / vals[n] for n in range(start + 1, N + 1)]
        ratios = [float(r) for r in exact_r]
    elif kind == "log":
        exact_r = None
        ratios = [math.exp(vals[n - 1] - vals[n]) for n in range(start + 1, N + 1)]
    else:
        exact_r = None
        ratios = [vals[n - 1] / vals[n] for n in range(start + 1, N + 1)]
    offset = start + 1
    note = f"burn-in: ratios start at n={offset}" if start > 0 else ""

    last = ratios[-window:]
    ok, fl = _settles(last, tol)
    if ok:
        if exact_r is not None:
            est = float(richardson(exact_r, N, RICHARDSON_ORDER))
        else:
            est = float(richardson(ratios, N, _float_order(N, RICHARDSON_ORDER)))
        # trust the refinement only as far as the window drift, projected to
        # infinity at a 1/n rate, could carry the ratios
        reach = max(2 * fl * N / window, tol * max(ratios[-1], SCALE_FLOOR))
        if not math.isfinite(est) or abs(est - ratios[-1]) > reach:
            est = ratios[-1]
        est = max(est, 0.0)
        return RatioReport(tuple(ratios), offset, window, tol, Verdict.RT, est, ratios[-1], fl, None, note)

    # period-2 test on the last 2W ratios
    tail = ratios[-2 * window:]
    idx = list(range(N - 2 * window + 1, N + 1))
    even = [r for n, r in zip(idx, tail) if n % 2 == 0]
    odd = [r for n, r in zip(idx, tail) if n % 2 == 1]
    ok_e, _ = _settles(even, tol)
    ok_o, _ = _settles(odd, tol)
    lim = (even[-1], odd[-1])
    if ok_e and ok_o and abs(lim[0] - lim[1]) > tol * max(lim[0], lim[1], SCALE_FLOOR):
        return RatioReport(tuple(ratios), offset, window, tol, Verdict.OSCILLATING, None, ratios[-1], fl, lim, note)
    growth = _growth_exponent(ratios, N, window, tol)
    if growth is not None:
        return RatioReport(
            tuple(ratios), offset, window, tol, Verdict.RT, math.inf, ratios[-1], fl, None,
            f"ratios grow without bound (increments decay like n^-{growth:.2f})",
        )
    extra = "ratios did not settle within the window"
    return RatioReport(
        tuple(ratios), offset, window, tol, Verdict.INCONCLUSIVE, None, ratios[-1], fl, None,
        f"{note}; {extra}" if note else extra,
    )


# ---------------------------------------------------------------------------
# q^(l)

@dataclass(frozen=True)
class QlEmpirical:
    l: int
    values: tuple  # floats, T~^(l)_n / c~_n for n = 0..N
    window_average: float
    extrapolated: float


def q_l_empirical(spec: AnySpec, l: int, N: int, window: int = DEFAULT_WINDOW, mode: str = "exact") -> QlEmpirical:
    """The sequence ``T~^(l)_n / c~_n`` with its last-window average and a Richardson limit."""
    if l < 1:
        raise DomainError(f"l must be >= 1, got {l}")
    if mode == "exact":
        c = g_tilde(spec, N).coeffs
        t = tail_series(spec, l, N).coeffs
        if any(v == 0 for v in c):
            raise DomainError(f"c~_n = 0 at n = {c.index(0)}")
        exact = [tv / cv for tv, cv in zip(t, c)]
        values = [float(v) for v in exact]
        extrap = float(richardson(exact, N, RICHARDSON_ORDER))
    elif mode == "float":
        lc = log_g_tilde(spec, N).logs
        lt = log_tail_series(spec, l, N).logs
        if not np.all(np.isfinite(lc)):
            raise DomainError("c~_n = 0 encountered")
        values = [float(v) for v in np.exp(lt - lc)]
        extrap = float(richardson(values, N, _float_order(N, RICHARDSON_ORDER)))
    else:
        raise DomainError(f"mode must be 'exact' or 'float', got {mode!r}")
    w = values[-window:]
    # q^(l) >= 0; extrapolating a vanishing sequence can undershoot
    return QlEmpirical(l, tuple(values), math.fsum(w) / len(w), max(extrap, 0.0))


def q_l_closed(spec: AnySpec, l: int, rho):
    """``(prod_{j<=l} S~_j(rho))^{-1}``; zero when rho sits on or beyond the radius."""
    form = SjClosedForm(spec, range(1, l + 1))
    r = form.radius()
    if rho >= r:
        return 0.0
    value, _ = form.evaluate(rho)
    return 1 / value


# ---------------------------------------------------------------------------
# Schur's lemma

@dataclass(frozen=True)
class SchurReport:
    ratios: tuple  # d_n / d_n^(1), exact when both inputs are exact
    window_average: object
    f2_at_rho: object
    gap: object
    settled: bool
    fluctuation: float

    @property
    def non_settling(self) -> bool:
        return not self.settled


def schur_check(f1: Series, f2: Series, rho, N: int | None = None, window: int = DEFAULT_WINDOW,
                tol: float = DEFAULT_TOL, f2_at_rho=None) -> SchurReport:
    """Check numerically that ``[x^n](f1*f2) / [x^n]f1 -> f2(rho)``.

    The hypotheses (``f1`` in RT_rho, radius of ``f2`` beyond rho) are the
    caller's to assert; only the conclusion is checked.  ``f2_at_rho`` overrides
    the partial-sum value of ``f2`` when a closed form is known.
    """
    if N is None:
        N = min(f1.N, f2.N)
    f = cauchy_product(f1, f2, N)
    ratios = []
    for n in range(1, N + 1):
        if f1[n] == 0:
            raise DomainError(f"f1 has a zero coefficient at n = {n}")
        ratios.append(f[n] / f1[n])
    if f2_at_rho is None:
        f2_at_rho, _ = eval_at(f2, rho)
    w = ratios[-window:]
    exact = all(isinstance(v, (int, Fraction)) for v in w)
    avg = sum(w, Fraction(0)) / len(w) if exact else math.fsum(float(v) for v in w) / len(w)
    gap = abs(avg - f2_at_rho) if exact and not isinstance(f2_at_rho, float) else abs(float(avg) - float(f2_at_rho))
    wf = [float(v) for v in w]
    settled, fl = _settles(wf, tol)
    return SchurReport(tuple(ratios), avg, f2_at_rho, gap, settled, fl)


# ---------------------------------------------------------------------------
# star transformation

@dataclass(frozen=True)
class StarResult:
    mstar: tuple  # m*_0 .. m*_N
    verified: bool | None


def _param_seq(m, N):
    if callable(m):
        return [Fraction(m(j)) for j in range(1, N + 1)]
    seq = [Fraction(v) for v in m[:N]]
    return seq + [Fraction(0)] * (N - len(seq))


def euler_product(m, p, N: int) -> Series:
    """``prod_j (1 - (p x)^j)^{-m_j}`` truncated at ``N``, by direct multiplication."""
    ms = _param_seq(m, N)
    p = Fraction(p)
    d = [Fraction(1)] + [Fraction(0)] * N
    for j in range(1, N + 1):
        mj = ms[j - 1]
        if not mj:
            continue
        # generalized binomial coefficients C(m+k-1, k) p^{jk}
        w = [Fraction(1)]
        for k in range(1, N // j + 1):
            w.append(w[-1] * (mj + k - 1) / k * p**j)
        new = [Fraction(0)] * (N + 1)
        for i, di in enumerate(d):
            if di:
                for k, wk in enumerate(w):
                    if i + j * k > N:
                        break
                    new[i + j * k] += di * wk
        d = new
    return Series(d)


def star_transform(m, p, N: int, verify: bool = True) -> StarResult:
    """``m*_j = p^j * sum_{lk=j} m_l / k`` so that ``exp(sum m*_j x^j)`` is the Euler product."""
    ms = _param_seq(m, N)
    if any(v < 0 for v in ms):
        raise DomainError("star transform needs m_j >= 0")
    p = Fraction(p)
    out = [Fraction(0)] * (N + 1)
    for l in range(1, N + 1):
        if ms[l - 1]:
            for k in range(1, N // l + 1):
                out[l * k] += ms[l - 1] / k
    out = [v * p**j for j, v in enumerate(out)]
    verified = None
    if verify:
        verified = series_exp(Series(out), N).coeffs == euler_product(ms, p, N).coeffs
    return StarResult(tuple(out), verified)


# ---------------------------------------------------------------------------
# classification

class Classification(enum.Enum):
    CONVERGENT = "Convergent"
    DIVERGENT = "Divergent"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ClassificationResult:
    family: Family
    rho_hat: float | None
    threshold: float
    verdict: Classification
    report: RatioReport
    q_l_table: dict = field(default_factory=dict)
    evidence: str = ""

    @property
    def exit_code(self) -> int:
        return {Classification.CONVERGENT: 0, Classification.DIVERGENT: 3, Classification.INCONCLUSIVE: 4}[self.verdict]

    def record(self) -> dict:
        return {
            "family": self.family.value,
            "rho_hat": "" if self.rho_hat is None else repr(self.rho_hat),
            "threshold": "inf" if math.isinf(self.threshold) else repr(self.threshold),
            "verdict": self.verdict.value,
            "ratio_verdict": self.report.describe(),
            "window": str(self.report.window),
            "evidence": self.evidence,
        }


def _param_report(base, N, window, tol):
    # ratio report of m_j p^j, which shares its radius with g~ for multisets
    try:
        seq = [Fraction(0)] + [Fraction(base.param(j)) for j in range(1, N + 1)]
    except (TypeError, ValueError):
        return None
    try:
        return ratio_report(seq, window, tol)
    except DomainError:
        return None


def classify(spec: AnySpec, N: int | None = None, window: int = DEFAULT_WINDOW, tol: float = DEFAULT_TOL,
             mode: str = "exact", l_max: int = 5) -> ClassificationResult:
    """Convergent / Divergent / Inconclusive for the component-count process of ``spec``."""
    base, theta = unwrap(spec)
    if N is None:
        N = DEFAULT_N if mode == "exact" else DEFAULT_FLOAT_N
    if mode == "exact":
        base.require_exact()
        c = g_tilde(spec, N)
    elif mode == "float":
        c = log_g_tilde(spec, N)
    else:
        raise DomainError(f"mode must be 'exact' or 'float', got {mode!r}")
    rep = ratio_report(c, window, tol)
    fam = base.family
    threshold = math.inf
    if fam in (Family.MULTISET, Family.SELECTION):
        threshold = float(1 / (base.p * theta))
    rho = rep.estimate if rep.verdict is Verdict.RT else None
    verdict = Classification.INCONCLUSIVE
    evidence = f"c~ ratios: {rep.describe()}"
    if rho is not None and math.isinf(rho) and not math.isinf(threshold):
        rho = None
        evidence += " (growth heuristic ignored: the radius is at most 1/p)"

    if fam is Family.MULTISET:
        mrep = _param_report(base, N, window, tol)
        if mrep is not None and mrep.verdict is Verdict.RT and mrep.estimate >= 1 - tol:
            verdict = Classification.DIVERGENT
            rho = threshold
            evidence += f"; m ratios: {mrep.describe()} so g~ has radius 1/p"
        elif rho is not None:
            if abs(rho / threshold - 1) <= tol:
                verdict = Classification.DIVERGENT
            elif rho < threshold:
                verdict = Classification.CONVERGENT
        elif rep.verdict is Verdict.OSCILLATING:
            verdict = Classification.DIVERGENT
    elif fam is Family.SELECTION:
        if rho is not None and rho <= threshold * (1 + tol):
            verdict = Classification.CONVERGENT
        elif rep.verdict is Verdict.OSCILLATING:
            verdict = Classification.DIVERGENT
    elif fam is Family.ASSEMBLY:
        if rho is not None and math.isinf(rho):
            verdict = Classification.DIVERGENT
            evidence += "; g~ looks entire (RT with rho = inf)"
        elif rho is not None:
            verdict = Classification.CONVERGENT
        elif rep.verdict is Verdict.OSCILLATING:
            verdict = Classification.DIVERGENT
    else:
        if rep.verdict is Verdict.OSCILLATING or (rho is not None and math.isinf(rho)):
            verdict = Classification.DIVERGENT
        elif rho is not None:
            verdict = Classification.CONVERGENT

    table = {}
    if rho is not None and math.isfinite(rho) and l_max >= 1:
        for l in range(1, min(l_max, N - 1) + 1):
            emp = q_l_empirical(spec, l, N, window, mode)
            try:
                closed = float(q_l_closed(spec, l, rho))
            except (DomainError, OverflowError):
                closed = 0.0
            table[l] = (emp.extrapolated, closed)
        if fam is Family.CUSTOM and verdict is Classification.CONVERGENT:
            # without a family theorem, positivity of q^(l) decides
            if any(e < tol for e, _ in table.values()):
                verdict = Classification.DIVERGENT
                evidence += "; empirical q^(l) vanishes"
        mism = [l for l, (e, q) in table.items() if abs(e - q) > tol * max(abs(q), SCALE_FLOOR)]
        if verdict is Classification.CONVERGENT and mism:
            evidence += f"; q^(l) cross-check off by more than tol for l in {mism}"
    return ClassificationResult(fam, rho, threshold, verdict, rep, table, evidence)
