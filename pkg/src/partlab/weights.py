"""Structure specifications and their per-component laws.

A :class:`WeightSpec` fixes the distribution of every component count ``Z_j``.
Three families are built in:

* assemblies, ``Z_j ~ Poisson(a_j)``;
* multisets, ``Z_j ~ NegBin(m_j, p^j)``;
* selections, ``Z_j ~ Bin(m_j, p^j / (1 + p^j))``;

plus ``custom`` specs giving finite tables of unnormalised probabilities per
component size.  Everything exact is phrased through the *scaled* weights
``a_k / a_0``, which are rational whenever the parameters are.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, isqrt
from typing import Callable, Union

from .errors import DomainError, InexactSpecError
from .limits import check_work

Number = Union[int, Fraction, float]


class Family(enum.Enum):
    ASSEMBLY = "assembly"
    MULTISET = "multiset"
    SELECTION = "selection"
    CUSTOM = "custom"


class TailRule(enum.Enum):
    ZERO = "zero"
    REPEAT_LAST = "repeat-last"
    ERROR_BEYOND = "error-beyond"


@dataclass(frozen=True)
class Preset:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class RegularlyVarying:
    """Parameter sequence ``c * y**j * j**alpha``.

    For assemblies this is ``E Z_j`` itself.  For multisets and selections it is
    the type count ``m_j``, rounded to the nearest integer >= 1.
    """

    c: Fraction
    alpha: Fraction
    y: Fraction

    def __post_init__(self):
        for name in ("c", "alpha", "y"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))


@dataclass(frozen=True)
class Table:
    """Explicit parameters for ``j = 1 .. len(values)`` plus a tail rule.

    For the custom family each entry is itself a tuple of unnormalised
    probabilities ``(w_0, w_1, ...)`` for ``Z_j``.
    """

    values: tuple
    tail: TailRule = TailRule.ZERO


ParamGen = Union[Preset, RegularlyVarying, Table]


# ---------------------------------------------------------------------------
# presets

def _connected_graph_counts():
    counts = [0, 1]
    lock = threading.Lock()

    def count(n: int) -> int:
        with lock:
            while len(counts) <= n:
                m = len(counts)
                total = 2 ** comb(m, 2)
                for k in range(1, m):
                    total -= comb(m - 1, k - 1) * counts[k] * 2 ** comb(m - k, 2)
                counts.append(total)
            return counts[n]

    return count


connected_graphs = _connected_graph_counts()


def _oscillating(j: int) -> Fraction:
    if j % 2:
        return Fraction(1, j)
    return Fraction(1 + 2 ** (j + 1), j)


@dataclass(frozen=True)
class _PresetDef:
    kind: str  # "a" gives assembly rates, "m" gives type counts
    families: frozenset
    arity: int
    make: Callable[..., Callable[[int], Number]]
    check: Callable[..., None] = lambda *args: None


def _positive(name):
    def check(value):
        if value <= 0:
            raise DomainError(f"{name} must be positive, got {value}")
    return check


def _check_d(d):
    if d != int(d) or d < 1:
        raise DomainError(f"ideal_gas dimension must be a positive integer, got {d}")


def _check_b(b):
    if not 0 < b < 1:
        raise DomainError(f"mapping_patterns needs 0 < b < 1, got {b}")


_A = frozenset({Family.ASSEMBLY})
_MS = frozenset({Family.MULTISET})
_SEL = frozenset({Family.SELECTION})
_BOTH = frozenset({Family.MULTISET, Family.SELECTION})

PRESETS: dict[str, _PresetDef] = {
    "permutations": _PresetDef("a", _A, 0, lambda: lambda j: Fraction(1, j)),
    "ewens": _PresetDef("a", _A, 1, lambda th: lambda j: th / j, _positive("theta")),
    "set_partitions": _PresetDef("a", _A, 0, lambda: lambda j: Fraction(1, factorial(j))),
    "graphs": _PresetDef("a", _A, 0, lambda: lambda j: Fraction(connected_graphs(j), factorial(j))),
    "forests_labelled": _PresetDef("a", _A, 0, lambda: lambda j: Fraction(j ** (j - 1), factorial(j))),
    "oscillating_demo": _PresetDef("a", _A, 0, lambda: _oscillating),
    "integer_partitions": _PresetDef("m", _MS, 0, lambda: lambda j: 1),
    "plane_partitions": _PresetDef("m", _MS, 0, lambda: lambda j: j),
    "bose": _PresetDef("m", _MS, 1, lambda al: lambda j: _power(j, al), _positive("alpha")),
    "mapping_patterns": _PresetDef("m", _MS, 1, lambda b: lambda j: 1 / (2 * j * b**j), _check_b),
    "distinct_parts": _PresetDef("m", _SEL, 0, lambda: lambda j: 1),
    "fermi": _PresetDef("m", _SEL, 1, lambda al: lambda j: _power(j, al), _positive("alpha")),
    "ideal_gas": _PresetDef("m", _BOTH, 1, lambda d: lambda j: r_d(j, int(d)), _check_d),
}


def _power(j: int, alpha: Fraction) -> Number:
    if alpha.denominator == 1:
        return Fraction(j) ** int(alpha)
    return float(j) ** float(alpha)


def _round_count(value: Number) -> int:
    """Integerise an asymptotic type-count formula: nearest integer, at least 1."""
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction) and value.denominator == 1:
        return int(value)
    return max(1, math.floor(value + Fraction(1, 2) if isinstance(value, Fraction) else value + 0.5))


# ---------------------------------------------------------------------------
# the spec itself

@dataclass(frozen=True)
class WeightSpec:
    family: Family
    params: ParamGen
    p: Fraction | None = None
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.family, Family):
            object.__setattr__(self, "family", Family(self.family))
        if self.p is not None and not isinstance(self.p, Fraction):
            object.__setattr__(self, "p", Fraction(self.p))
        fam, params, p = self.family, self.params, self.p
        if fam is Family.MULTISET:
            if p is None:
                raise DomainError("multiset specs need p")
            if not 0 < p <= 1:
                raise DomainError(
                    f"p must satisfy 0<p<1 (p=1 is accepted only as a formal counting series), got {p}"
                )
        elif fam is Family.SELECTION:
            if p is None:
                raise DomainError("selection specs need p")
            if p <= 0:
                raise DomainError(f"p must satisfy p>0 for selections, got {p}")
        elif p is not None:
            raise DomainError(f"{fam.value} specs take no p")

        if isinstance(params, Preset):
            if params.name not in PRESETS:
                raise DomainError(f"unknown preset {params.name!r}")
            d = PRESETS[params.name]
            if fam not in d.families:
                allowed = ", ".join(sorted(f.value for f in d.families))
                raise DomainError(f"preset {params.name} belongs to family {allowed}, not {fam.value}")
            if len(params.args) != d.arity:
                raise DomainError(f"preset {params.name} takes {d.arity} argument(s), got {len(params.args)}")
            args = tuple(Fraction(a) for a in params.args)
            d.check(*args)
            object.__setattr__(self, "params", Preset(params.name, args))
        elif isinstance(params, RegularlyVarying):
            if fam is Family.CUSTOM:
                raise DomainError("custom specs need an explicit table")
            if params.c <= 0 or params.y <= 0:
                raise DomainError("rv(c, alpha, y) needs c > 0 and y > 0")
        elif isinstance(params, Table):
            if not params.values:
                raise DomainError("a table generator needs at least one entry")
            for idx, v in enumerate(params.values, start=1):
                _check_table_entry(fam, idx, v)
        else:
            raise DomainError(f"unsupported parameter generator {params!r}")

    # -- parameter access ---------------------------------------------------

    def param(self, j: int):
        """``a_j`` for assemblies, ``m_j`` for multisets/selections, the weight
        tuple for custom specs.  Memoised per ``j``."""
        if j < 1:
            raise DomainError(f"component sizes start at 1, got {j}")
        cache = self._cache
        try:
            return cache[j]
        except KeyError:
            pass
        value = self._param(j)
        with self._lock:
            cache[j] = value
        return value

    def _param(self, j: int):
        params, fam = self.params, self.family
        if isinstance(params, Table):
            if j <= len(params.values):
                raw = params.values[j - 1]
            elif params.tail is TailRule.REPEAT_LAST:
                raw = params.values[-1]
            elif params.tail is TailRule.ZERO:
                raw = (Fraction(1),) if fam is Family.CUSTOM else 0
            else:
                raise DomainError(f"table has {len(params.values)} entries and tail rule error-beyond; j={j}")
            if fam is Family.CUSTOM:
                return tuple(Fraction(w) for w in raw)
            return Fraction(raw) if fam is Family.ASSEMBLY else int(raw)
        if isinstance(params, RegularlyVarying):
            raw = params.c * params.y**j * _power(j, params.alpha)
        else:
            d = PRESETS[params.name]
            raw = d.make(*params.args)(j)
        if fam is Family.ASSEMBLY:
            return raw if isinstance(raw, float) else Fraction(raw)
        return _round_count(raw)

    @property
    def exact(self) -> bool:
        if self.family is not Family.ASSEMBLY:
            return True
        if isinstance(self.params, RegularlyVarying):
            return self.params.alpha.denominator == 1
        return True

    def require_exact(self) -> None:
        if not self.exact:
            raise InexactSpecError(
                "this spec has irrational parameters (non-integer rv exponent); use float mode"
            )

    @property
    def label(self) -> str:
        params = self.params
        if isinstance(params, Preset):
            name = params.name
            if params.args:
                name += "(" + ", ".join(str(a) for a in params.args) + ")"
        elif isinstance(params, RegularlyVarying):
            name = f"rv({params.c}, {params.alpha}, {params.y})"
        else:
            name = f"table[{len(params.values)}]"
        if self.p is not None:
            name += f", p={self.p}"
        return f"{self.family.value}:{name}"


def _check_table_entry(fam: Family, idx: int, v) -> None:
    if fam is Family.CUSTOM:
        if not isinstance(v, tuple) or not v:
            raise DomainError(f"custom table entry {idx} must be a non-empty tuple of weights")
        if any(Fraction(w) < 0 for w in v) or Fraction(v[0]) <= 0:
            raise DomainError(f"custom table entry {idx} needs w_0 > 0 and all weights >= 0")
    elif fam is Family.ASSEMBLY:
        if Fraction(v) <= 0:
            raise DomainError(f"assembly rate a_{idx} must be positive, got {v}")
    else:
        if Fraction(v).denominator != 1 or v < 0:
            raise DomainError(f"type count m_{idx} must be a non-negative integer, got {v}")


@dataclass(frozen=True)
class TiltedSpec:
    """A spec whose probabilities are tilted by ``rho``: ``a_k -> rho^(jk) a_k / S_j(rho)``."""

    base: WeightSpec
    rho: Fraction

    def __post_init__(self):
        if not isinstance(self.rho, Fraction):
            object.__setattr__(self, "rho", Fraction(self.rho))
        if self.rho < 0:
            raise DomainError(f"tilt parameter must be >= 0, got {self.rho}")
        base = self.base
        if isinstance(base, TiltedSpec):
            # tilting composes multiplicatively
            object.__setattr__(self, "rho", self.rho * base.rho)
            object.__setattr__(self, "base", base.base)
            base = self.base
        if base.family is Family.MULTISET and self.rho > 0 and base.p * self.rho >= 1:
            raise DomainError(
                f"tilt {self.rho} leaves the domain: S_j(rho) diverges once p*rho >= 1 (p={base.p})"
            )

    family = property(lambda self: self.base.family)
    p = property(lambda self: self.base.p)
    exact = property(lambda self: self.base.exact)
    label = property(lambda self: f"{self.base.label} tilted by {self.rho}")

    def param(self, j):
        return self.base.param(j)

    def require_exact(self):
        self.base.require_exact()


AnySpec = Union[WeightSpec, TiltedSpec]


def unwrap(spec: AnySpec) -> tuple[WeightSpec, Fraction]:
    if isinstance(spec, TiltedSpec):
        return spec.base, spec.rho
    return spec, Fraction(1)


# ---------------------------------------------------------------------------
# scaled and unscaled weights

def scaled_weight(spec: AnySpec, j: int, k: int):
    """``a_k^(j) / a_0^(j)``; exact whenever the spec is exact."""
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    if k == 0:
        return Fraction(1)
    base, theta = unwrap(spec)
    value = _scaled_base(base, j, k)
    if theta != 1 and value:
        value = value * theta ** (j * k)
    return value


def _scaled_base(spec: WeightSpec, j: int, k: int):
    fam = spec.family
    v = spec.param(j)
    if fam is Family.ASSEMBLY:
        if isinstance(v, float):
            return math.exp(k * math.log(v) - math.lgamma(k + 1))
        return v**k / factorial(k)
    if fam is Family.MULTISET:
        return comb(v + k - 1, k) * spec.p ** (j * k) if v else Fraction(0)
    if fam is Family.SELECTION:
        return comb(v, k) * spec.p ** (j * k)
    w = v
    return Fraction(w[k], w[0]) if k < len(w) else Fraction(0)


def component_weights(spec: AnySpec, j: int, kmax: int) -> list:
    """Scaled weights ``[a~_0, ..., a~_kmax]`` of component size ``j``."""
    base, theta = unwrap(spec)
    fam = base.family
    v = base.param(j)
    out = [Fraction(1)]
    if fam is Family.ASSEMBLY and not isinstance(v, float):
        term = Fraction(1)
        a = v * theta**j
        for k in range(1, kmax + 1):
            term = term * a / k
            out.append(term)
        return out
    for k in range(1, kmax + 1):
        out.append(scaled_weight(spec, j, k))
    return out


def max_count(spec: AnySpec, j: int) -> int | None:
    """Largest ``k`` with a non-zero weight, or None when the support is infinite."""
    base, _ = unwrap(spec)
    v = base.param(j)
    if base.family is Family.SELECTION:
        return v
    if base.family is Family.MULTISET:
        return None if v else 0
    if base.family is Family.CUSTOM:
        nz = [k for k, w in enumerate(v) if w]
        return nz[-1]
    return None


def unscaled_weight(spec: AnySpec, j: int, k: int) -> float:
    """``P(Z_j = k)`` as a float."""
    if k < 0:
        return 0.0
    base, theta = unwrap(spec)
    if theta != 1:
        from .measure import tilted_component_law  # circular at import time

        law = tilted_component_law(spec, theta, j)
        return float(law.prob(k))
    fam = base.family
    v = base.param(j)
    if fam is Family.ASSEMBLY:
        a = float(v)
        return math.exp(-a + k * math.log(a) - math.lgamma(k + 1))
    if fam is Family.MULTISET:
        if base.p >= 1:
            raise DomainError("p=1 multisets are formal counting series; Z_j has no distribution")
        if v == 0:
            return 1.0 if k == 0 else 0.0
        x = float(base.p) ** j
        return math.exp(
            v * math.log1p(-x) + math.lgamma(v + k) - math.lgamma(k + 1) - math.lgamma(v) + j * k * math.log(float(base.p))
        )
    if fam is Family.SELECTION:
        if k > v:
            return 0.0
        x = float(base.p) ** j
        return comb(v, k) * math.exp(k * math.log(x) - v * math.log1p(x))
    w = v
    return float(Fraction(w[k], sum(w))) if k < len(w) else 0.0


def mean_z(spec: AnySpec, j: int):
    """``E Z_j``; exact for exact specs."""
    base, theta = unwrap(spec)
    if theta != 1:
        from .measure import tilted_component_law

        return tilted_component_law(spec, theta, j).mean()
    fam = base.family
    v = base.param(j)
    if fam is Family.ASSEMBLY:
        return v
    if fam is Family.MULTISET:
        if base.p >= 1:
            raise DomainError("p=1 multisets are formal counting series; E Z_j is infinite")
        x = base.p**j
        return v * x / (1 - x)
    if fam is Family.SELECTION:
        x = base.p**j
        return v * x / (1 + x)
    return Fraction(sum(k * w for k, w in enumerate(v)), sum(v))


def log_param(spec: AnySpec, j: int) -> float:
    """Natural log of the parameter at ``j`` (``-inf`` for zero); safe for huge values."""
    v = unwrap(spec)[0].param(j)
    return log_abs(v)


def log_abs(v) -> float:
    if not v:
        return -math.inf
    if isinstance(v, Fraction):
        return math.log(abs(v.numerator)) - math.log(v.denominator)
    return math.log(abs(v))


# ---------------------------------------------------------------------------
# lattice points

@lru_cache(maxsize=None)
def r_d(j: int, d: int) -> int:
    """Number of ``(l_1..l_d)`` in Z^d with ``sum l_s^2 == j``, by enumeration."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if j < 0:
        raise DomainError(f"j must be >= 0, got {j}")
    check_work((2 * isqrt(j) + 1) ** d, f"r_{d}({j}) enumeration")

    def count(rem: int, dims: int) -> int:
        if dims == 1:
            s = isqrt(rem)
            if s * s != rem:
                return 0
            return 1 if s == 0 else 2
        b = isqrt(rem)
        return sum(count(rem - l * l, dims - 1) for l in range(-b, b + 1))

    return count(j, d)


def rational_presets() -> dict:
    """One exactly representable spec per preset (and family), keyed by a label."""
    half = Fraction(1, 2)
    return {
        "permutations": WeightSpec(Family.ASSEMBLY, Preset("permutations")),
        "ewens(2)": WeightSpec(Family.ASSEMBLY, Preset("ewens", (2,))),
        "ewens(1/2)": WeightSpec(Family.ASSEMBLY, Preset("ewens", (half,))),
        "set_partitions": WeightSpec(Family.ASSEMBLY, Preset("set_partitions")),
        "graphs": WeightSpec(Family.ASSEMBLY, Preset("graphs")),
        "forests_labelled": WeightSpec(Family.ASSEMBLY, Preset("forests_labelled")),
        "oscillating_demo": WeightSpec(Family.ASSEMBLY, Preset("oscillating_demo")),
        "integer_partitions": WeightSpec(Family.MULTISET, Preset("integer_partitions"), half),
        "plane_partitions": WeightSpec(Family.MULTISET, Preset("plane_partitions"), half),
        "bose(2)": WeightSpec(Family.MULTISET, Preset("bose", (2,)), half),
        "mapping_patterns(1/2)": WeightSpec(Family.MULTISET, Preset("mapping_patterns", (half,)), half),
        "ideal_gas(2) multiset": WeightSpec(Family.MULTISET, Preset("ideal_gas", (2,)), half),
        "distinct_parts": WeightSpec(Family.SELECTION, Preset("distinct_parts"), half),
        "fermi(1)": WeightSpec(Family.SELECTION, Preset("fermi", (1,)), half),
        "ideal_gas(2) selection": WeightSpec(Family.SELECTION, Preset("ideal_gas", (2,)), half),
    }
