"""The structure-spec file format.

Line oriented ``key = value`` pairs, optionally grouped under ``[structure]``,
``[compute]`` and ``[cfp]`` headers.  Key names are unique across sections, so
keys may also appear before any header.  ``#`` starts a comment.

    [structure]
    family = multiset              # assembly | multiset | selection | custom
    generator = integer_partitions # name | name(args) | rv(c, alpha, y) | table[...; tail=rule]
    p = 1/2

    [compute]
    N = 200
    mode = exact                   # exact | float
    window = 25
    tol = 1/1000

    [cfp]
    n = 6
    gauge = ratio                  # meanfield | ratio
    t_max = 1000
    seed = 12345

Structure parameters are exact rationals (``3``, ``-1``, ``2/3``).  Decimal
literals such as ``0.5`` are accepted for them only in float mode.  ``tol``
and ``t_max`` are plain numbers and may always be written as decimals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import DomainError, PartlabError
from .weights import Family, Preset, RegularlyVarying, Table, TailRule, WeightSpec

SECTIONS = {
    "structure": ("family", "generator", "p"),
    "compute": ("N", "mode", "window", "tol", "l_max"),
    "cfp": ("n", "gauge", "t_max", "seed"),
}
KEY_SECTION = {k: s for s, keys in SECTIONS.items() for k in keys}


@dataclass(frozen=True)
class SpecError:
    line: int
    column: int
    message: str

    def __str__(self):
        return f"line {self.line}, column {self.column}: {self.message}"


class SpecParseError(PartlabError, ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(str(e) for e in self.errors))


@dataclass(frozen=True)
class ComputeSettings:
    N: int = 200
    mode: str = "exact"
    window: int = 25
    tol: float = 1e-3
    l_max: int = 5


@dataclass(frozen=True)
class CfpSettings:
    n: int = 6
    gauge: str = "ratio"
    t_max: float = 1000.0
    seed: int = 12345


@dataclass(frozen=True)
class SpecDocument:
    family: Family
    generator: object
    p: Fraction | None = None
    compute: ComputeSettings = field(default_factory=ComputeSettings)
    cfp: CfpSettings | None = None
    warnings: tuple = field(default=(), compare=False)

    def weight_spec(self) -> WeightSpec:
        return WeightSpec(self.family, self.generator, self.p)


_RATIONAL = re.compile(r"^[+-]?\d+(/\d+)?$")
_DECIMAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class _Fail(Exception):
    def __init__(self, message, offset=0):
        super().__init__(message)
        self.offset = offset


def _rational(text: str, float_mode: bool) -> Fraction:
    t = text.strip()
    if _RATIONAL.match(t):
        v = Fraction(t)
        return v
    if _DECIMAL.match(t):
        if not float_mode:
            raise _Fail(f"decimal {t!r} is only allowed in float mode; write it as a fraction")
        return Fraction(t)
    raise _Fail(f"expected a rational number like 3 or 2/3, got {t!r}")


def _number(text: str) -> float:
    t = text.strip()
    if _RATIONAL.match(t):
        return float(Fraction(t))
    if _DECIMAL.match(t):
        return float(t)
    raise _Fail(f"expected a number, got {t!r}")


def _integer(text: str) -> int:
    t = text.strip()
    if not re.match(r"^[+-]?\d+$", t):
        raise _Fail(f"expected an integer, got {t!r}")
    return int(t)


def _family(text: str) -> Family:
    try:
        return Family(text)
    except ValueError:
        names = ", ".join(f.value for f in Family)
        raise _Fail(f"unknown family {text!r}; expected one of {names}") from None


def _split_args(body: str) -> list:
    """Split on top-level commas, keeping parenthesised groups together."""
    out, depth, cur = [], 0, []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [a.strip() for a in out]


def parse_generator(text: str, family: Family | None, float_mode: bool = False):
    t = text.strip()
    m = re.match(r"^table\s*\[(.*)\]$", t, re.S)
    if m:
        body = m.group(1)
        tail = TailRule.ZERO
        if ";" in body:
            body, opt = body.rsplit(";", 1)
            om = re.match(r"^\s*tail\s*=\s*([\w-]+)\s*$", opt)
            if not om:
                raise _Fail(f"expected 'tail=zero|repeat-last|error-beyond', got {opt.strip()!r}")
            try:
                tail = TailRule(om.group(1))
            except ValueError:
                raise _Fail(f"unknown tail rule {om.group(1)!r}") from None
        if not body.strip():
            raise _Fail("a table needs at least one entry")
        values = []
        for item in _split_args(body):
            if item.startswith("("):
                if not item.endswith(")"):
                    raise _Fail(f"unbalanced parentheses in {item!r}")
                values.append(tuple(_rational(x, float_mode) for x in _split_args(item[1:-1])))
            else:
                v = _rational(item, float_mode)
                values.append(v if family is Family.ASSEMBLY or v.denominator != 1 else int(v))
        return Table(tuple(values), tail)
    m = re.match(r"^(\w+)\s*(?:\((.*)\))?$", t, re.S)
    if not m:
        raise _Fail(f"cannot read generator {t!r}")
    name, body = m.group(1), m.group(2)
    args = [] if body is None or not body.strip() else _split_args(body)
    if name == "rv":
        if len(args) != 3:
            raise _Fail(f"rv(c, alpha, y) takes 3 arguments, got {len(args)}")
        c, alpha, y = (_rational(a, float_mode) for a in args)
        return RegularlyVarying(c, alpha, y)
    return Preset(name, tuple(_rational(a, float_mode) for a in args))


def _raw_pairs(text: str, errors: list, lenient: bool, warnings: list) -> dict:
    """``{key: (value, line, value_column)}`` with section checks."""
    section = None
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col0 = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            m = re.match(r"^\[\s*(\w+)\s*\]$", stripped)
            if not m:
                errors.append(SpecError(lineno, col0, f"malformed section header {stripped!r}"))
                continue
            section = m.group(1)
            if section not in SECTIONS:
                msg = f"unknown section [{section}]"
                if lenient:
                    warnings.append(SpecError(lineno, col0, msg))
                else:
                    errors.append(SpecError(lineno, col0, msg))
            continue
        if "=" not in line:
            errors.append(SpecError(lineno, col0, f"expected key = value, got {stripped!r}"))
            continue
        key_part, value = line.split("=", 1)
        key = key_part.strip()
        vcol = len(key_part) + 2 + (len(value) - len(value.lstrip()))
        if not re.match(r"^\w+$", key):
            errors.append(SpecError(lineno, col0, f"invalid key {key!r}"))
            continue
        home = KEY_SECTION.get(key)
        if home is None or (section is not None and section in SECTIONS and home != section):
            where = f" in [{section}]" if section else ""
            msg = f"unknown key {key!r}{where}"
            if home is not None:
                msg += f" (it belongs in [{home}])"
            if lenient:
                warnings.append(SpecError(lineno, col0, msg))
            else:
                errors.append(SpecError(lineno, col0, msg))
            continue
        if section is not None and section not in SECTIONS:
            continue
        if key in out:
            errors.append(SpecError(lineno, col0, f"duplicate key {key!r} (first set on line {out[key][1]})"))
            continue
        out[key] = (value.strip(), lineno, vcol)
    return out


def parse_spec(text: str, lenient: bool = False) -> SpecDocument:
    """Parse and validate a spec document; raises :class:`SpecParseError` listing every problem."""
    errors: list = []
    warnings: list = []
    pairs = _raw_pairs(text, errors, lenient, warnings)

    def field_value(key, conv, default):
        if key not in pairs:
            return default
        value, line, col = pairs[key]
        try:
            return conv(value)
        except _Fail as e:
            errors.append(SpecError(line, col + e.offset, str(e)))
        except (ValueError, DomainError) as e:
            errors.append(SpecError(line, col, str(e)))
        return default

    def choice(options):
        def conv(v):
            if v not in options:
                raise _Fail(f"expected one of {', '.join(options)}, got {v!r}")
            return v
        return conv

    mode = field_value("mode", choice(("exact", "float")), "exact")
    float_mode = mode == "float"
    family = None
    if "family" not in pairs:
        errors.append(SpecError(1, 1, "missing required key 'family'"))
    else:
        family = field_value("family", _family, None)
    if "generator" not in pairs:
        errors.append(SpecError(1, 1, "missing required key 'generator'"))
        generator = None
    else:
        generator = field_value("generator", lambda v: parse_generator(v, family, float_mode), None)
    p = field_value("p", lambda v: _rational(v, float_mode), None)

    def positive_int(v):
        x = _integer(v)
        if x < 0:
            raise _Fail(f"expected a non-negative integer, got {v!r}")
        return x

    defaults = ComputeSettings()
    compute = ComputeSettings(
        N=field_value("N", positive_int, defaults.N),
        mode=mode,
        window=field_value("window", positive_int, defaults.window),
        tol=field_value("tol", _number, defaults.tol),
        l_max=field_value("l_max", positive_int, defaults.l_max),
    )
    if "tol" in pairs and not compute.tol > 0:
        errors.append(SpecError(pairs["tol"][1], pairs["tol"][2], "tol must be positive"))
    if "window" in pairs and compute.window < 2:
        errors.append(SpecError(pairs["window"][1], pairs["window"][2], "window must be >= 2"))
    cfp = None
    if any(k in pairs for k in SECTIONS["cfp"]):
        cd = CfpSettings()
        cfp = CfpSettings(
            n=field_value("n", positive_int, cd.n),
            gauge=field_value("gauge", choice(("meanfield", "ratio")), cd.gauge),
            t_max=field_value("t_max", _number, cd.t_max),
            seed=field_value("seed", positive_int, cd.seed),
        )
        if "n" in pairs and cfp.n < 1:
            errors.append(SpecError(pairs["n"][1], pairs["n"][2], "n must be >= 1"))
        if "t_max" in pairs and cfp.t_max < 0:
            errors.append(SpecError(pairs["t_max"][1], pairs["t_max"][2], "t_max must be >= 0"))

    if not errors and family is not None and generator is not None:
        try:
            WeightSpec(family, generator, p)
        except DomainError as e:
            msg = str(e)
            key = "p" if (msg.startswith("p ") or "take no p" in msg or "need p" in msg) else "generator"
            if key == "p" and "p" not in pairs:
                key = "family"
            _, line, col = pairs[key]
            errors.append(SpecError(line, col, msg))
    if errors:
        raise SpecParseError(sorted(errors, key=lambda e: (e.line, e.column)))
    return SpecDocument(family, generator, p, compute, cfp, tuple(warnings))


# ---------------------------------------------------------------------------
# serialization

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(Fraction(v))


def format_generator(gen) -> str:
    if isinstance(gen, Preset):
        if not gen.args:
            return gen.name
        return f"{gen.name}(" + ", ".join(_fmt(a) for a in gen.args) + ")"
    if isinstance(gen, RegularlyVarying):
        return f"rv({_fmt(gen.c)}, {_fmt(gen.alpha)}, {_fmt(gen.y)})"
    if isinstance(gen, Table):
        items = []
        for v in gen.values:
            if isinstance(v, tuple):
                items.append("(" + ", ".join(_fmt(w) for w in v) + ")")
            else:
                items.append(_fmt(v))
        return "table[" + ", ".join(items) + f"; tail={gen.tail.value}]"
    raise TypeError(f"cannot format generator {gen!r}")


def serialize_spec(doc: SpecDocument) -> str:
    """Canonical text: fixed section and key order, every default written out."""
    lines = ["[structure]", f"family = {doc.family.value}", f"generator = {format_generator(doc.generator)}"]
    if doc.p is not None:
        lines.append(f"p = {_fmt(doc.p)}")
    c = doc.compute
    lines += ["", "[compute]", f"N = {c.N}", f"mode = {c.mode}", f"window = {c.window}",
              f"tol = {c.tol!r}", f"l_max = {c.l_max}"]
    if doc.cfp is not None:
        f = doc.cfp
        lines += ["", "[cfp]", f"n = {f.n}", f"gauge = {f.gauge}", f"t_max = {f.t_max!r}", f"seed = {f.seed}"]
    return "\n".join(lines) + "\n"


def read_spec(path: str, lenient: bool = False) -> SpecDocument:
    """Parse a spec file; ``-`` reads standard input."""
    import sys

    if path == "-":
        text = sys.stdin.read()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_spec(text, lenient=lenient)
