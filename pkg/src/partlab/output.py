"""CSV and run-manifest writing.

CSV files are plain RFC-4180 (``csv`` module defaults).  Exact rationals go out
as ``num/den`` strings next to a float column; values outside double range are
written in scientific notation computed from the exact value, never as inf.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
from fractions import Fraction

from . import __version__

MANIFEST = "manifest.json"


def exact_str(v) -> str:
    if isinstance(v, float):
        return repr(v)
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def float_str(v, digits: int = 17) -> str:
    """Decimal rendering of a rational or float that survives any magnitude."""
    if isinstance(v, float):
        return repr(v)
    v = Fraction(v)
    if v == 0:
        return "0.0"
    try:
        f = float(v)
    except OverflowError:
        f = math.inf
    if math.isfinite(f) and f != 0 and abs(f) >= 1e-300:
        return repr(f)
    sign = "-" if v < 0 else ""
    a = abs(v)
    e = len(str(a.numerator)) - len(str(a.denominator))
    # settle the exponent so that 1 <= a / 10^e < 10
    while a >= Fraction(10) ** (e + 1):
        e += 1
    while a < Fraction(10) ** e:
        e -= 1
    mant = round(a * Fraction(10) ** (digits - 1 - e))
    if mant >= 10**digits:
        mant //= 10
        e += 1
    s = str(mant)
    body = (s[0] + "." + s[1:]).rstrip("0").rstrip(".")
    if "." not in body:
        body += ".0"
    return f"{sign}{body}e{e:+d}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_csv(path: str, header, rows) -> str:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(csv_text(header, rows))
    return path


def read_csv(path: str):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], rows[1:]


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(outdir: str, command: str, spec_text: str | None, params: dict, seed, outputs, started) -> str:
    """Write the single ``manifest.json`` of an output directory."""
    finished = _dt.datetime.now(_dt.timezone.utc)
    data = {
        "command": command,
        "spec_digest": None if spec_text is None else "sha256:" + digest(spec_text),
        "parameters": params,
        "seed": seed,
        "version": __version__,
        "started": started.isoformat(timespec="seconds"),
        "finished": finished.isoformat(timespec="seconds"),
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    path = os.path.join(outdir, MANIFEST)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
