"""Command-line interface.

Every data-producing command prints CSV to stdout, or with ``--out DIR`` writes
CSV files, plots and a ``manifest.json`` into DIR.  Exit codes: 0 success,
1 verification failure, 2 usage or input error, and for ``classify`` 0/3/4 for
Convergent/Divergent/Inconclusive.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
from fractions import Fraction

from . import __version__
from .cfp import CfpModel, RateMode, check_detailed_balance, simulate, stationary_exact
from .diagnostics import classify, q_l_empirical
from .errors import PartlabError
from .limits import ENUMERATION_LIMIT, check_enumeration
from .measure import LawKind, fdd, fdd_table, limit_law, tv_distance
from .oracle import cross_check
from .output import csv_text, exact_str, float_str, write_csv, write_manifest
from .series import g_tilde, log_g_tilde, log_tail_series, tail_series
from .specfile import CfpSettings, SpecParseError, format_generator, parse_spec, serialize_spec
from .weights import rational_presets

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Run:
    """Collects the CSV tables and plots of one command, then emits them."""

    def __init__(self, args, command):
        self.args = args
        self.command = command
        self.started = _dt.datetime.now(_dt.timezone.utc)
        self.spec_text = None
        self.params = {}
        self.seed = None
        self.tables = []  # (filename, header, rows)
        self.plots = []  # (filename, callable(path))

    def table(self, name, header, rows):
        self.tables.append((name, header, list(rows)))

    def plot(self, name, fn):
        self.plots.append((name, fn))

    def emit(self):
        out = self.args.out
        if out is None:
            for i, (name, header, rows) in enumerate(self.tables):
                if len(self.tables) > 1:
                    sys.stdout.write(("\n" if i else "") + f"# {name}\n")
                sys.stdout.write(csv_text(header, rows))
            return
        os.makedirs(out, exist_ok=True)
        written = []
        for name, header, rows in self.tables:
            written.append(write_csv(os.path.join(out, name), header, rows))
        for name, fn in self.plots:
            path = os.path.join(out, name)
            fn(path)
            written.append(path)
        write_manifest(out, self.command, self.spec_text, self.params, self.seed, written, self.started)
        for path in written:
            print(f"wrote {path}", file=sys.stderr)


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational like 1/2, got {text!r}") from None


def _int_list(text: str) -> list:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _load(run: _Run):
    args = run.args
    if args.spec is None:
        raise _Usage("this command needs --spec FILE (use - for stdin)")
    if args.spec == "-":
        text = sys.stdin.read()
    else:
        with open(args.spec, encoding="utf-8") as fh:
            text = fh.read()
    doc = parse_spec(text, lenient=args.lenient)
    for w in doc.warnings:
        print(f"warning: {w}", file=sys.stderr)
    run.spec_text = serialize_spec(doc)
    return doc


class _Usage(Exception):
    pass


def _opt(args, name, default):
    v = getattr(args, name, None)
    return default if v is None else v


# ---------------------------------------------------------------------------
# commands

def cmd_coeffs(run: _Run) -> int:
    doc = _load(run)
    spec = doc.weight_spec()
    a = run.args
    N = _opt(a, "N", doc.compute.N)
    mode = _opt(a, "mode", doc.compute.mode)
    ls = a.l or []
    if N < 0:
        raise _Usage("--N must be >= 0")
    run.params = {"N": N, "mode": mode, "l": ls}
    header = ["n"]
    cols = []
    names = ["c_tilde"] + [f"T_tilde_{l}" for l in ls]
    if mode == "exact":
        cols.append(g_tilde(spec, N).coeffs)
        for l in ls:
            cols.append(tail_series(spec, l, N).coeffs)
        for nm in names:
            header += [nm, nm + "_float"]
        rows = [[n] + [v for c in cols for v in (exact_str(c[n]), float_str(c[n]))] for n in range(N + 1)]
    elif mode == "float":
        cols.append(log_g_tilde(spec, N).logs)
        for l in ls:
            cols.append(log_tail_series(spec, l, N).logs)
        for nm in names:
            header += ["log_" + nm, nm + "_float"]
        rows = [[n] + [v for c in cols for v in (repr(float(c[n])), _exp_str(float(c[n])))] for n in range(N + 1)]
    else:
        raise _Usage(f"--mode must be exact or float, got {mode!r}")
    run.table("coeffs.csv", header, rows)
    run.emit()
    return EXIT_OK


def _exp_str(logv: float) -> str:
    import math

    if logv == -math.inf:
        return "0.0"
    if logv < 700 and logv > -700:
        return repr(math.exp(logv))
    e10 = logv / math.log(10)
    e = math.floor(e10)
    return f"{10 ** (e10 - e):.15g}e{e:+d}"


def cmd_classify(run: _Run) -> int:
    doc = _load(run)
    spec = doc.weight_spec()
    a = run.args
    c = doc.compute
    N = _opt(a, "N", c.N)
    mode = _opt(a, "mode", c.mode)
    window = _opt(a, "window", c.window)
    l_max = _opt(a, "l", c.l_max)
    run.params = {"N": N, "mode": mode, "window": window, "tol": c.tol, "l_max": l_max}
    res = classify(spec, N=N, window=window, tol=c.tol, mode=mode, l_max=l_max)
    for key, value in res.record().items():
        print(f"{key}: {value}")
    for l, (emp, closed) in sorted(res.q_l_table.items()):
        print(f"q_{l}: empirical {emp!r}, closed form {closed!r}")
    if a.out is not None:
        # the verdict record owns stdout; the ratio table goes to files only
        rows = [(n, repr(r)) for n, r in res.report.rows()]
        run.table("ratios.csv", ["n", "ratio"], rows)
        from .plotting import plot_qls, plot_ratios

        rho = res.rho_hat if res.rho_hat is not None and res.rho_hat != float("inf") else None
        hdr = ["n", "ratio"]
        run.plot("ratios.png", lambda p: plot_ratios(hdr, rows, p, rho, c.tol))
        if res.q_l_table:
            qrows = []
            for l, (_, closed) in sorted(res.q_l_table.items()):
                emp = q_l_empirical(spec, l, N, window, mode)
                start = N + 1 - len(emp.values)
                qrows += [(start + i, l, repr(float(v)), repr(closed)) for i, v in enumerate(emp.values)]
            qhdr = ["n", "l", "q_empirical", "q_closed"]
            run.table("q_l.csv", qhdr, qrows)
            run.plot("q_l.png", lambda p: plot_qls(qhdr, qrows, p))
        run.emit()
    return res.exit_code


def _law_rows(table):
    rows = []
    for key in sorted(table.entries):
        v = table.entries[key]
        if table.kind is LawKind.EXACT:
            rows.append(list(key) + [exact_str(v), float_str(v)])
        else:
            rows.append(list(key) + ["", repr(float(v))])
    return rows


def cmd_fdd(run: _Run) -> int:
    doc = _load(run)
    spec = doc.weight_spec()
    a = run.args
    n, l = a.n, a.l
    if n is None or l is None:
        raise _Usage("fdd needs --n and --l")
    run.params = {"n": n, "l": l, "prefix": a.prefix}
    header = [f"k_{j}" for j in range(1, l + 1)] + ["prob", "prob_float"]
    if a.prefix is not None:
        if len(a.prefix) != l:
            raise _Usage(f"--prefix has {len(a.prefix)} entries but --l is {l}")
        v = fdd(spec, n, l, a.prefix)
        rows = [list(a.prefix) + [exact_str(v), float_str(v)]]
    else:
        rows = _law_rows(fdd_table(spec, n, l))
    run.table("fdd.csv", header, rows)
    run.emit()
    return EXIT_OK


def cmd_limit(run: _Run) -> int:
    doc = _load(run)
    spec = doc.weight_spec()
    a = run.args
    if a.rho is None or a.l is None:
        raise _Usage("limit needs --rho and --l")
    law = limit_law(spec, a.rho, a.l)
    run.params = {"rho": exact_str(a.rho), "l": a.l}
    print(f"truncation mass: {law.truncation_mass!r}", file=sys.stderr)
    header = [f"k_{j}" for j in range(1, a.l + 1)] + ["prob_exact", "prob"]
    run.table("limit.csv", header, _law_rows(law))
    run.emit()
    return EXIT_OK


def cmd_tv(run: _Run) -> int:
    doc = _load(run)
    spec = doc.weight_spec()
    a = run.args
    if a.rho is None or a.l is None:
        raise _Usage("tv needs --rho and --l")
    grid = a.n_grid or [20, 40, 80, 160]
    run.params = {"rho": exact_str(a.rho), "l": a.l, "n": grid}
    law = limit_law(spec, a.rho, a.l)
    rows = [(n, repr(float(tv_distance(fdd_table(spec, n, a.l), law)))) for n in grid]
    run.table("tv.csv", ["n", "tv"], rows)
    if a.out is not None:
        from .plotting import plot_tv

        run.plot("tv.png", lambda p: plot_tv(["n", "tv"], rows, p))
    run.emit()
    return EXIT_OK


def cmd_verify(run: _Run) -> int:
    a = run.args
    n_max = a.n_max
    check_enumeration(n_max, ENUMERATION_LIMIT, "verify")
    l_max = _opt(a, "l", 4)
    if a.all_presets:
        specs = rational_presets()
    else:
        doc = _load(run)
        specs = {format_generator(doc.generator): doc.weight_spec()}
    run.params = {"n_max": n_max, "l_max": l_max, "specs": sorted(specs)}
    rows = []
    failed = False
    for name, spec in specs.items():
        bad = cross_check(spec, n_max, l_max)
        if bad is None:
            rows.append((name, n_max, "pass", "", "", ""))
            print(f"PASS {name} (n <= {n_max}, l <= {l_max})")
        else:
            failed = True
            pre = " ".join(map(str, bad.prefix))
            rows.append((name, bad.n, "fail", pre, exact_str(bad.engine), exact_str(bad.oracle)))
            print(f"FAIL {name}: first difference at {bad}")
    if a.out is not None:
        run.table("verify.csv", ["spec", "n", "status", "prefix", "engine", "oracle"], rows)
        run.emit()
    return EXIT_FAIL if failed else EXIT_OK


def _cfp_model(run: _Run, doc):
    a = run.args
    cfg = doc.cfp or CfpSettings()
    n = _opt(a, "n", cfg.n)
    gauge = _opt(a, "gauge", cfg.gauge)
    return CfpModel(n, doc.weight_spec(), RateMode(gauge)), cfg


def cmd_cfp(run: _Run) -> int:
    doc = _load(run)
    a = run.args
    model, cfg = _cfp_model(run, doc)
    run.params = {"action": a.action, "n": model.n, "gauge": model.mode.value}
    if a.action == "balance":
        bad = check_detailed_balance(model)
        header = ["lower", "upper", "i", "j", "lhs", "rhs"]
        rows = [(str(v.lower), str(v.upper), v.i, v.j, exact_str(v.lhs), exact_str(v.rhs)) for v in bad]
        print(f"detailed balance on n={model.n}: {len(bad)} violation(s)", file=sys.stderr)
        run.table("balance.csv", header, rows)
        run.emit()
        return EXIT_FAIL if bad else EXIT_OK
    if a.action == "stationary":
        res = stationary_exact(model)
        rows = [(str(s), exact_str(p), exact_str(m), "yes" if p == m else "no")
                for s, p, m in zip(res.states, res.pi, res.mu)]
        run.table("stationary.csv", ["state", "pi", "mu", "equal"], rows)
        run.emit()
        return EXIT_OK if res.matches_mu and res.residual_zero else EXIT_FAIL
    # simulate
    seed = _opt(a, "seed", cfg.seed)
    t_max = _opt(a, "t_max", cfg.t_max)
    run.seed = seed
    run.params.update({"t_max": t_max, "batches": a.batches})
    rep = simulate(model, t_max, seed=seed, batches=a.batches)
    print(f"events: {rep.events}, time scale: {rep.time_scale!r}", file=sys.stderr)
    if rep.states:
        mu = stationary_mu(model, rep.states)
        rows = []
        for s, occ, se, m in zip(rep.states, rep.occupation, rep.stderr, mu):
            rows.append((str(s), repr(occ), repr(se), exact_str(m), float_str(m)))
        run.table("simulation.csv", ["state", "occupation", "stderr", "mu", "mu_float"], rows)
    else:
        rows = [(j, k, repr(f), repr(se)) for j, hist in sorted(rep.histograms.items())
                for k, (f, se) in sorted(hist.items())]
        run.table("simulation.csv", ["j", "k", "fraction", "stderr"], rows)
    run.emit()
    return EXIT_OK


def stationary_mu(model, states):
    w = [model.weight(s) for s in states]
    total = sum(w, Fraction(0))
    return [v / total for v in w]


def cmd_plot(run: _Run) -> int:
    from .plotting import plot_csv

    a = run.args
    if a.csv is None or a.kind is None:
        raise _Usage("plot needs --csv FILE and --kind")
    out = a.out or "."
    os.makedirs(out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(a.csv))[0]
    path = os.path.join(out, f"{stem}_{a.kind}.png")
    rho = float(a.rho) if a.rho is not None else None
    plot_csv(a.csv, a.kind, path, rho)
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", metavar="FILE", help="structure spec file, - for stdin")
    common.add_argument("--out", metavar="DIR", help="write CSV, plots and manifest.json here")
    common.add_argument("--lenient", action="store_true", help="downgrade unknown spec keys to warnings")

    parser = argparse.ArgumentParser(prog="partlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"partlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", parents=[common], help="c~_n and tail coefficients")
    p.add_argument("--N", type=int)
    p.add_argument("--l", type=_int_list, help="comma-separated tail indices")
    p.add_argument("--mode", choices=["exact", "float"])
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("classify", parents=[common], help="Convergent / Divergent / Inconclusive")
    p.add_argument("--N", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--mode", choices=["exact", "float"])
    p.add_argument("--l", type=int, help="largest l for the q^(l) table")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fdd", parents=[common], help="exact law of (K_1..K_l) at size n")
    p.add_argument("--n", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--prefix", type=_int_list, help="single prefix k_1,..,k_l")
    p.set_defaults(func=cmd_fdd)

    p = sub.add_parser("limit", parents=[common], help="independent limit law at rho")
    p.add_argument("--rho", type=_rational)
    p.add_argument("--l", type=int)
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("tv", parents=[common], help="TV distance of exact laws to the limit law")
    p.add_argument("--rho", type=_rational)
    p.add_argument("--l", type=int)
    p.add_argument("--n", dest="n_grid", type=_int_list, help="comma-separated sizes")
    p.set_defaults(func=cmd_tv)

    p = sub.add_parser("verify", parents=[common], help="engine against brute-force enumeration")
    p.add_argument("--n-max", type=int, default=15)
    p.add_argument("--l", type=int, help="largest prefix length checked (default 4)")
    p.add_argument("--all-presets", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cfp", parents=[common], help="coagulation-fragmentation checks")
    p.add_argument("action", choices=["balance", "stationary", "simulate"])
    p.add_argument("--n", type=int)
    p.add_argument("--gauge", choices=[m.value for m in RateMode])
    p.add_argument("--seed", type=int)
    p.add_argument("--t-max", type=float)
    p.add_argument("--batches", type=int, default=20)
    p.set_defaults(func=cmd_cfp)

    p = sub.add_parser("plot", parents=[common], help="render a CSV written by another command")
    p.add_argument("--csv", metavar="FILE")
    p.add_argument("--kind", choices=["ratios", "qls", "tv"])
    p.add_argument("--rho", type=_rational, help="draw the rho band on a ratio plot")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    run = _Run(args, args.command)
    try:
        return args.func(run)
    except SpecParseError as e:
        for err in e.errors:
            print(f"{args.spec}: {err}", file=sys.stderr)
        return EXIT_USAGE
    except _Usage as e:
        parser.print_usage(sys.stderr)
        print(f"partlab {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PartlabError, ValueError, OSError, ArithmeticError) as e:
        print(f"partlab {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE

