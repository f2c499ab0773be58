"""Static plots rendered from the CSV outputs (matplotlib, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .output import read_csv  # noqa: E402

KINDS = ("ratios", "qls", "tv")


def _column(header, rows, name, conv=float):
    try:
        i = header.index(name)
    except ValueError:
        raise ValueError(f"CSV has no column {name!r}; columns are {', '.join(header)}") from None
    return [conv(r[i]) for r in rows]


def plot_ratios(header, rows, out_path, rho_hat=None, tol=1e-3):
    n = _column(header, rows, "n", int)
    r = _column(header, rows, "ratio")
    fig, ax = plt.subplots(figsize=(7, 4))
    even = [(a, b) for a, b in zip(n, r) if a % 2 == 0]
    odd = [(a, b) for a, b in zip(n, r) if a % 2 == 1]
    for pts, label, marker in ((even, "even n", "o"), (odd, "odd n", "s")):
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker, ms=3, label=label)
    if rho_hat is not None:
        ax.axhline(rho_hat, color="k", lw=0.8, label=f"rho = {rho_hat:.6g}")
        ax.axhspan(rho_hat * (1 - tol), rho_hat * (1 + tol), color="k", alpha=0.1)
    ax.set_xlabel("n")
    ax.set_ylabel("d_{n-1} / d_n")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=100)
    plt.close(fig)
    return out_path


def plot_qls(header, rows, out_path):
    n = _column(header, rows, "n", int)
    ls = _column(header, rows, "l", int)
    q = _column(header, rows, "q_empirical")
    closed = _column(header, rows, "q_closed") if "q_closed" in header else None
    fig, ax = plt.subplots(figsize=(7, 4))
    for l in sorted(set(ls)):
        idx = [i for i, v in enumerate(ls) if v == l]
        (line,) = ax.plot([n[i] for i in idx], [q[i] for i in idx], lw=1, label=f"l = {l}")
        if closed is not None:
            ax.axhline(closed[idx[0]], color=line.get_color(), ls="--", lw=0.8)
    ax.set_xlabel("n")
    ax.set_ylabel("T~_n / c~_n")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=100)
    plt.close(fig)
    return out_path


def plot_tv(header, rows, out_path):
    n = _column(header, rows, "n", int)
    tv = _column(header, rows, "tv")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(n, tv, "o-")
    ax.set_xlabel("n")
    ax.set_ylabel("total variation distance")
    if all(v > 0 for v in tv) and len(tv) > 1:
        ax.set_xscale("log")
        ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(out_path, dpi=100)
    plt.close(fig)
    return out_path


def plot_csv(csv_path, kind, out_path, rho_hat=None):
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {', '.join(KINDS)}")
    header, rows = read_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path} has a header but no data rows")
    if kind == "ratios":
        return plot_ratios(header, rows, out_path, rho_hat)
    if kind == "qls":
        return plot_qls(header, rows, out_path)
    return plot_tv(header, rows, out_path)
