"""SVG charts for experiment reports."""

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import InvalidArgument  # noqa: E402

SVG_META = {"Date": None}


def _num(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return math.nan


def _groups(rows, keys):
    out = defaultdict(list)
    for r in rows:
        out[tuple(r[k] for k in keys)].append(r)
    return out


def _envelope(ax, rows):
    floor = min(r["bound"] for r in rows) / 10.0
    seen, grid, extra = set(), [], []
    for r in rows:
        (extra if (r["R"], r["D"]) in seen else grid).append(r)
        seen.add((r["R"], r["D"]))

    def whisker(r, color):
        ax.plot([r["D"]] * 2, [max(r["ci_low"], floor), r["ci_high"]], "-", color=color, alpha=0.5)
        if r["p_hat"] > 0:
            ax.plot(r["D"], r["p_hat"], "o", color=color)
        else:
            ax.plot(r["D"], floor, "v", color=color)

    for (R,), cell in sorted(_groups(grid, ["R"]).items()):
        cell = sorted(cell, key=lambda r: r["D"])
        line, = ax.plot([r["D"] for r in cell], [r["bound"] for r in cell], "-", label=f"bound, R={R:g}")
        for r in cell:
            whisker(r, line.get_color())
    for r in extra:
        ax.plot(r["D"], r["bound"], "*", color="k", markersize=9)
        ax.annotate(f"R={r['R']:g}, eps={r['epsilon']:g}", (r["D"], r["bound"]),
                    textcoords="offset points", xytext=(-6, -12), ha="right", fontsize=7)
        whisker(r, "k")
    ax.plot([], [], "kv", label="no failures (drawn at floor)")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("D")
    ax.set_ylabel("failure probability")
    ax.set_title("error probability: empirical (Wilson 95%) vs bound")


def _bounds_table(ax, rows):
    keys = ["d", "R", "epsilon"]
    group_key, cell = sorted(_groups(rows, keys).items())[0]
    cell = sorted(cell, key=lambda r: r["D"])
    D = [r["D"] for r in cell]
    top = 2.0
    for name in ("thm1", "rahimi", "sutherland"):
        ys = [math.log10(r[name]) if r[name] > 0 else -math.inf for r in cell]
        ax.plot(D, ys, "o-", label=name)
    sri = [r["sriperumbudur_log"] / math.log(10) for r in cell]
    ax.plot(D, [min(s, top) for s in sri], "s--", label="sriperumbudur (clipped)")
    for x, s in zip(D, sri):
        if s > top:
            ax.annotate(f"1e{s:.0f}", (x, top), textcoords="offset points", xytext=(0, 6),
                        ha="center", fontsize=7)
    ax.set_xscale("log")
    ax.set_xlabel("D")
    ax.set_ylabel("log10 bound")
    ax.set_title("upper bounds, d={:g} R={:g} eps={:g}".format(*group_key))


def _expected_sup(ax, rows):
    for (R,), cell in sorted(_groups(rows, ["R"]).items()):
        cell = sorted(cell, key=lambda r: r["D"])
        D = [r["D"] for r in cell]
        line, = ax.plot(D, [r["bound"] for r in cell], "-", label=f"bound, R={R:g}")
        ax.errorbar(D, [r["mean"] for r in cell], yerr=[3 * r["stderr"] for r in cell],
                    fmt="o", color=line.get_color(), capsize=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("D")
    ax.set_ylabel("E sup error")
    ax.set_title("expected supremum: mean +- 3 se vs bound")


def _lecam(ax, rows):
    for (D,), cell in sorted(_groups(rows, ["D"]).items()):
        cell = sorted(cell, key=lambda r: r["R"])
        R = [r["R"] for r in cell]
        line, = ax.plot(R, [r["floor"] for r in cell], "-", label=f"floor, D={D}")
        ax.plot(R, [r["intermediate"] for r in cell], ":", color=line.get_color())
        ax.errorbar(R, [r["expected_error"] for r in cell],
                    yerr=[3 * r["stderr"] for r in cell], fmt="o", color=line.get_color())
    ax.set_yscale("log")
    ax.set_xlabel("R")
    ax.set_ylabel("expected error")
    ax.set_title("two-point floor (line), Le Cam value (dotted), measured risk (points)")


def _generic(ax, rows):
    x = list(range(len(rows)))
    ax.plot(x, [_num(r["analytic"]) for r in rows], "-", label="analytic")
    ax.errorbar(x, [_num(r["empirical"]) for r in rows],
                yerr=[abs(_num(r["slack"])) for r in rows], fmt="o", label="empirical", capsize=2)
    fails = [i for i, r in enumerate(rows) if r["verdict"] == "fail"]
    if fails:
        ax.plot(fails, [_num(rows[i]["empirical"]) for i in fails], "rx", label="fail")
    ax.set_xlabel("row")
    ax.set_ylabel("value")


PLOTTERS = {
    "probability-envelope": _envelope,
    "bounds-table": _bounds_table,
    "expected-sup": _expected_sup,
    "lecam": _lecam,
    "lipschitz": _generic,
    "parameter-identity": _generic,
    "krr-gap": _generic,
    "svm-gap": _generic,
    "compare-inversions": _generic,
}


def plot_report(report, out_path):
    """Render ``report`` (a dict as written by ``run``) to an SVG file."""
    kind = report.get("kind")
    if kind not in PLOTTERS:
        raise InvalidArgument(f"unknown report kind {kind!r}")
    rows = report.get("rows") or []
    with plt.rc_context({"svg.hashsalt": "rffb", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        if rows:
            PLOTTERS[kind](ax, rows)
            if ax.get_legend_handles_labels()[0]:
                ax.legend(fontsize=8)
        else:
            ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
            ax.set_title(kind)
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata=SVG_META)
        plt.close(fig)
    return out_path
