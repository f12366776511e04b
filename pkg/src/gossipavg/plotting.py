"""Figure rendering for the report path.

Figures are written as SVG next to the CSV they illustrate.  Scaling
experiments get log-log axes; all axes carry labels so the files stand
alone.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

plt.rcParams.update(
    {
        "figure.figsize": (6.0, 4.0),
        "axes.grid": True,
        "grid.alpha": 0.3,
        "svg.fonttype": "none",
        "font.size": 10,
    }
)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_trajectory(record, path) -> Path:
    fig, ax = plt.subplots()
    t = range(record.steps + 1)
    ax.semilogy(t, [max(v, 1e-300) for v in record.dispersion], label="dispersion d(t)")
    ax.semilogy(t, [max(v, 1e-300) for v in record.bias], label="bias beta(t)")
    ax.set_xlabel("step t")
    ax.set_ylabel("value")
    ax.set_title("trajectory metrics")
    ax.legend()
    return _save(fig, path)


def plot_sweep(result, path) -> Path:
    rows = result.rows()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.0))
    if result.p_values is None or len(result.p_values) == 1:
        qs = [r["q"] for r in rows]
        ax1.plot(qs, [r["rate"] for r in rows], "o-")
        ax1.set_xlabel("q")
        ax1.set_ylabel("rate R")
        ax2.plot(qs, [r["trB"] for r in rows], "o-", color="tab:red")
        ax2.set_xlabel("q")
        ax2.set_ylabel("tr(B)")
    else:
        for q in result.q_values:
            sel = [r for r in rows if r["q"] == q]
            ax1.plot([r["p"] for r in sel], [r["rate"] for r in sel], "o-", label=f"q={q:g}")
            ax2.plot([r["p"] for r in sel], [r["trB"] for r in sel], "o-", label=f"q={q:g}")
        ax1.set_xlabel("p")
        ax1.set_ylabel("rate R")
        ax2.set_xlabel("p")
        ax2.set_ylabel("tr(B)")
        ax1.legend()
    fig.suptitle(f"{result.graph_label}, {result.algorithm}")
    return _save(fig, path)


def plot_tradeoff_curve(result, path) -> Path:
    """tr(B) against R, parameterized by q."""
    rows = result.rows()
    stride = 1 if result.p_values is None else len(result.p_values)
    rates = [rows[i * stride]["rate"] for i in range(len(result.q_values))]
    trbs = [rows[i * stride]["trB"] for i in range(len(result.q_values))]
    fig, ax = plt.subplots()
    ax.plot(rates, trbs, "o-")
    for q, r, b in zip(result.q_values, rates, trbs):
        ax.annotate(f"q={q:g}", (r, b), fontsize=7, alpha=0.7)
    ax.set_xlabel("rate R")
    ax.set_ylabel("tr(B)")
    ax.set_title(f"speed/bias trade-off: {result.graph_label}")
    return _save(fig, path)


def plot_scaling(result, path) -> Path:
    fig, ax = plt.subplots()
    gaps = [1.0 - r for r in result.rates]
    ax.loglog(result.n_values, gaps, "o-", label="1 - R")
    ax.loglog(result.n_values, result.trBs, "s-", label="tr(B)")
    s1 = result.fits["one_minus_R"]["slope"]
    s2 = result.fits["trB"]["slope"]
    ax.set_xlabel("N")
    ax.set_ylabel("value")
    ax.set_title(f"{result.family} scaling (slopes {s1:.2f} / {s2:.2f})")
    ax.legend()
    return _save(fig, path)


def plot_rgg_bias(result, path) -> Path:
    fig, ax = plt.subplots()
    ax.errorbar(result.n_values, result.means, yerr=[2 * s for s in result.ses], fmt="o-", label="geometric (MC)")
    for fam, values in result.companions.items():
        ax.plot(result.n_values, values, "--", label=f"{fam} (analytic)")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("terminal bias")
    ax.set_title("bias vs size")
    ax.legend()
    return _save(fig, path)


def plot_optimal_p(result, path) -> Path:
    fig, ax = plt.subplots()
    if result.rates:
        ax.plot(result.p_grid, result.rates, "o-", label="rate R(p)", ms=2)
    ax.axvline(result.p_theory, color="tab:red", ls="--", label=f"theory p*={result.p_theory:g}")
    if result.p_argmin is not None:
        ax.axvline(result.p_argmin, color="tab:green", ls=":", label=f"argmin {result.p_argmin:g}")
    ax.set_xlabel("p")
    ax.set_ylabel("rate R")
    ax.set_title(f"{result.family} N={result.n}, q={result.q:g}")
    ax.legend()
    return _save(fig, path)


def plot_democracy(result, path) -> Path:
    fig, ax = plt.subplots()
    ax.loglog(result.n_values, result.pi0s, "o-", label="pi'_0")
    ax.loglog(result.n_values, [max(t, 1e-300) for t in result.trBs], "s-", label="tr(B)")
    ax.set_xlabel("N")
    ax.set_ylabel("value")
    ax.set_title(f"{result.family}: {result.verdict} (slope {result.slope:.2f})")
    ax.legend()
    return _save(fig, path)
