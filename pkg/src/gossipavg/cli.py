"""Command-line entry point.

Subcommands cover graph construction, simulation, one-shot analysis,
parameter sweeps, scaling studies, the geometric-graph bias experiment,
the optimal wake-probability search, vanishing-bias verdicts, and an
invariant verification suite.  Every run writes CSV artifacts, SVG
figures, and a manifest.json that reproduces it via --from-manifest.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

import numpy as np

from gossipavg import experiments as xp
from gossipavg import meansquare as ms
from gossipavg import report
from gossipavg.gossip import AlgoParams, run_trajectory
from gossipavg.graphs import Graph, build_cayley, build_named_graph, build_rgg, rgg_default_radius
from gossipavg.seeds import SeedPolicy
from gossipavg.verify import run_verification

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2

DEFAULT_RGG_SEED = 1_234_567


# ---------------------------------------------------------------------------
# Spec parsing
# ---------------------------------------------------------------------------


def parse_graph_spec(spec: str, default_seed: int = DEFAULT_RGG_SEED) -> Graph:
    """family:size[,size...] | cayley:m1xm2:g1|g2 | rgg:N:radius[:seed] | file.json"""
    if spec.endswith(".json"):
        return Graph.load(spec)
    parts = spec.split(":")
    kind = parts[0]
    if kind in ("complete", "ring", "torus", "hypercube"):
        if len(parts) != 2:
            raise ValueError(f"graph spec {spec!r}: expected {kind}:size[,size...]")
        sizes = [int(s) for s in parts[1].split(",")]
        return build_named_graph(kind, sizes)
    if kind == "cayley":
        if len(parts) != 3:
            raise ValueError(f"graph spec {spec!r}: expected cayley:m1xm2:g1|g2|...")
        moduli = [int(m) for m in parts[1].split("x")]
        gens = []
        for chunk in parts[2].split("|"):
            gens.append(tuple(int(c) for c in chunk.split(",")))
        return build_cayley(moduli, gens)
    if kind == "rgg":
        if len(parts) not in (3, 4):
            raise ValueError(f"graph spec {spec!r}: expected rgg:N:radius[:seed]")
        n = int(parts[1])
        radius = rgg_default_radius(n) if parts[2] == "auto" else float(parts[2])
        seed = int(parts[3]) if len(parts) == 4 else default_seed
        return build_rgg(n, radius, seed=seed)
    raise ValueError(f"unknown graph spec {spec!r}")


def parse_grid(spec: str, integer: bool = False):
    """'a,b,c' | 'start:stop:count' | 'start:stop:count:log'"""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) == 3:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            vals = np.linspace(start, stop, count)
        elif len(parts) == 4 and parts[3] == "log":
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            vals = np.geomspace(start, stop, count)
        else:
            raise ValueError(f"bad grid spec {spec!r}")
    else:
        vals = np.array([float(v) for v in spec.split(",")])
    if integer:
        out = sorted({int(round(v)) for v in vals})
        return out
    return vals


def make_params(args) -> AlgoParams:
    return AlgoParams(args.algo, args.q, getattr(args, "p", None))


def _print(line: str) -> None:
    sys.stdout.write(line + "\n")


# ---------------------------------------------------------------------------
# Subcommand handlers: each takes the resolved option dict
# ---------------------------------------------------------------------------


def _plots_enabled(opts) -> bool:
    return not opts.get("no_plots", False)


def _outdir(opts) -> Path:
    return report.ensure_outdir(opts.get("out"))


def handle_graph(opts) -> int:
    out = _outdir(opts)
    graph = parse_graph_spec(opts["graph"])
    path = out / "graph.json"
    graph.save(path)
    report.write_manifest(out, "graph", opts)
    _print(
        f"{graph.describe()} connected={str(graph.is_connected).lower()} "
        f"symmetric={str(graph.is_symmetric).lower()} hash={graph.content_hash()[:16]}"
    )
    _print(f"wrote {path}")
    return EXIT_OK


def handle_simulate(opts) -> int:
    out = _outdir(opts)
    graph = parse_graph_spec(opts["graph"])
    params = AlgoParams(opts["algo"], opts["q"], opts.get("p"))
    policy = SeedPolicy(opts["seed"])
    trial = opts.get("trial", 0)
    x0_spec = opts.get("x0", "random-normal")
    if x0_spec == "random-normal":
        x0 = policy.generator(trial).standard_normal(graph.n)
    elif x0_spec.startswith("constant:"):
        x0 = np.full(graph.n, float(x0_spec.split(":", 1)[1]))
    else:
        raise ValueError(f"unknown x0 spec {x0_spec!r}; use random-normal or constant:VALUE")
    record = run_trajectory(
        graph,
        params,
        x0,
        tol=opts.get("tol", 1e-9),
        max_steps=opts.get("max_steps", 1_000_000),
        seed=policy,
        trial=trial,
        record="full" if opts.get("record") == "full" else "metrics_only",
    )
    record.write_csv(out / "trajectory.csv")
    record.write_meta(out / "trajectory_meta.json")
    report.write_manifest(out, "simulate", opts)
    if _plots_enabled(opts):
        from gossipavg import plotting

        plotting.plot_trajectory(record, out / "trajectory.svg")
    _print(
        f"stop={record.stop_reason} steps={record.steps} "
        f"x_ave={report.fmt(record.averages[-1])} beta={report.fmt(record.final_bias)} "
        f"d={report.fmt(record.dispersion[-1])}"
    )
    return EXIT_OK


def handle_analyze(opts) -> int:
    out = _outdir(opts)
    graph = parse_graph_spec(opts["graph"])
    params = AlgoParams(opts["algo"], opts["q"], opts.get("p"))
    summary = ms.spectral_summary(
        graph,
        params,
        rate_method=opts.get("rate_method", "auto"),
        bias_method=opts.get("bias_method", "auto"),
        want_B=opts.get("want_b", False),
    )
    payload = summary.to_json_dict()
    payload["graph"] = graph.describe()
    payload["graph_hash"] = graph.content_hash()
    if summary.B is not None:
        payload["B"] = summary.B
    report.write_json(out / "summary.json", payload)
    report.write_manifest(out, "analyze", opts)
    _print(
        f"R={report.fmt(summary.rate)} lower={report.fmt(summary.lower_bound)} "
        f"upper={report.fmt(summary.upper_bound)} trB={report.fmt(summary.trB)} "
        f"method={summary.method}"
    )
    for flag in summary.discrepancy_flags:
        _print(f"note: {flag}")
    return EXIT_OK


def handle_sweep(opts) -> int:
    out = _outdir(opts)
    graph = parse_graph_spec(opts["graph"])
    p_grid = parse_grid(opts["p_grid"]) if opts.get("p_grid") else None
    result = xp.sweep_tradeoff(graph, opts["algo"], parse_grid(opts["q_grid"]), p_grid)
    report.write_csv(
        out / "sweep.csv",
        result.rows(),
        ["q", "p", "rate", "lower", "upper", "trB", "method"],
        "gossipavg.sweep.v1",
    )
    report.write_json(
        out / "sweep_summary.json",
        {
            "graph": result.graph_label,
            "algorithm": result.algorithm,
            "monotone_rate_decreasing_in_q": result.monotone_rate_decreasing_in_q,
            "monotone_trB_increasing_in_q": result.monotone_trB_increasing_in_q,
        },
    )
    report.write_manifest(out, "sweep", opts)
    if _plots_enabled(opts):
        from gossipavg import plotting

        plotting.plot_sweep(result, out / "sweep.svg")
        plotting.plot_tradeoff_curve(result, out / "tradeoff.svg")
    for row in result.rows():
        ptxt = f" p={report.fmt(row['p'])}" if row["p"] is not None else ""
        _print(f"q={report.fmt(row['q'])}{ptxt} R={report.fmt(row['rate'])} trB={report.fmt(row['trB'])}")
    return EXIT_OK


def handle_scaling(opts) -> int:
    out = _outdir(opts)
    params = AlgoParams(opts["algo"], opts["q"], opts.get("p"))
    result = xp.scaling_study(
        opts["family"],
        params,
        parse_grid(opts["sizes"], integer=True),
        dims=opts.get("dims", 2),
    )
    report.write_csv(
        out / "scaling.csv",
        result.rows(),
        ["N", "R", "one_minus_R", "trB", "pi0", "esr_C", "esr_gap"],
        "gossipavg.scaling.v1",
    )
    report.write_json(out / "scaling_summary.json", {"family": result.family, "fits": result.fits})
    report.write_manifest(out, "scaling", opts)
    if _plots_enabled(opts):
        from gossipavg import plotting

        plotting.plot_scaling(result, out / "scaling.svg")
    for row in result.rows():
        _print(
            f"N={row['N']} 1-R={report.fmt(row['one_minus_R'])} trB={report.fmt(row['trB'])}"
        )
    f = result.fits
    _print(
        f"slopes (upper half): 1-R {report.fmt(f['one_minus_R']['slope'])} "
        f"trB {report.fmt(f['trB']['slope'])}"
    )
    return EXIT_OK


def handle_rgg_bias(opts) -> int:
    out = _outdir(opts)
    params = AlgoParams(opts["algo"], opts["q"], opts.get("p"))
    result = xp.rgg_bias_experiment(
        parse_grid(opts["n_list"], integer=True),
        opts["runs"],
        params,
        seed=SeedPolicy(opts["seed"]),
        workers=opts.get("workers", 1),
        tol=opts.get("tol", 1e-9),
    )
    report.write_csv(
        out / "rgg_bias.csv",
        result.rows(),
        ["family", "N", "mean_beta", "se", "runs", "discards"],
        "gossipavg.rgg_bias.v1",
    )
    report.write_json(out / "rgg_bias_summary.json", {"fits": result.fits, "runs": result.runs})
    report.write_manifest(out, "rgg-bias", opts)
    if _plots_enabled(opts):
        from gossipavg import plotting

        plotting.plot_rgg_bias(result, out / "rgg_bias.svg")
    for i, n in enumerate(result.n_values):
        _print(
            f"N={n} beta={report.fmt(result.means[i])} se={report.fmt(result.ses[i])} "
            f"discards={result.discards[i]}"
        )
    _print(f"rgg slope {report.fmt(result.fits['rgg']['slope'])}")
    return EXIT_OK


def handle_optimal_p(opts) -> int:
    out = _outdir(opts)
    result = xp.optimal_p_search(
        opts["family"], opts["q"], parse_grid(opts["p_grid"]), opts["n"], dims=opts.get("dims", 2)
    )
    report.write_csv(
        out / "optimal_p.csv",
        result.rows(),
        ["p", "R", "lower_bound"],
        "gossipavg.optimal_p.v1",
    )
    report.write_json(
        out / "optimal_p_summary.json",
        {
            "family": result.family,
            "n": result.n,
            "q": result.q,
            "p_argmin": result.p_argmin,
            "p_argmin_lower_bound": result.p_argmin_lower,
            "p_theory": result.p_theory,
            "distance": result.distance,
        },
    )
    report.write_manifest(out, "optimal-p", opts)
    if _plots_enabled(opts):
        from gossipavg import plotting

        plotting.plot_optimal_p(result, out / "optimal_p.svg")
    _print(
        f"argmin p={report.fmt(result.p_argmin)} theory p*={report.fmt(result.p_theory)} "
        f"distance={report.fmt(result.distance)}"
    )
    return EXIT_OK


def handle_democracy(opts) -> int:
    out = _outdir(opts)
    params = AlgoParams(opts["algo"], opts["q"], opts.get("p"))
    result = xp.weak_democracy_check(
        opts["family"], params, parse_grid(opts["sizes"], integer=True), dims=opts.get("dims", 2)
    )
    report.write_csv(
        out / "democracy.csv", result.rows(), ["N", "pi0", "trB"], "gossipavg.democracy.v1"
    )
    report.write_json(
        out / "democracy_summary.json",
        {
            "family": result.family,
            "verdict": result.verdict,
            "slope": result.slope,
            "limit_estimate": result.limit_estimate,
        },
    )
    report.write_manifest(out, "democracy", opts)
    if _plots_enabled(opts):
        from gossipavg import plotting

        plotting.plot_democracy(result, out / "democracy.svg")
    for row in result.rows():
        _print(f"N={row['N']} pi0={report.fmt(row['pi0'])} trB={report.fmt(row['trB'])}")
    _print(f"verdict={result.verdict} slope={report.fmt(result.slope)}")
    return EXIT_OK


def handle_verify(opts) -> int:
    out = _outdir(opts)
    graph = parse_graph_spec(opts["graph"])
    params = AlgoParams(opts["algo"], opts["q"], opts.get("p"))
    checks = run_verification(graph, params, samples=opts.get("samples", 10_000), seed=SeedPolicy(opts["seed"]))
    report.write_json(
        out / "verify_summary.json",
        {"checks": [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in checks]},
    )
    report.write_manifest(out, "verify", opts)
    failed = False
    for c in checks:
        _print(c.line())
        failed |= not c.ok
    return EXIT_INTERNAL if failed else EXIT_OK


HANDLERS = {
    "graph": handle_graph,
    "simulate": handle_simulate,
    "analyze": handle_analyze,
    "sweep": handle_sweep,
    "scaling": handle_scaling,
    "rgg-bias": handle_rgg_bias,
    "optimal-p": handle_optimal_p,
    "democracy": handle_democracy,
    "verify": handle_verify,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(sp, seed_default=0):
    sp.add_argument("--out", default=None, help="output directory (default: $GOSSIPAVG_OUTDIR or ./gossipavg-out)")
    sp.add_argument("--seed", type=int, default=seed_default, help="master seed")
    sp.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo fan-out")
    sp.add_argument("--no-plots", action="store_true", help="skip SVG figure rendering")


def _add_algo(sp, required=True):
    sp.add_argument("--algo", choices=("bga", "cbga"), required=required, help="protocol")
    sp.add_argument("--q", type=float, required=required, help="mixing weight in (0,1)")
    sp.add_argument("--p", type=float, default=None, help="wake probability in (0,1), cbga only")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gossipavg",
        description="Broadcast gossip averaging: simulation and exact mean-square analysis.",
    )
    ap.add_argument("--from-manifest", default=None, help="re-execute a run from its manifest.json")
    ap.add_argument("--out", default=None, help="output directory override for --from-manifest")
    sub = ap.add_subparsers(dest="command")

    sp = sub.add_parser("graph", help="build, inspect and export a graph")
    sp.add_argument("--graph", required=True, help="family:size | cayley:... | rgg:N:r[:seed] | file.json")
    _add_common(sp)

    sp = sub.add_parser("simulate", help="run one trajectory to consensus")
    sp.add_argument("--graph", required=True)
    _add_algo(sp)
    sp.add_argument("--x0", default="random-normal", help="random-normal | constant:VALUE")
    sp.add_argument("--trial", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--max-steps", type=int, default=1_000_000)
    sp.add_argument("--record", choices=("metrics", "full"), default="metrics")
    _add_common(sp)

    sp = sub.add_parser("analyze", help="rate, bounds and bias of one configuration")
    sp.add_argument("--graph", required=True)
    _add_algo(sp)
    sp.add_argument("--rate-method", choices=ms.RATE_METHODS, default="auto")
    sp.add_argument("--bias-method", choices=ms.BIAS_METHODS, default="auto")
    sp.add_argument("--want-b", action="store_true", help="include the full bias matrix in summary.json")
    _add_common(sp)

    sp = sub.add_parser("sweep", help="rate/bias over q (and p) grids")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--algo", choices=("bga", "cbga"), required=True)
    sp.add_argument("--q-grid", required=True, help="'a,b,c' or start:stop:count[:log]")
    sp.add_argument("--p-grid", default=None)
    _add_common(sp)

    sp = sub.add_parser("scaling", help="exact rate/bias scaling along a family")
    sp.add_argument("--family", choices=xp.FAMILIES, required=True)
    _add_algo(sp)
    sp.add_argument("--sizes", required=True, help="'100,200,400' or start:stop:count[:log]")
    sp.add_argument("--dims", type=int, default=2, help="axes for torus/cayley families")
    _add_common(sp)

    sp = sub.add_parser("rgg-bias", help="Monte Carlo bias on random geometric graphs")
    sp.add_argument("--n-list", required=True)
    sp.add_argument("--runs", type=int, default=1000)
    _add_algo(sp)
    sp.add_argument("--tol", type=float, default=1e-9)
    _add_common(sp)

    sp = sub.add_parser("optimal-p", help="grid-argmin of the collision-protocol rate over p")
    sp.add_argument("--family", choices=("complete", "ring", "torus"), required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--p-grid", default="0.01:0.99:99")
    sp.add_argument("--dims", type=int, default=2)
    _add_common(sp)

    sp = sub.add_parser("democracy", help="vanishing-bias verdict along a growing family")
    sp.add_argument("--family", choices=xp.FAMILIES, required=True)
    _add_algo(sp)
    sp.add_argument("--sizes", required=True)
    sp.add_argument("--dims", type=int, default=2)
    _add_common(sp)

    sp = sub.add_parser("verify", help="run the invariant/oracle suites on a configuration")
    sp.add_argument("--graph", required=True)
    _add_algo(sp)
    sp.add_argument("--samples", type=int, default=10_000)
    _add_common(sp)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.from_manifest:
            manifest = report.read_manifest(args.from_manifest)
            opts = dict(manifest["options"])
            if args.out:
                opts["out"] = args.out
            return HANDLERS[manifest["command"]](opts)
        if not args.command:
            ap.print_help()
            return EXIT_VALIDATION
        opts = {k: v for k, v in vars(args).items() if k not in ("command", "from_manifest")}
        return HANDLERS[args.command](opts)
    except (ValueError, FileNotFoundError, KeyError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_VALIDATION
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
