"""Trade-off sweeps, scaling laws, Monte Carlo bias studies, optimum searches.

Every experiment is a deterministic function of its inputs (seeds
included); Monte Carlo loops fan out over per-trial derived streams so a
worker pool returns bit-identical results to a serial run.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from gossipavg.gossip import AlgoParams, run_to_consensus
from gossipavg.graphs import Graph, build_named_graph, build_rgg, rgg_default_radius
from gossipavg.meansquare import (
    MsaRecursion,
    complete_closed_forms,
    esr,
    invariant_vector,
    is_complete,
    msa_recursion_cayley,
    ring_recursion_bga,
    ring_recursion_cbga,
    spectral_summary,
)
from gossipavg.seeds import SeedPolicy, as_seed_policy


def fan_out(fn, payloads, workers: int = 1):
    """Map fn over payloads, serially or on a process pool.

    Results come back in payload order either way, and each payload
    carries its own derived seed, so the answer is independent of
    worker count.
    """
    payloads = list(payloads)
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    chunk = max(1, len(payloads) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, payloads, chunksize=chunk))


def _loglog_fit(ns, ys) -> dict:
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    if x.size < 2:
        return {"slope": float("nan"), "stderr": float("nan"), "r2": float("nan")}
    if x.size == 2:
        coef = np.polyfit(x, y, 1)
        stderr = float("nan")
    else:
        coef, cov = np.polyfit(x, y, 1, cov=True)
        stderr = float(np.sqrt(cov[0, 0]))
    pred = np.polyval(coef, x)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(coef[0]), "stderr": stderr, "r2": r2}


def upper_half(values):
    values = list(values)
    return values[len(values) // 2 :]


# ---------------------------------------------------------------------------
# Trade-off sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    graph_label: str
    algorithm: str
    q_values: np.ndarray
    p_values: np.ndarray | None
    points: list  # SpectralSummary per grid point, row-major over (q, p)
    monotone_rate_decreasing_in_q: bool | None = None
    monotone_trB_increasing_in_q: bool | None = None

    def rows(self):
        out = []
        for idx, s in enumerate(self.points):
            if self.p_values is None:
                qv, pv = self.q_values[idx], None
            else:
                qv = self.q_values[idx // len(self.p_values)]
                pv = self.p_values[idx % len(self.p_values)]
            out.append(
                {
                    "q": qv,
                    "p": pv,
                    "rate": s.rate,
                    "lower": s.lower_bound,
                    "upper": s.upper_bound,
                    "trB": s.trB,
                    "method": s.method,
                }
            )
        return out


def _check_grid(grid, name):
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError(f"{name} is empty")
    if np.any(grid <= 0.0) or np.any(grid >= 1.0):
        raise ValueError(f"{name} must lie strictly inside (0, 1)")
    if np.any(np.diff(grid) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return grid


def sweep_tradeoff(
    graph: Graph,
    algorithm: str,
    q_grid,
    p_grid=None,
    *,
    rate_method: str = "auto",
    bias_method: str = "auto",
) -> SweepResult:
    """Rate and bias over a grid of mixing weights (and wake probabilities)."""
    q_grid = _check_grid(q_grid, "q_grid")
    if algorithm == "cbga":
        if p_grid is None:
            raise ValueError("cbga sweep needs a p grid")
        p_grid = _check_grid(p_grid, "p_grid")
    elif p_grid is not None:
        raise ValueError("p grid is only meaningful for cbga")

    points = []
    for q in q_grid:
        if p_grid is None:
            params = AlgoParams(algorithm, float(q))
            points.append(spectral_summary(graph, params, rate_method, bias_method))
        else:
            for p in p_grid:
                params = AlgoParams(algorithm, float(q), float(p))
                points.append(spectral_summary(graph, params, rate_method, bias_method))

    res = SweepResult(
        graph_label=graph.describe(),
        algorithm=algorithm,
        q_values=q_grid,
        p_values=p_grid,
        points=points,
    )
    # Pareto diagnostic along q (at the first p for collision sweeps)
    stride = 1 if p_grid is None else len(p_grid)
    rates = [points[i * stride].rate for i in range(len(q_grid))]
    trbs = [points[i * stride].trB for i in range(len(q_grid))]
    if all(v is not None for v in rates) and len(rates) > 1:
        res.monotone_rate_decreasing_in_q = bool(np.all(np.diff(rates) < 0))
    if all(v is not None for v in trbs) and len(trbs) > 1:
        res.monotone_trB_increasing_in_q = bool(np.all(np.diff(trbs) > 0))
    return res


# ---------------------------------------------------------------------------
# Scaling studies
# ---------------------------------------------------------------------------

FAMILIES = ("complete", "ring", "torus", "cayley")


def _family_graph_size(family: str, size: int, dims: int) -> int:
    if family == "torus":
        return size**dims
    if family == "cayley":
        return (2 * size + 1) ** dims
    return size


def _family_recursion(
    family: str, size: int, params: AlgoParams, dims: int = 2, generators=None
) -> tuple[MsaRecursion, int]:
    """Recursion matrix for one member of a growing family.

    ring/complete sizes are node counts; torus sizes are the side
    length; the generic lattice family uses the window half-width n
    (group Z_{2n+1}^dims) with a fixed generator set.
    """
    if family == "ring":
        rec = ring_recursion_bga(size, params.q) if params.is_bga else ring_recursion_cbga(size, params.q, params.p)
        return rec, size
    if family == "complete":
        graph = build_named_graph("complete", [size])
        return msa_recursion_cayley(graph, params), size
    if family == "torus":
        graph = build_named_graph("torus", [size] * dims)
        return msa_recursion_cayley(graph, params), size**dims
    if family == "cayley":
        if generators is None:
            raise ValueError("family='cayley' needs an explicit generator set")
        from gossipavg.graphs import build_cayley

        moduli = [2 * size + 1] * dims
        graph = build_cayley(moduli, generators)
        return msa_recursion_cayley(graph, params), graph.n
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


@dataclass
class ScalingResult:
    family: str
    params: AlgoParams
    sizes: list
    n_values: list
    rates: list
    trBs: list
    pi0s: list
    esr_C: list
    fits: dict = field(default_factory=dict)

    def rows(self):
        return [
            {
                "N": self.n_values[i],
                "R": self.rates[i],
                "one_minus_R": 1.0 - self.rates[i],
                "trB": self.trBs[i],
                "pi0": self.pi0s[i],
                "esr_C": self.esr_C[i],
                "esr_gap": self.rates[i] - self.esr_C[i],
            }
            for i in range(len(self.n_values))
        ]


def scaling_study(
    family: str,
    params: AlgoParams,
    size_list,
    *,
    dims: int = 2,
    generators=None,
) -> ScalingResult:
    """Exact rate and bias along a growing graph family, with log-log fits.

    The headline slopes are fit on the upper half of the size list; the
    small-N transient is reported separately.  Also emits the spectral
    gap between the full recursion and its translation-invariant bulk,
    whose decay shows the local correction not affecting the rate.
    """
    sizes = [int(s) for s in size_list]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("size list must be strictly increasing")
    n_values, rates, trbs, pi0s, esr_cs = [], [], [], [], []
    for size in sizes:
        if family == "complete" and not params.is_bga:
            # exact closed forms (cross-validated against the operator route)
            n = size
            forms = complete_closed_forms(n, params)
            r, pi0, trb = forms.rate, forms.trB + 1.0 / n, forms.trB
            ec = r
        else:
            rec, n = _family_recursion(family, size, params, dims, generators)
            r = esr(rec.matrix)
            pi = invariant_vector(rec.matrix, "solve" if n > 400 else "eig")
            pi0 = float(pi[0])
            trb = pi0 - 1.0 / n
            ec = esr(rec.C)
        n_values.append(n)
        rates.append(float(r))
        trbs.append(float(trb))
        pi0s.append(float(pi0))
        esr_cs.append(float(ec))
    res = ScalingResult(
        family=family,
        params=params,
        sizes=sizes,
        n_values=n_values,
        rates=rates,
        trBs=trbs,
        pi0s=pi0s,
        esr_C=esr_cs,
    )
    gaps = [1.0 - r for r in rates]
    res.fits = {
        "one_minus_R": _loglog_fit(upper_half(n_values), upper_half(gaps)),
        "one_minus_R_all": _loglog_fit(n_values, gaps),
        "trB": _loglog_fit(upper_half(n_values), upper_half(trbs)),
        "trB_all": _loglog_fit(n_values, trbs),
    }
    return res


# ---------------------------------------------------------------------------
# Monte Carlo bias
# ---------------------------------------------------------------------------


def _mc_trial(payload) -> tuple[float, int]:
    graph, params, policy, trial, tol, max_steps, x0_kind = payload
    rng = policy.generator(trial)
    if x0_kind == "normal":
        x0 = rng.standard_normal(graph.n)
    else:
        x0 = np.full(graph.n, float(x0_kind))
    final, steps, done = run_to_consensus(graph, params, x0, tol=tol, max_steps=max_steps, rng=rng)
    beta = (float(final.mean()) - float(x0.mean())) ** 2
    return beta, steps


@dataclass
class MCEstimate:
    mean: float
    se: float
    trials: int
    mean_steps: float


def mc_bias_estimate(
    graph: Graph,
    params: AlgoParams,
    trials: int,
    seed: SeedPolicy | int = 0,
    *,
    tol: float = 1e-9,
    max_steps: int = 200_000_000,
    workers: int = 1,
    x0: str | float = "normal",
) -> MCEstimate:
    """Sample mean and standard error of the terminal squared drift.

    Initial states are i.i.d. standard normal per trial (so the mean
    estimates the bias trace at unit variance); a numeric ``x0`` runs
    from that constant vector instead.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    policy = as_seed_policy(seed)
    payloads = [(graph, params, policy, t, tol, max_steps, x0) for t in range(trials)]
    results = fan_out(_mc_trial, payloads, workers)
    betas = np.array([b for b, _ in results])
    steps = np.array([s for _, s in results], dtype=float)
    se = float(betas.std(ddof=1) / math.sqrt(trials))
    return MCEstimate(mean=float(betas.mean()), se=se, trials=trials, mean_steps=float(steps.mean()))


def _rgg_point(payload) -> tuple[float, int, int]:
    n, radius, params, policy, trial, graph_seed, tol, max_steps, max_resamples = payload
    graph = build_rgg(n, radius, seed=int(graph_seed), max_resamples=max_resamples)
    rng = policy.generator(trial)
    x0 = rng.standard_normal(n)
    final, steps, _ = run_to_consensus(graph, params, x0, tol=tol, max_steps=max_steps, rng=rng)
    beta = (float(final.mean()) - float(x0.mean())) ** 2
    return beta, steps, int(graph.meta["discards"])


@dataclass
class MCBiasResult:
    params: AlgoParams
    n_values: list
    means: list
    ses: list
    runs: int
    discards: list
    companions: dict = field(default_factory=dict)  # family -> list of trB
    fits: dict = field(default_factory=dict)

    def rows(self):
        out = [
            {
                "family": "rgg",
                "N": self.n_values[i],
                "mean_beta": self.means[i],
                "se": self.ses[i],
                "runs": self.runs,
                "discards": self.discards[i],
            }
            for i in range(len(self.n_values))
        ]
        for fam, values in self.companions.items():
            for i, v in enumerate(values):
                out.append(
                    {
                        "family": fam,
                        "N": self.n_values[i],
                        "mean_beta": v,
                        "se": 0.0,
                        "runs": 0,
                        "discards": 0,
                    }
                )
        return out


def rgg_bias_experiment(
    n_list,
    runs: int,
    params: AlgoParams,
    seed: SeedPolicy | int = 0,
    *,
    radius_rule=rgg_default_radius,
    tol: float = 1e-9,
    max_steps: int = 200_000_000,
    workers: int = 1,
    companions: bool = True,
    max_resamples: int = 1000,
) -> MCBiasResult:
    """Terminal bias of fresh geometric graphs across sizes.

    Each run draws its own graph (resampling until connected) and its
    own normal initial state.  Analytic curves for the complete and
    ring graphs at the same sizes come along for the comparison plot.
    """
    if runs < 30:
        raise ValueError(f"need at least 30 runs per point, got {runs}")
    n_list = [int(n) for n in n_list]
    policy = as_seed_policy(seed)
    means, ses, discards = [], [], []
    for i, n in enumerate(n_list):
        radius = float(radius_rule(n))
        graph_seeds = np.random.SeedSequence(policy.master_seed, spawn_key=(i,)).generate_state(runs)
        payloads = [
            (n, radius, params, policy, i * runs + r, graph_seeds[r], tol, max_steps, max_resamples)
            for r in range(runs)
        ]
        results = fan_out(_rgg_point, payloads, workers)
        betas = np.array([b for b, _, _ in results])
        means.append(float(betas.mean()))
        ses.append(float(betas.std(ddof=1) / math.sqrt(runs)))
        discards.append(int(sum(d for _, _, d in results)))
    res = MCBiasResult(
        params=params,
        n_values=n_list,
        means=means,
        ses=ses,
        runs=runs,
        discards=discards,
    )
    if companions:
        comp, ring = [], []
        for n in n_list:
            comp.append(complete_closed_forms(n, params).trB)
            rec = ring_recursion_bga(n, params.q) if params.is_bga else ring_recursion_cbga(n, params.q, params.p)
            pi = invariant_vector(rec.matrix, "solve" if n > 400 else "eig")
            ring.append(float(pi[0] - 1.0 / n))
        res.companions = {"complete": comp, "ring": ring}
    res.fits = {
        "rgg": _loglog_fit(n_list, means),
        "complete": _loglog_fit(n_list, res.companions["complete"]) if companions else None,
        "ring": _loglog_fit(n_list, res.companions["ring"]) if companions else None,
    }
    return res


# ---------------------------------------------------------------------------
# Optimal wake probability
# ---------------------------------------------------------------------------


@dataclass
class OptimalPResult:
    family: str
    n: int
    q: float
    p_grid: np.ndarray
    rates: list
    lower_bounds: list
    p_argmin: float | None
    p_argmin_lower: float
    p_theory: float
    distance: float | None

    def rows(self):
        return [
            {
                "p": self.p_grid[i],
                "R": self.rates[i] if self.rates else None,
                "lower_bound": self.lower_bounds[i],
            }
            for i in range(len(self.p_grid))
        ]


def optimal_p_search(family: str, q: float, p_grid, n: int, *, dims: int = 2) -> OptimalPResult:
    """Grid argmin of the collision-protocol rate over the wake probability.

    Reports the distance of the argmin to the theoretical optimum:
    1/N on the complete graph, 1/(d+1) on d-regular local graphs.  The
    d-regular lower-bound curve (monotone in p(1-p)^d) is always scanned
    alongside the exact rate.
    """
    p_grid = _check_grid(p_grid, "p_grid")
    if family == "complete":
        d = n - 1
        p_theory = 1.0 / n
    elif family == "ring":
        d = 2
        p_theory = 1.0 / 3.0
    elif family == "torus":
        d = 2 * dims
        p_theory = 1.0 / (d + 1)
    else:
        raise ValueError(f"unknown family {family!r}")

    rates = []
    lower = []
    for p in p_grid:
        params = AlgoParams("cbga", q, float(p))
        if family == "complete":
            rates.append(complete_closed_forms(n, params).rate)
        elif family == "ring":
            rates.append(esr(ring_recursion_cbga(n, q, float(p)).matrix))
        else:
            size = max(3, round(n ** (1.0 / dims)))
            graph = build_named_graph("torus", [size] * dims)
            rates.append(esr(msa_recursion_cayley(graph, params).matrix))
        # 1 - 2 q p (1-p)^d lambda_1, constants dropped: argmin = argmax p(1-p)^d
        lower.append(-float(p) * (1.0 - float(p)) ** d)

    p_argmin = float(p_grid[int(np.argmin(rates))]) if rates else None
    p_argmin_lower = float(p_grid[int(np.argmin(lower))])
    return OptimalPResult(
        family=family,
        n=n,
        q=q,
        p_grid=p_grid,
        rates=rates,
        lower_bounds=lower,
        p_argmin=p_argmin,
        p_argmin_lower=p_argmin_lower,
        p_theory=p_theory,
        distance=None if p_argmin is None else abs(p_argmin - p_theory),
    )


# ---------------------------------------------------------------------------
# Vanishing-bias verdicts
# ---------------------------------------------------------------------------


@dataclass
class DemocracyResult:
    family: str
    params: AlgoParams
    sizes: list
    n_values: list
    pi0s: list
    trBs: list
    verdict: str
    slope: float
    limit_estimate: float | None

    def rows(self):
        return [
            {
                "N": self.n_values[i],
                "pi0": self.pi0s[i],
                "trB": self.trBs[i],
            }
            for i in range(len(self.n_values))
        ]


def weak_democracy_check(
    family: str,
    params: AlgoParams,
    size_list,
    *,
    dims: int = 2,
    generators=None,
) -> DemocracyResult:
    """Does the invariant mass at the origin vanish as the family grows?

    A vanishing trace of the bias matrix along the sequence is the
    numerical signature of asymptotic unbiasedness; the complete graph
    is the standing counterexample with limit q/(2-q).
    """
    scaling = scaling_study(family, params, size_list, dims=dims, generators=generators)
    trbs = scaling.trBs
    slope = scaling.fits["trB_all"]["slope"]
    verdict = "inconclusive"
    limit = None
    if len(trbs) >= 2:
        rel_change = abs(trbs[-1] - trbs[-2]) / max(abs(trbs[-1]), 1e-300)
        if rel_change < 0.05 and trbs[-1] > 1e-3:
            verdict = "non-vanishing"
            limit = trbs[-1]
        elif slope < 0 and trbs[-1] < trbs[0] / 4.0:
            verdict = "vanishing"
    return DemocracyResult(
        family=family,
        params=params,
        sizes=scaling.sizes,
        n_values=scaling.n_values,
        pi0s=scaling.pi0s,
        trBs=scaling.trBs,
        verdict=verdict,
        slope=slope,
        limit_estimate=limit,
    )
