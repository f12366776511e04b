"""Invariant and oracle suites runnable on any configuration.

Backs the ``verify`` CLI subcommand: samples protocol steps and checks
their algebraic identities, then compares every applicable closed form
against brute-force expectation.
"""

from __future__ import annotations

import numpy as np

from gossipavg.gossip import AlgoParams, sample_step
from gossipavg.graphs import Graph, graph_of_matrix, subgraph_of
from gossipavg.meansquare import (
    CBGA_ENUM_CAP,
    is_ring,
    lyap_apply_exact,
    lyap_omega_closed_form,
    mean_matrix,
    mean_matrix_enumerated,
    msa_recursion_cayley,
    omega,
    rate,
)
from gossipavg.seeds import SeedPolicy, as_seed_policy


class Check:
    def __init__(self, name: str, ok: bool, detail: str = ""):
        self.name = name
        self.ok = ok
        self.detail = detail

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}" + (f": {self.detail}" if self.detail else "")


def check_step_invariants(
    graph: Graph, params: AlgoParams, samples: int, seed: SeedPolicy | int = 0
) -> list[Check]:
    """Sampled-step identities: stochasticity, P = I - q L(t), set semantics."""
    rng = as_seed_policy(seed).generator(0)
    n = graph.n
    q = params.q
    worst_row = worst_diag = worst_ident = 0.0
    sets_ok = True
    offdiag_ok = True
    for _ in range(samples):
        step = sample_step(graph, params, rng)
        pmat = step.update_matrix
        worst_row = max(worst_row, float(np.max(np.abs(pmat.sum(axis=1) - 1.0))))
        worst_diag = max(worst_diag, float(np.max((1.0 - q) - np.diag(pmat))))
        off = pmat[~np.eye(n, dtype=bool)]
        offdiag_ok &= bool(np.all((np.abs(off) < 1e-12) | (np.abs(off - q) < 1e-12)))
        ident = pmat - (np.eye(n) - q * step.realized_laplacian)
        worst_ident = max(worst_ident, float(np.max(np.abs(ident))))
        if params.is_bga:
            v = step.broadcaster
            sets_ok &= bool(np.array_equal(np.sort(step.receiver_set), graph.out_neighbors(v)))
        else:
            act = set(step.active_set.tolist())
            for u, s in zip(step.receiver_set.tolist(), step.sources.tolist()):
                sets_ok &= u not in act
                active_in = act.intersection(graph.in_neighbors(u).tolist())
                sets_ok &= active_in == {s}
    return [
        Check("row sums equal 1", worst_row < 1e-12, f"max dev {worst_row:.2e} over {samples} samples"),
        Check("diagonal >= 1-q", worst_diag < 1e-12, f"max shortfall {worst_diag:.2e}"),
        Check("off-diagonal entries in {0, q}", offdiag_ok),
        Check("P = I - q L(t)", worst_ident < 1e-12, f"max dev {worst_ident:.2e}"),
        Check("transmission-set semantics", sets_ok),
    ]


def check_mean_against_enumeration(graph: Graph, params: AlgoParams, cap: int = 12) -> list[Check]:
    if graph.n > cap:
        return [Check("exact-enumeration mean", True, f"skipped (N={graph.n} > {cap})")]
    dev = float(np.max(np.abs(mean_matrix_enumerated(graph, params) - mean_matrix(graph, params))))
    return [Check("exact-enumeration mean", dev < 1e-12, f"max dev {dev:.2e}")]


def check_empirical_mean(
    graph: Graph, params: AlgoParams, samples: int, seed: SeedPolicy | int = 1
) -> list[Check]:
    """Sampled mean of P(t) within 4 standard errors entrywise of E[P]."""
    rng = as_seed_policy(seed).generator(0)
    n = graph.n
    total = np.zeros((n, n))
    total2 = np.zeros((n, n))
    for _ in range(samples):
        pmat = sample_step(graph, params, rng).update_matrix
        total += pmat
        total2 += pmat * pmat
    mean = total / samples
    var = np.maximum(total2 / samples - mean * mean, 0.0) * (samples / (samples - 1.0))
    se = np.sqrt(var / samples)
    dev = np.abs(mean - mean_matrix(graph, params))
    ok = bool(np.all(dev <= 4.0 * se + 1e-12))
    return [Check("empirical mean within 4 SE of expected update", ok, f"max dev {dev.max():.2e}")]


def check_operator_closed_forms(graph: Graph, params: AlgoParams, enum_cap: int = CBGA_ENUM_CAP) -> list[Check]:
    out = []
    try:
        cf = lyap_omega_closed_form(graph, params)
    except ValueError as e:
        return [Check("operator closed form", True, f"not applicable ({e})")]
    if params.is_bga or graph.n <= enum_cap:
        exact = lyap_apply_exact(graph, params, omega(graph.n), enum_cap=enum_cap,
                                 method="auto" if params.is_bga else "enumerate")
    else:
        exact = lyap_apply_exact(graph, params, omega(graph.n), method="pairwise")
    dev = float(np.max(np.abs(cf - exact)))
    out.append(Check("operator closed form vs brute force", dev < 1e-12, f"max dev {dev:.2e}"))
    return out


def check_cayley_recursion(graph: Graph, params: AlgoParams, enum_cap: int = CBGA_ENUM_CAP) -> list[Check]:
    if graph.cayley is None:
        return [Check("generating-vector recursion", True, "skipped (no Cayley structure)")]
    out = []
    rec = msa_recursion_cayley(graph, params)
    colsum = float(np.max(np.abs(rec.matrix.sum(axis=0) - 1.0)))
    out.append(Check("recursion column sums equal 1", colsum < 1e-13, f"max dev {colsum:.2e}"))
    if params.is_bga or graph.n <= enum_cap:
        gen = msa_recursion_cayley(graph, params, "generic", enum_cap=enum_cap)
        dev = float(np.max(np.abs(rec.matrix - gen.matrix)))
        out.append(Check("closed construction vs generic columns", dev < 1e-12, f"max dev {dev:.2e}"))
    if is_ring(graph) and graph.n >= (5 if params.is_bga else 9):
        ring = msa_recursion_cayley(graph, params, "ring")
        dev = float(np.max(np.abs(rec.matrix - ring.matrix)))
        out.append(Check("ring explicit construction", dev < 1e-12, f"max dev {dev:.2e}"))
    a = graph.adjacency.astype(np.int64)
    g_m = graph_of_matrix(rec.matrix.T)
    g_big = graph_of_matrix((a + a.T + a.T @ a).astype(float))
    out.append(
        Check(
            "support inclusions of the recursion matrix",
            subgraph_of(graph, g_m) and subgraph_of(g_m, g_big),
        )
    )
    return out


def check_rate_sandwich(graph: Graph, params: AlgoParams) -> list[Check]:
    s = rate(graph, params)
    if s.rate is None or s.upper_bound is None:
        return [Check("rate bounds sandwich", True, "skipped (no exact rate for this configuration)")]
    ok = s.lower_bound - 1e-10 <= s.rate <= s.upper_bound + 1e-10
    return [
        Check(
            "rate bounds sandwich",
            bool(ok),
            f"{s.lower_bound:.6g} <= {s.rate:.6g} <= {s.upper_bound:.6g}",
        )
    ]


def run_verification(
    graph: Graph, params: AlgoParams, samples: int = 10_000, seed: SeedPolicy | int = 0
) -> list[Check]:
    checks = []
    checks += check_step_invariants(graph, params, samples, seed)
    checks += check_mean_against_enumeration(graph, params)
    checks += check_empirical_mean(graph, params, max(samples, 1000), seed)
    checks += check_operator_closed_forms(graph, params)
    checks += check_cayley_recursion(graph, params)
    checks += check_rate_sandwich(graph, params)
    return checks
