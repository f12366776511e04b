"""One-step sampling and full trajectories of the two broadcast protocols.

BGA: one node, uniformly random, broadcasts; each of its out-neighbors
moves to a convex combination with weight q on the received value.

CBGA: every node wakes up independently with probability p and
broadcasts; a silent node receives only when exactly one of its
in-neighbors is awake (otherwise the messages destroy each other), and
an awake node never receives (half-duplex).

Every realized update is ``P(t) = I - q L(t)`` where L(t) is the
Laplacian of the subgraph of successful transmissions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from gossipavg import _engine
from gossipavg.graphs import Graph
from gossipavg.seeds import SeedPolicy, as_seed_policy

ALGORITHMS = ("bga", "cbga")


@dataclass(frozen=True)
class AlgoParams:
    """Protocol selector with mixing weight q and (CBGA) wake probability p."""

    algorithm: str
    q: float
    p: float | None = None

    def __post_init__(self):
        algorithm = self.algorithm.lower()
        object.__setattr__(self, "algorithm", algorithm)
        if algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if algorithm == "cbga":
            if self.p is None:
                raise ValueError("cbga needs a wake probability p")
            if not (0.0 < self.p < 1.0):
                # p = 1 freezes the dynamics: everyone talks, nobody listens.
                raise ValueError(f"p must lie in (0, 1), got {self.p}")
        elif self.p is not None:
            raise ValueError("p is only meaningful for cbga")

    @property
    def is_bga(self) -> bool:
        return self.algorithm == "bga"

    def label(self) -> str:
        if self.is_bga:
            return f"bga(q={self.q:g})"
        return f"cbga(q={self.q:g}, p={self.p:g})"

    def to_dict(self) -> dict:
        d = {"algorithm": self.algorithm, "q": self.q}
        if self.p is not None:
            d["p"] = self.p
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AlgoParams":
        return cls(algorithm=d["algorithm"], q=float(d["q"]), p=d.get("p"))


@dataclass
class StepRealization:
    """One sampled update, materialized for inspection and tests."""

    update_matrix: np.ndarray  # P(t), row stochastic
    active_set: np.ndarray  # broadcaster(s)
    receiver_set: np.ndarray
    sources: np.ndarray  # sources[i] transmitted to receiver_set[i]
    realized_laplacian: np.ndarray  # L(t) with P(t) = I - q L(t)

    @property
    def broadcaster(self) -> int:
        if self.active_set.size != 1:
            raise ValueError("broadcaster is only defined for single-transmitter steps")
        return int(self.active_set[0])

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.update_matrix @ np.asarray(x, dtype=float)


def _realization(n: int, q: float, active, receivers, sources) -> StepRealization:
    receivers = np.asarray(receivers, dtype=np.int64)
    sources = np.asarray(sources, dtype=np.int64)
    lap = np.zeros((n, n))
    lap[receivers, receivers] = 1.0
    lap[receivers, sources] = -1.0
    return StepRealization(
        update_matrix=np.eye(n) - q * lap,
        active_set=np.asarray(active, dtype=np.int64),
        receiver_set=receivers,
        sources=sources,
        realized_laplacian=lap,
    )


def sample_bga_step(graph: Graph, params: AlgoParams, rng: np.random.Generator) -> StepRealization:
    """Draw a broadcaster uniformly; its out-neighbors are the receivers."""
    if not params.is_bga:
        raise ValueError("params.algorithm must be 'bga'")
    v = int(rng.integers(0, graph.n))
    receivers = graph.out_neighbors(v)
    return _realization(graph.n, params.q, [v], receivers, np.full(receivers.size, v))


def sample_cbga_step(graph: Graph, params: AlgoParams, rng: np.random.Generator) -> StepRealization:
    """Draw the wake set; a silent node with exactly one awake in-neighbor receives."""
    if params.is_bga:
        raise ValueError("params.algorithm must be 'cbga'")
    act = rng.random(graph.n) < params.p
    a = graph.adjacency
    counts = a @ act.astype(np.int64)
    rec = (counts == 1) & ~act
    receivers = np.flatnonzero(rec)
    sources = (a * act[None, :]) @ np.arange(graph.n, dtype=np.int64)
    return _realization(graph.n, params.q, np.flatnonzero(act), receivers, sources[receivers])


def sample_step(graph: Graph, params: AlgoParams, rng: np.random.Generator) -> StepRealization:
    if params.is_bga:
        return sample_bga_step(graph, params, rng)
    return sample_cbga_step(graph, params, rng)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

STOP_CONSENSUS = "consensus"
STOP_MAX_STEPS = "max_steps"


@dataclass
class TrajectoryRecord:
    """Per-step metrics of one run, plus the states when recorded in full.

    ``averages[t]`` is the running mean of the states, ``dispersion[t]``
    the mean squared deviation from it, and ``bias[t]`` the squared
    drift of the mean from its initial value; index 0 is the initial
    condition.
    """

    averages: np.ndarray
    dispersion: np.ndarray
    bias: np.ndarray
    final_state: np.ndarray
    stop_reason: str
    steps: int
    states: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def final_bias(self) -> float:
        return float(self.bias[-1])

    def write_csv(self, path) -> None:
        n = self.final_state.size
        with open(path, "w") as f:
            cols = "t,x_ave,d,beta"
            if self.states is not None:
                cols += "," + ",".join(f"x_{i}" for i in range(n))
            f.write("# schema: gossipavg.trajectory.v1\n")
            f.write(cols + "\n")
            for t in range(self.steps + 1):
                row = f"{t},{self.averages[t]:.12g},{self.dispersion[t]:.12g},{self.bias[t]:.12g}"
                if self.states is not None:
                    row += "," + ",".join(f"{v:.12g}" for v in self.states[t])
                f.write(row + "\n")

    def write_meta(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.meta, f, indent=1, sort_keys=True)
            f.write("\n")


def _spread(x: np.ndarray) -> float:
    return float(x.max() - x.min())


def run_trajectory(
    graph: Graph,
    params: AlgoParams,
    x0: np.ndarray,
    *,
    tol: float = 1e-9,
    max_steps: int = 1_000_000,
    seed: SeedPolicy | int = 0,
    trial: int = 0,
    record: str = "metrics_only",
) -> TrajectoryRecord:
    """Iterate x(t+1) = P(t) x(t) until max(x)-min(x) < tol or max_steps.

    ``record="full"`` additionally stores every state vector.  Runs are
    bit-reproducible given (seed, trial); hitting max_steps (e.g. on a
    disconnected graph) is reported via ``stop_reason``, not an error.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if record not in ("metrics_only", "full"):
        raise ValueError(f"record must be 'metrics_only' or 'full', got {record!r}")
    x = np.array(x0, dtype=float).copy()
    n = graph.n
    if x.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},), got {x.shape}")
    policy = as_seed_policy(seed)
    rng = policy.generator(trial)
    full = record == "full"

    ave0 = float(x.mean())
    aves = [ave0]
    disps = [float(np.mean((x - ave0) ** 2))]
    betas = [0.0]
    states = [x.copy()] if full else None

    stop_reason = STOP_MAX_STEPS
    steps = 0
    if _spread(x) < tol:
        stop_reason = STOP_CONSENSUS
    else:
        done = False
        while not done and steps < max_steps:
            if params.is_bga:
                chunk = min(_engine.BGA_CHUNK, max_steps - steps)
                vs = rng.integers(0, n, size=chunk)
                consumed, done = _advance(graph, params, x, vs, None, tol, aves, disps, betas, states, ave0, full)
            else:
                chunk = min(_engine.cbga_chunk(n), max_steps - steps)
                u01 = rng.random((chunk, n))
                consumed, done = _advance(graph, params, x, None, u01, tol, aves, disps, betas, states, ave0, full)
            steps += consumed
        if done:
            stop_reason = STOP_CONSENSUS

    rec = TrajectoryRecord(
        averages=np.asarray(aves),
        dispersion=np.asarray(disps),
        bias=np.asarray(betas),
        final_state=x,
        stop_reason=stop_reason,
        steps=steps,
        states=np.asarray(states) if full else None,
        meta={
            "graph_hash": graph.content_hash(),
            "graph": graph.describe(),
            "n": n,
            "params": params.to_dict(),
            "seed_policy": policy.to_dict(),
            "trial": trial,
            "tol": tol,
            "max_steps": max_steps,
            "record": record,
            "stop_reason": stop_reason,
            "steps": steps,
        },
    )
    return rec


def _advance(graph, params, x, vs, u01, tol, aves, disps, betas, states, ave0, full):
    """Apply one chunk, appending metrics (and states when asked)."""
    n = graph.n
    if full:
        # plain numpy per step; arithmetic matches the kernels exactly
        count = vs.size if vs is not None else u01.shape[0]
        a = graph.adjacency
        idx = np.arange(n, dtype=np.int64)
        for i in range(count):
            if vs is not None:
                v = int(vs[i])
                rows = graph.out_neighbors(v)
                x[rows] = (1.0 - params.q) * x[rows] + params.q * x[v]
            else:
                act = u01[i] < params.p
                counts = a @ act.astype(np.int64)
                rec = (counts == 1) & ~act
                srcs = (a * act[None, :]) @ idx
                rows = np.flatnonzero(rec)
                x[rows] = (1.0 - params.q) * x[rows] + params.q * x[srcs[rows]]
            ave = float(x.mean())
            aves.append(ave)
            disps.append(max(float(np.mean(x * x)) - ave * ave, 0.0))
            betas.append((ave - ave0) ** 2)
            states.append(x.copy())
            if _spread(x) < tol:
                return i + 1, True
        return count, False

    chunk = vs.size if vs is not None else u01.shape[0]
    a_aves = np.empty(chunk)
    a_disps = np.empty(chunk)
    a_betas = np.empty(chunk)
    if vs is not None:
        out_ptr, out_idx = graph.out_csr()
        consumed, done = _engine.bga_chunk_metrics(
            x, out_ptr, out_idx, params.q, vs, tol, a_aves, a_disps, a_betas, 0, ave0
        )
    else:
        in_ptr, in_idx = graph.in_csr()
        act = np.zeros(n, dtype=np.bool_)
        consumed, done = _engine.cbga_chunk_metrics(
            x, in_ptr, in_idx, params.q, params.p, u01, tol, a_aves, a_disps, a_betas, 0, ave0, act
        )
    aves.extend(a_aves[:consumed].tolist())
    disps.extend(a_disps[:consumed].tolist())
    betas.extend(a_betas[:consumed].tolist())
    return consumed, done


def run_to_consensus(
    graph: Graph,
    params: AlgoParams,
    x0: np.ndarray,
    *,
    tol: float = 1e-9,
    max_steps: int = 100_000_000,
    rng: np.random.Generator,
    check_period: int | None = None,
) -> tuple[np.ndarray, int, bool]:
    """Bare engine for Monte Carlo work: no per-step recording.

    The consensus test runs every ``check_period`` steps (default: one
    sweep's worth, n), so the returned stopping step may overshoot the
    first hitting time by less than one period; the measured final state
    still satisfies the stopping criterion.
    """
    x = np.array(x0, dtype=float).copy()
    n = graph.n
    if check_period is None:
        check_period = max(1, n)
    if _spread(x) < tol:
        return x, 0, True
    steps = 0
    done = False
    while not done and steps < max_steps:
        if params.is_bga:
            out_ptr, out_idx = graph.out_csr()
            chunk = min(_engine.BGA_CHUNK, max_steps - steps)
            vs = rng.integers(0, n, size=chunk)
            consumed, done = _engine.bga_chunk_plain(
                x, out_ptr, out_idx, params.q, vs, tol, check_period, steps
            )
        else:
            in_ptr, in_idx = graph.in_csr()
            chunk = min(_engine.cbga_chunk(n), max_steps - steps)
            u01 = rng.random((chunk, n))
            act = np.zeros(n, dtype=np.bool_)
            consumed, done = _engine.cbga_chunk_plain(
                x, in_ptr, in_idx, params.q, params.p, u01, tol, check_period, steps, act
            )
        steps += consumed
    return x, steps, done
