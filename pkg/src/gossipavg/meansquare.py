"""Exact second-moment analysis of the broadcast protocols.

Centers on the operator ``Lyap(M) = E[P(t)^T M P(t)]`` driving the
squared-dispersion recursion: its spectral radius on the space reachable
from the centering projector gives the convergence rate, and its unit
eigenvector gives the asymptotic bias matrix.  On translation-invariant
(Cayley) graphs the operator collapses to an N x N matrix acting on
generating vectors, which makes rings of thousands of nodes tractable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gossipavg.gossip import AlgoParams, sample_step
from gossipavg.graphs import (
    Graph,
    cayl,
    generating_vector_of,
    neg_indices,
    sub_indices,
)
from gossipavg.seeds import SeedPolicy, as_seed_policy

#: Largest N for which the CBGA expectation is evaluated by summing all
#: 2^N wake sets.  Past the cap the exact local-probability route or the
#: Monte Carlo estimator takes over.
CBGA_ENUM_CAP = 16

#: An eigenvalue counts as the invariant one only within this distance
#: of 1; anything farther means the dynamics are defective.
UNIT_EIG_TOL = 1e-9

RATE_METHODS = ("auto", "cayley_exact", "reachable_space_exact", "bounds_only", "closed_form")
BIAS_METHODS = ("auto", "cayley", "iterative", "general", "closed_form")


# ---------------------------------------------------------------------------
# Family detection
# ---------------------------------------------------------------------------


def is_complete(graph: Graph) -> bool:
    a = graph.adjacency
    return bool(np.array_equal(a + np.eye(graph.n, dtype=a.dtype), np.ones_like(a) + 0))


def is_ring(graph: Graph) -> bool:
    c = graph.cayley
    if c is None or len(c.moduli) != 1 or graph.n < 4:
        return False
    n = graph.n
    return set(c.generators) == {(1,), (n - 1,)}


# ---------------------------------------------------------------------------
# Expected update matrix
# ---------------------------------------------------------------------------


def mean_matrix(graph: Graph, params: AlgoParams) -> np.ndarray:
    """E[P(t)].

    BGA:  I - (q/N) L.
    CBGA: I - q p diag((1-p)^indeg) L; the row scaling is the chance
    that a given in-neighbor is heard (it must be awake while the
    receiver and its remaining in-neighbors sleep).
    """
    lap = graph.laplacian.astype(float)
    n = graph.n
    if params.is_bga:
        return np.eye(n) - (params.q / n) * lap
    scale = params.p * (1.0 - params.p) ** graph.in_degrees.astype(float)
    return np.eye(n) - params.q * scale[:, None] * lap


def mean_matrix_enumerated(graph: Graph, params: AlgoParams, enum_cap: int = CBGA_ENUM_CAP) -> np.ndarray:
    """E[P(t)] by explicit enumeration of every realization (test oracle)."""
    n = graph.n
    if params.is_bga:
        acc = np.zeros((n, n))
        for v in range(n):
            rows = graph.out_neighbors(v)
            pmat = np.eye(n)
            pmat[rows, rows] -= params.q
            pmat[rows, v] += params.q
            acc += pmat
        return acc / n
    if n > enum_cap:
        raise ValueError(f"enumeration over 2^{n} wake sets exceeds cap {enum_cap}")
    in_masks = [int(sum(1 << v for v in graph.in_neighbors(u))) for u in range(n)]
    p, q = params.p, params.q
    acc = np.zeros((n, n))
    for mask in range(1 << n):
        k = bin(mask).count("1")
        w = p**k * (1.0 - p) ** (n - k)
        pmat = np.eye(n)
        for u in range(n):
            if (mask >> u) & 1:
                continue
            m = in_masks[u] & mask
            if m and (m & (m - 1)) == 0:
                src = m.bit_length() - 1
                pmat[u, u] -= q
                pmat[u, src] += q
        acc += w * pmat
    return acc


# ---------------------------------------------------------------------------
# The second-moment operator
# ---------------------------------------------------------------------------


def _quad_update(acc, m, recs, srcs, q, w=1.0):
    """acc += w * (P^T m P - m) for P = I - q L with L rows (e_u - e_src)."""
    if recs.size == 0:
        return
    mr = m[recs, :]
    acc[recs, :] -= (w * q) * mr
    np.add.at(acc, srcs, (w * q) * mr)
    mc = m[:, recs]
    acc[:, recs] -= (w * q) * mc
    np.add.at(acc, (np.arange(m.shape[0])[:, None], srcs[None, :]), (w * q) * mc)
    y = m[np.ix_(recs, recs)]
    wq2 = w * q * q
    acc[np.ix_(recs, recs)] += wq2 * y
    np.add.at(acc, (srcs[:, None], recs[None, :]), -wq2 * y)
    np.add.at(acc, (recs[:, None], srcs[None, :]), -wq2 * y)
    np.add.at(acc, (srcs[:, None], srcs[None, :]), wq2 * y)


def _lyap_bga(graph: Graph, q: float, m: np.ndarray) -> np.ndarray:
    n = graph.n
    acc = m * float(n)
    for v in range(n):
        recs = graph.out_neighbors(v)
        _quad_update(acc, m, recs, np.full(recs.size, v), q)
    return acc / n


def _lyap_cbga_enum(graph: Graph, params: AlgoParams, m: np.ndarray, enum_cap: int) -> np.ndarray:
    n = graph.n
    if n > enum_cap:
        raise ValueError(
            f"exact CBGA expectation enumerates 2^{n} wake sets, beyond cap {enum_cap}; "
            "use method='pairwise' or lyap_apply_mc"
        )
    in_masks = [int(sum(1 << v for v in graph.in_neighbors(u))) for u in range(n)]
    p, q = params.p, params.q
    acc = np.zeros((n, n))
    wsum = 0.0
    for mask in range(1 << n):
        k = bin(mask).count("1")
        w = p**k * (1.0 - p) ** (n - k)
        wsum += w
        recs = []
        srcs = []
        for u in range(n):
            if (mask >> u) & 1:
                continue
            mm = in_masks[u] & mask
            if mm and (mm & (mm - 1)) == 0:
                recs.append(u)
                srcs.append(mm.bit_length() - 1)
        _quad_update(acc, m, np.asarray(recs, dtype=np.int64), np.asarray(srcs, dtype=np.int64), q, w)
    return acc + wsum * m


def _cbga_joint(a, v, b, vp, innb, p):
    """Pr[a hears v and b hears vp] for independent wake coins.

    The event pins {v, vp} awake and {a, b} plus all their other
    in-neighbors asleep; it is a plain cylinder, so the probability is a
    monomial unless the two requirement sets clash.
    """
    on = {v, vp}
    off = {a, b}
    off.update(u for u in innb[a] if u != v)
    off.update(u for u in innb[b] if u != vp)
    if on & off:
        return 0.0
    return p ** len(on) * (1.0 - p) ** len(off)


def _lyap_cbga_pairwise(graph: Graph, params: AlgoParams, m: np.ndarray) -> np.ndarray:
    """Exact CBGA expectation via pairwise success probabilities (any N).

    Writes E[L^T M L] as the independent product term plus covariance
    corrections, which vanish unless the two receptions share a node in
    their closed in-neighborhoods.
    """
    n = graph.n
    p, q = params.p, params.q
    ebar = params.p * (1.0 - params.p) ** graph.in_degrees.astype(float)
    lbar = ebar[:, None] * graph.laplacian.astype(float)
    base = m - q * (lbar.T @ m + m @ lbar) + q * q * (lbar.T @ m @ lbar)
    innb = [graph.in_neighbors(u).tolist() for u in range(n)]
    closed = graph.adjacency.astype(bool) | np.eye(n, dtype=bool)
    overlap = (closed @ closed.T.astype(np.int64)) > 0
    marg = {}

    def marginal(a, v):
        key = (a, v)
        if key not in marg:
            marg[key] = p * (1.0 - p) ** len(innb[a])
        return marg[key]

    corr = np.zeros((n, n))
    for a in range(n):
        for b in np.flatnonzero(overlap[a]):
            mab = m[a, b]
            for v in innb[a]:
                for vp in innb[int(b)]:
                    j = _cbga_joint(a, v, int(b), vp, innb, p)
                    w = (j - marginal(a, v) * marginal(int(b), vp)) * mab
                    if w != 0.0:
                        corr[a, b] += w
                        corr[a, vp] -= w
                        corr[v, b] -= w
                        corr[v, vp] += w
    return base + q * q * corr


def lyap_apply_exact(
    graph: Graph,
    params: AlgoParams,
    m: np.ndarray,
    *,
    enum_cap: int = CBGA_ENUM_CAP,
    method: str = "auto",
) -> np.ndarray:
    """Exact E[P^T M P].

    BGA averages the N broadcaster realizations.  CBGA enumerates wake
    sets up to ``enum_cap`` nodes; ``method="pairwise"`` switches to the
    local-probability route that scales to any N, and ``auto`` does so
    past the cap.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (graph.n, graph.n):
        raise ValueError(f"matrix must be {graph.n} x {graph.n}, got {m.shape}")
    if params.is_bga:
        return _lyap_bga(graph, params.q, m)
    if method == "enumerate":
        return _lyap_cbga_enum(graph, params, m, enum_cap)
    if method == "pairwise":
        return _lyap_cbga_pairwise(graph, params, m)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if graph.n <= enum_cap:
        return _lyap_cbga_enum(graph, params, m, enum_cap)
    return _lyap_cbga_pairwise(graph, params, m)


def lyap_apply_mc(
    graph: Graph,
    params: AlgoParams,
    m: np.ndarray,
    trials: int,
    seed: SeedPolicy | int = 0,
    trial: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo E[P^T M P]: (entrywise mean, entrywise standard error)."""
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials for a usable error bar, got {trials}")
    m = np.asarray(m, dtype=float)
    n = graph.n
    rng = as_seed_policy(seed).generator(trial)
    total = np.zeros((n, n))
    total2 = np.zeros((n, n))
    for _ in range(trials):
        step = sample_step(graph, params, rng)
        acc = np.zeros((n, n))
        _quad_update(acc, m, step.receiver_set, step.sources, params.q)
        sample = m + acc
        total += sample
        total2 += sample * sample
    mean = total / trials
    var = np.maximum(total2 / trials - mean * mean, 0.0) * (trials / (trials - 1.0))
    return mean, np.sqrt(var / trials)


# ---------------------------------------------------------------------------
# Closed forms for the operator applied to the centering projector
# ---------------------------------------------------------------------------


def omega(n: int) -> np.ndarray:
    return np.eye(n) - np.ones((n, n)) / n


#: Corrected circulant correction for the CBGA ring: coefficients at
#: offsets 0..4 (symmetric).  The displayed vector in the source
#: derivation carries a global sign error and omits the +-4 entry; this
#: version satisfies sum(tau) = 0, which the operator identity
#: Lyap(Omega) 1 = 0 forces, and reproduces the brute-force expectation.
def _ring_tau(p: float, n: int) -> np.ndarray:
    coeffs = [
        4.0 - 2.0 * p,
        -(6.0 - 4.0 * p + p * p),
        3.0 * (2.0 - 2.0 * p + p * p),
        -(2.0 - 4.0 * p + 3.0 * p * p),
        p * (p - 1.0),
    ]
    tau = np.zeros(n)
    tau[0] = coeffs[0]
    for k in range(1, 5):
        tau[k] += coeffs[k]
        tau[-k] += coeffs[k]
    return tau


def lyap_omega_closed_form(graph: Graph, params: AlgoParams) -> np.ndarray:
    """Closed-form Lyap(Omega).

    BGA admits a closed form on every graph; the collision protocol only
    on rings with at least 9 nodes (shorter rings overlap the
    interaction window).
    """
    n = graph.n
    lap = graph.laplacian.astype(float)
    q = params.q
    if params.is_bga:
        if graph.is_symmetric:
            return omega(n) - 2.0 * q * (1.0 - q) / n * lap - (q / n) ** 2 * (lap @ lap)
        one = np.ones((n, n))
        dplus = np.diag(graph.out_degrees.astype(float))
        b = dplus - graph.adjacency.astype(float)
        return (
            omega(n)
            - q * (1.0 - q) / n * (lap + lap.T)
            + q / n**2 * (lap.T @ one + one @ lap)
            - (q / n) ** 2 * (b @ b.T)
        )
    if not is_ring(graph):
        raise ValueError(
            "closed-form CBGA operator is only available on ring graphs; "
            "use lyap_apply_exact or lyap_apply_mc"
        )
    if n < 9:
        raise ValueError(f"the ring closed form needs N >= 9, got {n}")
    p = params.p
    pf = p * (1.0 - p) ** 2
    return (
        omega(n)
        - 2.0 * q * (1.0 - q) * pf * lap
        - q * q * pf / n * (lap @ lap)
        + q * q * p * pf / n * cayl(_ring_tau(p, n), (n,))
    )


def lyap_omega_exact(graph: Graph, params: AlgoParams, *, enum_cap: int = CBGA_ENUM_CAP) -> np.ndarray:
    """Best exact Lyap(Omega) available for the configuration."""
    if params.is_bga:
        return lyap_omega_closed_form(graph, params)
    if is_ring(graph) and graph.n >= 9:
        return lyap_omega_closed_form(graph, params)
    if graph.cayley is not None:
        rec = msa_recursion_cayley(graph, params)
        gen = rec.matrix @ generating_vector_of(omega(graph.n))
        return cayl(gen, graph.cayley.moduli)
    return lyap_apply_exact(graph, params, omega(graph.n), enum_cap=enum_cap)


# ---------------------------------------------------------------------------
# Cayley recursion on generating vectors
# ---------------------------------------------------------------------------


@dataclass
class MsaRecursion:
    """pi(t+1) = (C + T) pi(t) for the generating vector of Delta(t).

    ``C`` is the translation-invariant bulk; ``T`` the fixed local
    correction whose support never grows with N.
    """

    C: np.ndarray
    T: np.ndarray
    moduli: tuple
    method: str = "generic"

    @property
    def matrix(self) -> np.ndarray:
        return self.C + self.T

    @property
    def n(self) -> int:
        return self.C.shape[0]


def _require_cayley(graph: Graph) -> None:
    if graph.cayley is None:
        raise ValueError("this operation needs a graph with Cayley structure")


def _bga_cayley_recursion(graph: Graph, params: AlgoParams) -> MsaRecursion:
    """Generator-pair accumulation; O(|S|^2) beyond the Cayley bulk."""
    cay = graph.cayley
    n = graph.n
    q = params.q
    lap = graph.laplacian.astype(float)
    c = np.eye(n) - (q / n) * (lap + lap.T)
    s_idx = cay.generator_indices()
    d = s_idx.size
    diffs = sub_indices(s_idx[:, None], s_idx[None, :], cay.moduli)  # d x d, s - s'
    neg = neg_indices(s_idx, cay.moduli)
    flat = diffs.ravel()
    t = np.zeros((n, n))
    np.add.at(t, (flat, flat), 1.0)
    np.add.at(t, (np.repeat(s_idx, d), flat), -1.0)
    np.add.at(t, (np.tile(neg, d), flat), -1.0)
    np.add.at(t, (np.zeros(d * d, dtype=np.int64), flat), 1.0)
    t *= q * q / n
    return MsaRecursion(C=c, T=t, moduli=cay.moduli, method="generator_pairs")


def _cbga_cayley_recursion(graph: Graph, params: AlgoParams) -> MsaRecursion:
    """Local-probability construction; exact for any N.

    Only summands with the reception of node b=0 (or of a generator
    offset) in view contribute to the generating-vector update, so the
    quadratic kernel costs O(N |S|^2) closed-form joint probabilities.
    """
    cay = graph.cayley
    n = graph.n
    moduli = cay.moduli
    q, p = params.q, params.p
    s_idx = cay.generator_indices()
    d = s_idx.size
    all_nodes = np.arange(n, dtype=np.int64)
    in_nb = sub_indices(all_nodes[:, None], s_idx[None, :], moduli)  # (n, d)
    innb = [row.tolist() for row in in_nb]
    sub_to = {int(b): sub_indices(all_nodes, np.full(n, b, dtype=np.int64), moduli) for b in [0, *s_idx]}

    k = np.zeros((n, n))
    for b in [0, *s_idx.tolist()]:
        b = int(b)
        tcol = sub_to[b]
        if b == 0:
            for a in range(n):
                t = int(tcol[a])
                for v in innb[a]:
                    for vp in innb[0]:
                        pr = _cbga_joint(a, v, 0, vp, innb, p)
                        if pr:
                            k[a, t] += pr
                            k[v, t] -= pr
        else:
            for a in range(n):
                t = int(tcol[a])
                for v in innb[a]:
                    pr = _cbga_joint(a, v, b, 0, innb, p)
                    if pr:
                        k[a, t] -= pr
                        k[v, t] += pr

    lap = graph.laplacian.astype(float)
    kappa = q * p * (1.0 - p) ** d
    m = np.eye(n) - kappa * (lap + lap.T) + q * q * k
    c = (np.eye(n) - kappa * lap.T) @ (np.eye(n) - kappa * lap)
    return MsaRecursion(C=c, T=m - c, moduli=moduli, method="local_joints")


def _generic_cayley_recursion(
    graph: Graph, params: AlgoParams, enum_cap: int = CBGA_ENUM_CAP
) -> MsaRecursion:
    """Column-by-column oracle: column g is gen(Lyap(cayl(e_g)))."""
    cay = graph.cayley
    n = graph.n
    m = np.empty((n, n))
    basis = np.zeros(n)
    for g in range(n):
        basis[:] = 0.0
        basis[g] = 1.0
        image = lyap_apply_exact(
            graph,
            params,
            cayl(basis, cay.moduli),
            enum_cap=enum_cap,
            method="auto" if params.is_bga else "enumerate",
        )
        m[:, g] = image[:, 0]
    c = _cayley_bulk(graph, params)
    return MsaRecursion(C=c, T=m - c, moduli=cay.moduli, method="generic_columns")


def _cayley_bulk(graph: Graph, params: AlgoParams) -> np.ndarray:
    n = graph.n
    lap = graph.laplacian.astype(float)
    if params.is_bga:
        return np.eye(n) - (params.q / n) * (lap + lap.T)
    kappa = params.q * params.p * (1.0 - params.p) ** graph.cayley.degree
    return (np.eye(n) - kappa * lap.T) @ (np.eye(n) - kappa * lap)


def ring_recursion_bga(n: int, q: float) -> MsaRecursion:
    """Explicit ring construction; needs N >= 5 to keep offsets distinct."""
    if n < 5:
        raise ValueError(f"explicit ring construction needs N >= 5, got {n}")
    c = np.zeros(n)
    c[0] = 1.0 - 4.0 * q / n
    c[1] = c[-1] = 2.0 * q / n
    cmat = cayl(c, (n,))
    t = np.zeros((n, n))
    scale = q * q / n
    entries = {
        (0, 0): 4.0,
        (0, 2): 1.0,
        (0, -2): 1.0,
        (1, 0): -2.0,
        (1, 2): -2.0,
        (2, 2): 1.0,
        (-1, 0): -2.0,
        (-1, -2): -2.0,
        (-2, -2): 1.0,
    }
    for (i, j), v in entries.items():
        t[i % n, j % n] = scale * v
    return MsaRecursion(C=cmat, T=t, moduli=(n,), method="ring_explicit")


def ring_recursion_cbga(n: int, q: float, p: float) -> MsaRecursion:
    """Explicit collision-protocol ring construction (N >= 9).

    ``C`` is the square of the expected update; ``T`` carries the
    25-entry polynomial correction confined to offsets within 4 of the
    listening window.
    """
    if n < 9:
        raise ValueError(f"explicit collision ring construction needs N >= 9, got {n}")
    kappa = q * p * (1.0 - p) ** 2
    k1 = 2.0 * kappa * (1.0 - 2.0 * kappa)
    k2 = kappa * kappa
    c = np.zeros(n)
    c[0] = 1.0 - 2.0 * k1 - 2.0 * k2
    c[1] = c[-1] = k1
    c[2] = c[-2] = k2
    cmat = cayl(c, (n,))

    om = 1.0 - p
    upper = {
        (0, 0): 4.0 - 6.0 * p * om**2,
        (0, 1): 4.0 * p * om**2,
        (0, 2): om**3,
        (0, -1): 4.0 * p * om**2,
        (0, -2): om**3,
        (1, 0): 4.0 * p * om**2 - 2.0,
        (1, 1): (1.0 - 6.0 * om**2) * p,
        (1, 2): 2.0 * (2.0 * p - 1.0) * om**2,
        (1, -1): -p * om**2,
        (2, 0): -p * om**2,
        (2, 1): 4.0 * p * om**2 - 2.0 * p,
        (2, 2): om * (1.0 - 6.0 * p * om),
        (3, 1): (1.0 - om**2) * p,
        (3, 2): -2.0 * p * om * (2.0 * p - 1.0),
        (4, 2): p * p * om,
    }
    t = np.zeros((n, n))
    scale = q * q * p * om**2
    for (i, j), v in upper.items():
        t[i % n, j % n] = scale * v
        if (i, j) != (0, 0):
            t[(-i) % n, (-j) % n] = scale * v
    return MsaRecursion(C=cmat, T=t, moduli=(n,), method="ring_explicit")


def msa_recursion_cayley(
    graph: Graph,
    params: AlgoParams,
    construction: str = "auto",
    *,
    enum_cap: int = CBGA_ENUM_CAP,
) -> MsaRecursion:
    """Build the generating-vector recursion matrix M = C + T.

    ``auto`` uses the closed local constructions (exact at any N);
    ``generic`` runs the operator column by column over the Cayley basis
    (the independent oracle, enumeration-capped for CBGA); ``ring``
    forces the explicit ring formulas.
    """
    _require_cayley(graph)
    if construction == "auto":
        if params.is_bga:
            return _bga_cayley_recursion(graph, params)
        return _cbga_cayley_recursion(graph, params)
    if construction == "generic":
        return _generic_cayley_recursion(graph, params, enum_cap=enum_cap)
    if construction == "ring":
        if not is_ring(graph):
            raise ValueError("construction='ring' needs a ring graph")
        if params.is_bga:
            return ring_recursion_bga(graph.n, params.q)
        return ring_recursion_cbga(graph.n, params.q, params.p)
    raise ValueError(f"unknown construction {construction!r}")


# ---------------------------------------------------------------------------
# Spectral helpers
# ---------------------------------------------------------------------------


def esr(matrix_or_eigs, unit_tol: float = UNIT_EIG_TOL) -> float:
    """Second-largest eigenvalue modulus, after removing the unit one.

    Exactly one eigenvalue within ``unit_tol`` of 1 is removed; if the
    nearest-to-1 eigenvalue is farther away the spectrum does not match
    a convergent stochastic recursion and this raises.
    """
    w = np.asarray(matrix_or_eigs)
    if w.ndim == 2:
        w = np.linalg.eigvals(w)
    i = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[i] - 1.0) > unit_tol:
        raise ValueError(f"no eigenvalue within {unit_tol:g} of 1 (nearest: {w[i]})")
    rest = np.delete(w, i)
    if rest.size == 0:
        return 0.0
    return float(np.max(np.abs(rest)))


def spectral_radius_sym(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=float)
    return float(np.max(np.abs(np.linalg.eigvalsh((m + m.T) / 2.0))))


def smallest_positive_laplacian_eig(graph: Graph) -> float:
    if not graph.is_symmetric:
        raise ValueError("lambda_1 is defined here for symmetric graphs only")
    w = np.linalg.eigvalsh(graph.laplacian.astype(float))
    pos = w[w > 1e-9]
    if pos.size == 0:
        raise ValueError("Laplacian has no positive eigenvalue (empty graph?)")
    return float(pos.min())


def invariant_vector(m: np.ndarray, method: str = "eig", *, unit_tol: float = UNIT_EIG_TOL) -> np.ndarray:
    """Right fixed vector pi' with M pi' = pi' and sum(pi') = 1.

    ``eig`` picks the eigenvector of the eigenvalue nearest 1 (which
    must be within ``unit_tol``); a second unit eigenvalue means the
    dynamics decouple and is reported as such.  ``solve`` replaces one
    row of M - I with the normalization (faster for large N); ``power``
    is the fixed-point iteration used for cross-validation.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if method == "eig":
        w, vecs = np.linalg.eig(m)
        order = np.argsort(np.abs(w - 1.0))
        i = int(order[0])
        if abs(w[i] - 1.0) > unit_tol:
            raise ValueError(f"no unit eigenvalue: nearest is {w[i]}")
        if n > 1:
            j = int(order[1])
            if abs(w[j] - 1.0) <= unit_tol:
                raise ValueError(
                    f"unit eigenvalue is not simple: second eigenvalue {w[j]} also lies "
                    f"within {unit_tol:g} of 1 (disconnected dynamics?)"
                )
        v = vecs[:, i]
        v = v / v.sum()
        if np.abs(v.imag).max(initial=0.0) > 1e-9:
            raise ValueError("invariant vector has a significant imaginary part")
        return np.ascontiguousarray(v.real)
    if method == "solve":
        a = m - np.eye(n)
        a[0, :] = 1.0
        rhs = np.zeros(n)
        rhs[0] = 1.0
        v = np.linalg.solve(a, rhs)
        resid = float(np.max(np.abs(m @ v - v)))
        if resid > 1e-8:
            raise ValueError(f"solve-based invariant vector residual {resid:g} too large")
        return v
    if method == "power":
        v = np.full(n, 1.0 / n)
        for _ in range(10_000_000):
            nxt = m @ v
            nxt = nxt / nxt.sum()
            if np.max(np.abs(nxt - v)) < 1e-14:
                return nxt
            v = nxt
        raise RuntimeError("fixed-point iteration did not converge")
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Rate and bias
# ---------------------------------------------------------------------------


@dataclass
class SpectralSummary:
    """Rate/bias bundle for one (graph, parameters) configuration."""

    n: int
    params: AlgoParams
    rate: float | None = None
    lower_bound: float | None = None
    upper_bound: float | None = None
    method: str | None = None
    trB: float | None = None
    bias_method: str | None = None
    invariant_vector: np.ndarray | None = None
    B: np.ndarray | None = None
    discrepancy_flags: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = {
            "rate": self.rate,
            "lower": self.lower_bound,
            "upper": self.upper_bound,
            "trB": self.trB,
            "method": self.method,
            "bias_method": self.bias_method,
            "n": self.n,
            "params": self.params.to_dict(),
            "discrepancy_flags": list(self.discrepancy_flags),
        }
        d.update({k: v for k, v in self.extras.items() if np.isscalar(v) or v is None})
        return d


@dataclass
class CompleteClosedForms:
    """Fully-connected graph: everything in closed form."""

    n: int
    params: AlgoParams
    rate: float
    trB: float
    B: np.ndarray
    weight: float  # chance that a step is a clean single broadcast
    two_by_two: np.ndarray  # the operator on span{I, 11^T / N}
    unit_direction: np.ndarray  # (q, 2(1-q)), the fixed direction

    @property
    def two_by_two_eigenvalues(self) -> np.ndarray:
        return np.array([1.0, self.rate])


def complete_closed_forms(n: int, params: AlgoParams) -> CompleteClosedForms:
    q = params.q
    if params.is_bga:
        w = 1.0
    else:
        w = n * params.p * (1.0 - params.p) ** (n - 1)
    rate_val = 1.0 - q * (2.0 - q) * w
    trb = q / (2.0 - q) * (1.0 - 1.0 / n)
    bmat = q / (2.0 - q) / n * omega(n)
    two = np.array(
        [
            [1.0 - 2.0 * q * (1.0 - q) * w, q * q * w],
            [2.0 * q * (1.0 - q) * w, 1.0 - q * q * w],
        ]
    )
    return CompleteClosedForms(
        n=n,
        params=params,
        rate=rate_val,
        trB=trb,
        B=bmat,
        weight=w,
        two_by_two=two,
        unit_direction=np.array([q, 2.0 * (1.0 - q)]),
    )


def reachable_space_rate(
    graph: Graph,
    params: AlgoParams,
    *,
    residual_tol: float = 1e-10,
    max_dim: int = 600,
    enum_cap: int = CBGA_ENUM_CAP,
) -> float:
    """Spectral radius of the operator restricted to the orbit of Omega.

    Arnoldi in the trace inner product on the matrix space: the Krylov
    basis {Omega, Lyap(Omega), ...} is orthonormalized until the next
    direction falls inside the span, at which point the restriction is
    exact and its spectral radius is the rate.
    """
    n = graph.n
    q0 = omega(n)
    q0 = q0 / np.linalg.norm(q0)
    basis = [q0]
    hcols: list[list[float]] = []
    while True:
        j = len(hcols)
        w = lyap_apply_exact(graph, params, basis[j], enum_cap=enum_cap)
        col = []
        for b in basis:
            h = float(np.vdot(b, w))
            w = w - h * b
            col.append(h)
        for i, b in enumerate(basis):  # one re-orthogonalization pass
            c = float(np.vdot(b, w))
            w = w - c * b
            col[i] += c
        r = float(np.linalg.norm(w))
        hcols.append(col)
        if r < residual_tol:
            break
        if len(basis) >= max_dim:
            raise RuntimeError(
                f"reachable space exceeds {max_dim} dimensions before closing "
                f"(residual {r:.3g}); raise max_dim or use another method"
            )
        basis.append(w / r)
        col.append(r)
    m = len(hcols)
    h = np.zeros((m, m))
    for j, col in enumerate(hcols):
        h[: len(col), j] = col[:m]
    return float(np.max(np.abs(np.linalg.eigvals(h))))


_RING_FLAG_TAU = (
    "cbga-ring closed form uses a corrected circulant correction: the displayed "
    "vector's sign is flipped and its +-4 entry p(p-1) restored so the correction "
    "annihilates constants"
)
_RING_FLAG_PI = (
    "asymptotic ring rate bounds use 8*pi^2/N^2 (resp. /N^3) from the derivation; "
    "the displayed constant 8*pi is recorded as the rejected alternative"
)


def ring_rate_asymptotics(n: int, params: AlgoParams) -> dict:
    """Large-N rate bound estimates for the ring, both protocols.

    Returns the adopted pi^2 forms alongside the displayed-8*pi variant
    they conflict with, so reports can show both.
    """
    q = params.q
    if params.is_bga:
        base = 8.0 * math.pi**2 / n**3
        alt = 8.0 * math.pi / n**3
    else:
        pf = params.p * (1.0 - params.p) ** 2
        base = pf * 8.0 * math.pi**2 / n**2
        alt = pf * 8.0 * math.pi / n**2
    return {
        "lower": 1.0 - q * base,
        "upper": 1.0 - q * (1.0 - q) * base,
        "lower_8pi_variant": 1.0 - q * alt,
        "upper_8pi_variant": 1.0 - q * (1.0 - q) * alt,
        "flags": [_RING_FLAG_PI],
    }


def _resolve_rate_method(graph: Graph, params: AlgoParams, method: str) -> str:
    if method != "auto":
        return method
    if is_complete(graph):
        return "closed_form"
    if graph.cayley is not None:
        return "cayley_exact"
    return "bounds_only"


def rate(
    graph: Graph,
    params: AlgoParams,
    method: str = "auto",
    *,
    enum_cap: int = CBGA_ENUM_CAP,
    max_dim: int = 600,
    want_bounds: bool = True,
) -> SpectralSummary:
    """Convergence rate of expected squared dispersion, with bounds.

    The sandwich esr(mean)^2 <= rate <= sr(Lyap(Omega)) is attached
    whenever requested; `bounds_only` returns just the sandwich (plus
    the d-regular collision lower bound where defined).
    """
    if method not in RATE_METHODS:
        raise ValueError(f"method must be one of {RATE_METHODS}")
    resolved = _resolve_rate_method(graph, params, method)
    out = SpectralSummary(n=graph.n, params=params)
    out.method = resolved

    if want_bounds or resolved == "bounds_only":
        mean = mean_matrix(graph, params)
        out.lower_bound = esr(mean) ** 2
        try:
            lom = lyap_omega_exact(graph, params, enum_cap=enum_cap)
            out.upper_bound = spectral_radius_sym(lom)
        except ValueError:
            out.upper_bound = None
        if not params.is_bga and graph.is_symmetric:
            degs = np.unique(graph.in_degrees)
            if degs.size == 1:
                d = float(degs[0])
                lam1 = smallest_positive_laplacian_eig(graph)
                out.extras["lower_bound_dregular"] = (
                    1.0 - 2.0 * params.q * params.p * (1.0 - params.p) ** d * lam1
                )
                out.extras["lambda_1"] = lam1

    if resolved == "closed_form":
        if not is_complete(graph):
            raise ValueError("closed_form rate is only available on the complete graph")
        out.rate = complete_closed_forms(graph.n, params).rate
    elif resolved == "cayley_exact":
        _require_cayley(graph)
        rec = msa_recursion_cayley(graph, params, enum_cap=enum_cap)
        out.rate = esr(rec.matrix)
    elif resolved == "reachable_space_exact":
        out.rate = reachable_space_rate(graph, params, max_dim=max_dim, enum_cap=enum_cap)
    elif resolved == "bounds_only":
        out.rate = None
    else:
        raise ValueError(f"cannot resolve method {resolved!r}")

    if is_ring(graph):
        out.extras["asymptotic_bounds"] = ring_rate_asymptotics(graph.n, params)
        out.discrepancy_flags.append(_RING_FLAG_PI)
        if not params.is_bga:
            out.discrepancy_flags.append(_RING_FLAG_TAU)
    return out


def _resolve_bias_method(graph: Graph, params: AlgoParams, method: str) -> str:
    if method != "auto":
        return method
    if graph.cayley is not None:
        return "cayley"
    return "general"


def _fixed_point_of_lyap(graph, params, enum_cap, tol=1e-13, max_iter=500_000):
    """lim Lyap^t(11^T); the limit is N^2 E[rho rho^T]."""
    n = graph.n
    delta = np.ones((n, n))
    for _ in range(max_iter):
        nxt = lyap_apply_exact(graph, params, delta, enum_cap=enum_cap)
        if np.max(np.abs(nxt - delta)) < tol:
            return nxt
        delta = nxt
    raise RuntimeError(
        "second-moment fixed point did not converge within the iteration budget; "
        "use the cayley method or a Monte Carlo estimate"
    )


def bias(
    graph: Graph,
    params: AlgoParams,
    method: str = "auto",
    *,
    want_B: bool = False,
    enum_cap: int = CBGA_ENUM_CAP,
) -> SpectralSummary:
    """Asymptotic squared drift of the running average, as a matrix trace.

    cayley:    tr B = pi'_0 - 1/N from the invariant generating vector.
    iterative: B = lim Lyap^t(11^T)/N^2 - 11^T/N^2 (doubly stochastic mean only).
    general:   B = E[rho rho^T] - 2 E[rho] 1^T / N + 11^T / N^2.
    """
    if method not in BIAS_METHODS:
        raise ValueError(f"method must be one of {BIAS_METHODS}")
    resolved = _resolve_bias_method(graph, params, method)
    n = graph.n
    out = SpectralSummary(n=n, params=params)
    out.bias_method = resolved

    if resolved == "closed_form":
        if not is_complete(graph):
            raise ValueError("closed_form bias is only available on the complete graph")
        forms = complete_closed_forms(n, params)
        out.trB = forms.trB
        if want_B:
            out.B = forms.B
        return out

    if resolved == "cayley":
        _require_cayley(graph)
        rec = msa_recursion_cayley(graph, params, enum_cap=enum_cap)
        method_iv = "eig" if n <= 800 else "solve"
        pi = invariant_vector(rec.matrix, method=method_iv)
        out.invariant_vector = pi
        out.trB = float(pi[0] - 1.0 / n)
        if want_B:
            out.B = cayl(pi - 1.0 / n, graph.cayley.moduli) / n
        return out

    mean = mean_matrix(graph, params)
    if resolved == "iterative":
        col_dev = float(np.max(np.abs(mean.sum(axis=0) - 1.0)))
        if col_dev > 1e-12:
            raise ValueError(
                f"iterative bias needs a doubly stochastic expected update "
                f"(column-sum deviation {col_dev:.3g}); use method='general'"
            )
        delta = _fixed_point_of_lyap(graph, params, enum_cap)
        b = delta / n**2 - np.ones((n, n)) / n**2
    elif resolved == "general":
        delta = _fixed_point_of_lyap(graph, params, enum_cap)
        rho2 = delta / n**2  # normalized: 1^T Lyap^t(11^T) 1 is invariant
        rho1 = invariant_vector(mean.T, method="eig")
        b = rho2 - 2.0 / n * np.outer(rho1, np.ones(n)) + np.ones((n, n)) / n**2
    else:
        raise ValueError(f"cannot resolve method {resolved!r}")
    out.trB = float(np.trace(b))
    if want_B:
        out.B = b
    return out


def spectral_summary(
    graph: Graph,
    params: AlgoParams,
    rate_method: str = "auto",
    bias_method: str = "auto",
    *,
    want_B: bool = False,
    enum_cap: int = CBGA_ENUM_CAP,
) -> SpectralSummary:
    """Rate and bias of one configuration, merged into one record."""
    r = rate(graph, params, rate_method, enum_cap=enum_cap)
    b = bias(graph, params, bias_method, want_B=want_B, enum_cap=enum_cap)
    r.trB = b.trB
    r.bias_method = b.bias_method
    r.invariant_vector = b.invariant_vector
    r.B = b.B
    return r
