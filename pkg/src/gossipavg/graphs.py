"""Directed graphs the gossip protocols run on.

Conventions
-----------
Edges are ordered pairs ``(v, u)`` meaning "v transmits to u"; the
adjacency matrix stores ``A[u, v] = 1`` for that edge, so row ``u`` lists
the in-neighbors of ``u`` and column ``v`` lists the out-neighbors of
``v``.  Self-loops are excluded.  The Laplacian is ``L = D_in - A``.

Cayley graphs over direct products of cyclic groups Z_{m1} x ... x Z_{md}
get first-class support: the node ``h`` is reached from ``g`` iff
``h - g`` lies in the generator set, which makes the adjacency a
translation-invariant (Cayley) matrix.  Group elements are identified
with flat indices in mixed-radix order (first modulus slowest).
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from gossipavg.seeds import SeedPolicy

#: Hard cap on node counts for the named-family constructors.
MAX_NODES = 1 << 20

#: Entries of closed-form matrices below this magnitude are treated as
#: arithmetic noise when reading a graph off a matrix.
DEFAULT_ZERO_TOL = 1e-12


# ---------------------------------------------------------------------------
# Group arithmetic on flat indices
# ---------------------------------------------------------------------------


def group_order(moduli) -> int:
    return int(reduce(lambda a, b: a * b, (int(m) for m in moduli), 1))


def _strides(moduli) -> np.ndarray:
    # C order: last axis fastest
    m = np.asarray(moduli, dtype=np.int64)
    s = np.ones(len(m), dtype=np.int64)
    for i in range(len(m) - 2, -1, -1):
        s[i] = s[i + 1] * m[i + 1]
    return s


def encode_elements(elements, moduli) -> np.ndarray:
    """Map group elements (…, d) to flat indices, reducing mod the moduli."""
    m = np.asarray(moduli, dtype=np.int64)
    e = np.mod(np.asarray(elements, dtype=np.int64), m)
    return e @ _strides(moduli)


def decode_indices(indices, moduli) -> np.ndarray:
    """Inverse of :func:`encode_elements`; returns shape (…, d)."""
    m = np.asarray(moduli, dtype=np.int64)
    idx = np.asarray(indices, dtype=np.int64)
    out = np.empty(idx.shape + (len(m),), dtype=np.int64)
    rem = idx
    for i, s in enumerate(_strides(moduli)):
        out[..., i] = rem // s
        rem = rem % s
    return out


def add_indices(a, b, moduli) -> np.ndarray:
    return encode_elements(decode_indices(a, moduli) + decode_indices(b, moduli), moduli)


def sub_indices(a, b, moduli) -> np.ndarray:
    return encode_elements(decode_indices(a, moduli) - decode_indices(b, moduli), moduli)


def neg_indices(a, moduli) -> np.ndarray:
    return encode_elements(-decode_indices(a, moduli), moduli)


def difference_table(moduli) -> np.ndarray:
    """N x N table D with D[h, g] = index of h - g."""
    n = group_order(moduli)
    idx = np.arange(n)
    h = decode_indices(idx, moduli)[:, None, :]
    g = decode_indices(idx, moduli)[None, :, :]
    return encode_elements(h - g, moduli)


def cayl(gen, moduli) -> np.ndarray:
    """Translation-invariant matrix with ``M[h, g] = gen[h - g]``."""
    gen = np.asarray(gen)
    n = group_order(moduli)
    if gen.shape != (n,):
        raise ValueError(f"generating vector has length {gen.shape}, group order is {n}")
    return gen[difference_table(moduli)]


def generating_vector_of(matrix, moduli=None) -> np.ndarray:
    """Column-0 slice of a Cayley matrix; inverse of :func:`cayl`.

    ``cayl(gen)[h, 0] = gen[h]`` for every group, so the zero column
    recovers the generating vector exactly (the zero row only does for
    inversion-symmetric vectors).
    """
    matrix = np.asarray(matrix)
    return matrix[:, 0].copy()


@dataclass(frozen=True)
class GeneratingVector:
    """Length-N vector defining a Cayley matrix over the given group."""

    entries: np.ndarray
    moduli: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=float))
        object.__setattr__(self, "moduli", tuple(int(m) for m in self.moduli))
        if self.entries.shape != (group_order(self.moduli),):
            raise ValueError("entry count does not match group order")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def matrix(self) -> np.ndarray:
        return cayl(self.entries, self.moduli)

    def is_symmetric(self, tol: float = 0.0) -> bool:
        rev = self.entries[neg_indices(np.arange(self.n), self.moduli)]
        return bool(np.all(np.abs(self.entries - rev) <= tol))


# ---------------------------------------------------------------------------
# Cayley structure and Graph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CayleyStructure:
    """Generator set ``S`` over Z_{m1} x ... x Z_{md} (0 excluded)."""

    moduli: tuple
    generators: tuple  # tuple of element tuples, canonical and sorted

    def __post_init__(self):
        moduli = tuple(int(m) for m in self.moduli)
        if not moduli or any(m < 1 for m in moduli):
            raise ValueError(f"moduli must be positive integers, got {moduli}")
        gens = []
        for g in self.generators:
            if isinstance(g, (int, np.integer)):
                g = (int(g),)
            g = tuple(int(x) % m for x, m in zip(g, moduli))
            if len(g) != len(moduli):
                raise ValueError(f"generator {g} has wrong dimension for moduli {moduli}")
            gens.append(g)
        gens = sorted(set(gens))
        if any(all(x == 0 for x in g) for g in gens):
            raise ValueError("0 is not allowed in a generator set")
        if not gens:
            raise ValueError("generator set is empty")
        object.__setattr__(self, "moduli", moduli)
        object.__setattr__(self, "generators", tuple(gens))

    @property
    def order(self) -> int:
        return group_order(self.moduli)

    @property
    def degree(self) -> int:
        return len(self.generators)

    def generator_indices(self) -> np.ndarray:
        return encode_elements(np.asarray(self.generators, dtype=np.int64), self.moduli)

    def is_inverse_closed(self) -> bool:
        gen_idx = set(self.generator_indices().tolist())
        return all(int(i) in gen_idx for i in neg_indices(np.array(sorted(gen_idx)), self.moduli))

    def adjacency(self) -> np.ndarray:
        gen = np.zeros(self.order, dtype=np.int8)
        gen[self.generator_indices()] = 1
        return cayl(gen, self.moduli)

    def generates_group(self) -> bool:
        """BFS from 0 under +S; True iff every element is reachable."""
        n = self.order
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        gidx = self.generator_indices()
        while frontier:
            f = np.asarray(frontier, dtype=np.int64)
            frontier = []
            for g in gidx:
                nxt = add_indices(f, np.full_like(f, g), self.moduli)
                fresh = nxt[~seen[nxt]]
                if fresh.size:
                    seen[fresh] = True
                    frontier.extend(fresh.tolist())
        return bool(seen.all())

    def to_dict(self) -> dict:
        return {"moduli": list(self.moduli), "generators": [list(g) for g in self.generators]}

    @classmethod
    def from_dict(cls, d: dict) -> "CayleyStructure":
        return cls(moduli=tuple(d["moduli"]), generators=tuple(tuple(g) for g in d["generators"]))


@dataclass
class Graph:
    """Directed graph with dense 0/1 adjacency (``A[u, v]=1`` iff v -> u)."""

    adjacency: np.ndarray
    cayley: CayleyStructure | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(np.diagonal(a) != 0):
            raise ValueError("self-loops are not allowed")
        self.adjacency = a.astype(np.int8)
        if self.cayley is not None:
            if self.cayley.order != a.shape[0]:
                raise ValueError("Cayley group order does not match node count")
            if not np.array_equal(self.cayley.adjacency(), self.adjacency):
                raise ValueError("adjacency is not the Cayley matrix of the declared generators")
        self._cache: dict = {}

    # -- derived views ----------------------------------------------------

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def in_degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1, dtype=np.int64)

    @property
    def out_degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=0, dtype=np.int64)

    @property
    def laplacian(self) -> np.ndarray:
        a = self.adjacency.astype(np.int64)
        return np.diag(self.in_degrees) - a

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.adjacency, self.adjacency.T))

    @property
    def is_connected(self) -> bool:
        """Strong connectivity."""
        if "connected" not in self._cache:
            ncomp, _ = connected_components(
                sp.csr_matrix(self.adjacency), directed=True, connection="strong"
            )
            self._cache["connected"] = bool(ncomp == 1)
        return self._cache["connected"]

    def in_neighbors(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[u, :])

    def out_neighbors(self, v: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[:, v])

    def out_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) listing out-neighbors per node."""
        if "out_csr" not in self._cache:
            c = sp.csc_matrix(self.adjacency)
            self._cache["out_csr"] = (c.indptr.astype(np.int64), c.indices.astype(np.int64))
        return self._cache["out_csr"]

    def in_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) listing in-neighbors per node."""
        if "in_csr" not in self._cache:
            c = sp.csr_matrix(self.adjacency)
            self._cache["in_csr"] = (c.indptr.astype(np.int64), c.indices.astype(np.int64))
        return self._cache["in_csr"]

    def edges(self) -> list[tuple[int, int]]:
        """Edges as (source, target) pairs, sorted."""
        us, vs = np.nonzero(self.adjacency)
        return sorted((int(v), int(u)) for u, v in zip(us, vs))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.n).encode())
        h.update(np.ascontiguousarray(self.adjacency).tobytes())
        if self.cayley is not None:
            h.update(json.dumps(self.cayley.to_dict(), sort_keys=True).encode())
        return h.hexdigest()

    # -- file format -------------------------------------------------------

    def to_dict(self) -> dict:
        d = {"n": self.n, "edges": [[s, t] for s, t in self.edges()]}
        if self.cayley is not None:
            d["cayley"] = self.cayley.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        n = int(d["n"])
        a = np.zeros((n, n), dtype=np.int8)
        for s, t in d["edges"]:
            s, t = int(s), int(t)
            if not (0 <= s < n and 0 <= t < n):
                raise ValueError(f"edge ({s},{t}) out of range for n={n}")
            if s == t:
                raise ValueError(f"self-loop ({s},{t}) in graph file")
            a[t, s] = 1
        cay = CayleyStructure.from_dict(d["cayley"]) if d.get("cayley") else None
        return cls(adjacency=a, cayley=cay)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Graph":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def describe(self) -> str:
        kind = self.meta.get("family", "cayley" if self.cayley else "graph")
        return f"{kind}(n={self.n}, edges={int(self.adjacency.sum())})"


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

NAMED_FAMILIES = ("complete", "ring", "torus", "hypercube")


def build_named_graph(family: str, size_spec) -> Graph:
    """Standard Cayley families.

    complete N   -> Z_N with every nonzero element as a generator
    ring N       -> Z_N with {+1, -1}
    torus n1,…,nd-> Z_{n1} x … x Z_{nd} with {+e_i, -e_i}
    hypercube n  -> Z_2^n with {e_i}
    """
    sizes = [int(s) for s in size_spec]
    if family == "complete":
        if len(sizes) != 1 or sizes[0] < 3:
            raise ValueError(f"complete graph needs a single size >= 3, got {sizes}")
        (n,) = sizes
        _check_order(n)
        cay = CayleyStructure(moduli=(n,), generators=tuple((k,) for k in range(1, n)))
    elif family == "ring":
        if len(sizes) != 1 or sizes[0] < 3:
            raise ValueError(f"ring needs a single size >= 3, got {sizes}")
        (n,) = sizes
        _check_order(n)
        cay = CayleyStructure(moduli=(n,), generators=((1,), (n - 1,)))
    elif family == "torus":
        if not sizes or any(s < 2 for s in sizes):
            raise ValueError(f"torus needs every axis >= 2, got {sizes}")
        _check_order(group_order(sizes))
        d = len(sizes)
        gens = []
        for i in range(d):
            e = [0] * d
            e[i] = 1
            gens.append(tuple(e))
            e = [0] * d
            e[i] = -1
            gens.append(tuple(e))
        cay = CayleyStructure(moduli=tuple(sizes), generators=tuple(gens))
    elif family == "hypercube":
        if len(sizes) != 1 or sizes[0] < 1:
            raise ValueError(f"hypercube needs a single dimension >= 1, got {sizes}")
        (d,) = sizes
        _check_order(1 << d)
        gens = []
        for i in range(d):
            e = [0] * d
            e[i] = 1
            gens.append(tuple(e))
        cay = CayleyStructure(moduli=(2,) * d, generators=tuple(gens))
    else:
        raise ValueError(f"unknown family {family!r}; expected one of {NAMED_FAMILIES}")
    g = Graph(adjacency=cay.adjacency(), cayley=cay)
    g.meta["family"] = family
    g.meta["size_spec"] = sizes
    return g


def _check_order(n: int) -> None:
    if n > MAX_NODES:
        raise ValueError(f"graph order {n} exceeds configured maximum {MAX_NODES}")


def build_cayley(moduli, generators) -> Graph:
    """Cayley graph of an explicit generator set.

    A disconnected result (S does not generate the group) is legal and
    only triggers a warning, since disconnected dynamics are themselves
    worth studying.
    """
    cay = CayleyStructure(moduli=tuple(moduli), generators=tuple(generators))
    _check_order(cay.order)
    g = Graph(adjacency=cay.adjacency(), cayley=cay)
    g.meta["family"] = "cayley"
    if not cay.generates_group():
        warnings.warn(
            f"generators {cay.generators} do not generate Z_{cay.moduli}: graph is disconnected",
            stacklevel=2,
        )
        g.meta["disconnected"] = True
    return g


def rgg_default_radius(n: int) -> float:
    """Connectivity-scaled radius 0.8 * sqrt(log N / N) for the unit square."""
    if n < 2:
        raise ValueError("need at least 2 nodes")
    return 0.8 * math.sqrt(math.log(n) / n)


def build_rgg(
    n: int,
    radius: float,
    seed: int | SeedPolicy = 0,
    require_connected: bool = True,
    max_resamples: int = 1000,
) -> Graph:
    """Random geometric graph on the unit square.

    Samples ``n`` points i.i.d. uniform on [0,1]^2 and joins pairs at
    Euclidean distance <= radius (symmetric edges).  With
    ``require_connected`` the point set is redrawn from sub-seeded
    streams until the graph is connected; the number of discarded
    samples is recorded in ``meta["discards"]``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    policy = seed if isinstance(seed, SeedPolicy) else SeedPolicy(int(seed))
    for attempt in range(max_resamples + 1):
        rng = policy.generator(trial=attempt)
        pts = rng.random((n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        dist2 = np.einsum("ijk,ijk->ij", diff, diff)
        a = (dist2 <= radius * radius).astype(np.int8)
        np.fill_diagonal(a, 0)
        g = Graph(adjacency=a)
        if not require_connected or g.is_connected:
            g.meta.update(
                {
                    "family": "rgg",
                    "radius": float(radius),
                    "seed": int(policy.master_seed),
                    "discards": attempt,
                    "points": pts,
                    "mean_degree": float(g.in_degrees.mean()),
                }
            )
            return g
    raise RuntimeError(
        f"no connected geometric graph within {max_resamples} resamples "
        f"(n={n}, radius={radius:g}); increase the radius or the budget"
    )


# ---------------------------------------------------------------------------
# Spectra and matrix-induced graphs
# ---------------------------------------------------------------------------


def cayley_eigenvalues(gen: GeneratingVector) -> np.ndarray:
    """Eigenvalues of ``cayl(gen)`` by the group character formula.

    For Z_{m1} x … x Z_{md} the eigenvalues are the multidimensional
    DFT of the generating vector; symmetric generating vectors yield a
    real spectrum which is returned with the imaginary parts dropped.
    """
    vals = np.fft.fftn(gen.entries.reshape(gen.moduli)).ravel()
    if gen.is_symmetric() and np.abs(vals.imag).max(initial=0.0) < 1e-12:
        return vals.real.copy()
    return vals


def circulant_eigenvalues(gen: GeneratingVector) -> np.ndarray:
    """Single-modulus (Z_N) specialization of :func:`cayley_eigenvalues`."""
    if len(gen.moduli) != 1:
        raise ValueError(
            "circulant_eigenvalues expects a Z_N generating vector; "
            "use cayley_eigenvalues for multidimensional groups"
        )
    return cayley_eigenvalues(gen)


def graph_of_matrix(m: np.ndarray, zero_tol: float = DEFAULT_ZERO_TOL) -> Graph:
    """Graph with an edge (v, w) wherever ``|M[w, v]| > zero_tol`` (v != w)."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    a = (np.abs(m) > zero_tol).astype(np.int8)
    np.fill_diagonal(a, 0)
    return Graph(adjacency=a)


def subgraph_of(g1: Graph, g2: Graph) -> bool:
    """True iff every edge of g1 is an edge of g2 (same node set)."""
    if g1.n != g2.n:
        raise ValueError(f"node counts differ: {g1.n} vs {g2.n}")
    return bool(np.all(g1.adjacency <= g2.adjacency))
