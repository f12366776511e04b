"""Hot trajectory loops, jitted when numba is importable.

Both protocols consume pre-drawn randomness in fixed-size chunks handed
in by the caller, so a run is a pure function of (graph, parameters,
initial state, stream) regardless of whether the jit is active.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


#: Steps of pre-drawn randomness per refill.  Part of the determinism
#: contract: changing these changes nothing (draws are consumed in step
#: order from a single per-trial stream).
BGA_CHUNK = 4096
CBGA_CHUNK_BUDGET = 1 << 22  # uniforms per refill, so chunk ~ budget / N


def cbga_chunk(n: int) -> int:
    return max(1, min(BGA_CHUNK, CBGA_CHUNK_BUDGET // max(n, 1)))


@njit(cache=True)
def _spread(x):
    mx = x[0]
    mn = x[0]
    for i in range(1, x.size):
        if x[i] > mx:
            mx = x[i]
        if x[i] < mn:
            mn = x[i]
    return mx - mn


@njit(cache=True)
def bga_chunk_plain(x, out_ptr, out_idx, q, vs, tol, check_period, step0):
    """Advance BGA by up to len(vs) steps; no per-step recording.

    Returns (steps_consumed, reached_consensus).  The consensus test
    runs every ``check_period`` steps (and the caller runs it once at
    step 0), so the stopping step can overshoot the first hitting time
    by at most check_period - 1 steps.
    """
    for i in range(vs.size):
        v = vs[i]
        xv = x[v]
        for j in range(out_ptr[v], out_ptr[v + 1]):
            u = out_idx[j]
            x[u] = (1.0 - q) * x[u] + q * xv
        if (step0 + i + 1) % check_period == 0:
            if _spread(x) < tol:
                return i + 1, True
    return vs.size, False


@njit(cache=True)
def bga_chunk_metrics(x, out_ptr, out_idx, q, vs, tol, aves, disps, betas, off, ave0):
    """Advance BGA recording (x_ave, d, beta) at every step."""
    n = x.size
    for i in range(vs.size):
        v = vs[i]
        xv = x[v]
        for j in range(out_ptr[v], out_ptr[v + 1]):
            u = out_idx[j]
            x[u] = (1.0 - q) * x[u] + q * xv
        s = 0.0
        s2 = 0.0
        mx = x[0]
        mn = x[0]
        for k in range(n):
            xv2 = x[k]
            s += xv2
            s2 += xv2 * xv2
            if xv2 > mx:
                mx = xv2
            if xv2 < mn:
                mn = xv2
        ave = s / n
        aves[off + i] = ave
        disps[off + i] = max(s2 / n - ave * ave, 0.0)
        betas[off + i] = (ave - ave0) * (ave - ave0)
        if mx - mn < tol:
            return i + 1, True
    return vs.size, False


@njit(cache=True)
def cbga_chunk_plain(x, in_ptr, in_idx, q, p, u01, tol, check_period, step0, act):
    """Advance CBGA by up to u01.shape[0] steps; no per-step recording.

    A node receives iff it is silent and exactly one of its in-neighbors
    is awake; transmitters never listen, so sources are never updated
    within the same step and the state update is safe in place.
    """
    n = x.size
    for i in range(u01.shape[0]):
        for k in range(n):
            act[k] = u01[i, k] < p
        for u in range(n):
            if act[u]:
                continue
            cnt = 0
            src = -1
            for j in range(in_ptr[u], in_ptr[u + 1]):
                v = in_idx[j]
                if act[v]:
                    cnt += 1
                    if cnt > 1:
                        break
                    src = v
            if cnt == 1:
                x[u] = (1.0 - q) * x[u] + q * x[src]
        if (step0 + i + 1) % check_period == 0:
            if _spread(x) < tol:
                return i + 1, True
    return u01.shape[0], False


@njit(cache=True)
def cbga_chunk_metrics(x, in_ptr, in_idx, q, p, u01, tol, aves, disps, betas, off, ave0, act):
    n = x.size
    for i in range(u01.shape[0]):
        for k in range(n):
            act[k] = u01[i, k] < p
        for u in range(n):
            if act[u]:
                continue
            cnt = 0
            src = -1
            for j in range(in_ptr[u], in_ptr[u + 1]):
                v = in_idx[j]
                if act[v]:
                    cnt += 1
                    if cnt > 1:
                        break
                    src = v
            if cnt == 1:
                x[u] = (1.0 - q) * x[u] + q * x[src]
        s = 0.0
        s2 = 0.0
        mx = x[0]
        mn = x[0]
        for k in range(n):
            xv = x[k]
            s += xv
            s2 += xv * xv
            if xv > mx:
                mx = xv
            if xv < mn:
                mn = xv
        ave = s / n
        aves[off + i] = ave
        disps[off + i] = max(s2 / n - ave * ave, 0.0)
        betas[off + i] = (ave - ave0) * (ave - ave0)
        if mx - mn < tol:
            return i + 1, True
    return u01.shape[0], False
