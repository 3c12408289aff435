"""Compiled inner loop for long random-pairing runs.

Everything here mirrors the pure-Python step in model.py operation for
operation: same subtraction order, same ascending-coordinate accumulation,
same scalar sqrt, same comparison direction. Replaying a kernel trace
through the Python step must reproduce every snapshot bit for bit, and the
test suite holds both sides to that. Do not reorder arithmetic, do not
introduce fused or vectorized alternatives, and do not enable fastmath.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_U32MASK = np.uint64(0xFFFFFFFF)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _draw(seed, cursor):
    return _mix64(seed + (cursor + np.uint64(1)) * _GAMMA)


@njit(cache=True, inline="always")
def _randbelow(u, m):
    # floor(u*m / 2**64) via 32-bit split; exact for m < 2**32
    a = u >> np.uint64(32)
    b = u & _U32MASK
    return (a * m + ((b * m) >> np.uint64(32))) >> np.uint64(32)


@njit(cache=True, inline="always")
def _pair_from_index(k, n):
    m = n * (n - 1) // 2
    kp = m - 1 - k
    v = 8 * kp + 1
    s = np.int64(math.sqrt(np.float64(v)))
    while s * s > v:
        s -= 1
    while (s + 1) * (s + 1) <= v:
        s += 1
    b = (s - 1) // 2 + 1
    i = n - b
    j = i + 1 + (b * (b + 1) // 2 - 1 - kp)
    return i, j


@njit(cache=True)
def _refresh_agent(x, r, adj, a, n, d):
    """Recompute both edge directions incident to agent ``a`` in place.

    Returns True if any entry flipped.
    """
    changed = False
    for k in range(n):
        if k == a:
            continue
        acc = 0.0
        for kk in range(d):
            diff = x[a, kk] - x[k, kk]
            acc += diff * diff
        dd = math.sqrt(acc)
        e_out = 1 if dd <= r[k] else 0
        e_in = 1 if dd <= r[a] else 0
        if adj[a, k] != e_out:
            adj[a, k] = e_out
            changed = True
        if adj[k, a] != e_in:
            adj[k, a] = e_in
            changed = True
    return changed


@njit(cache=True)
def _max_component_diameter(x, adj, n, d, comp, queue):
    """Largest diameter over components of the symmetrized edge relation."""
    for v in range(n):
        comp[v] = -1
    maxdiam = 0.0
    for s in range(n):
        if comp[s] >= 0:
            continue
        head = 0
        tail = 0
        queue[tail] = s
        tail += 1
        comp[s] = s
        while head < tail:
            v = queue[head]
            head += 1
            for w in range(n):
                if w != v and comp[w] < 0 and (adj[v, w] == 1 or adj[w, v] == 1):
                    comp[w] = s
                    queue[tail] = w
                    tail += 1
        for p in range(tail):
            vp = queue[p]
            for q in range(p + 1, tail):
                wq = queue[q]
                acc = 0.0
                for kk in range(d):
                    diff = x[vp, kk] - x[wq, kk]
                    acc += diff * diff
                dd = math.sqrt(acc)
                if dd > maxdiam:
                    maxdiam = dd
    return maxdiam


@njit(cache=True)
def simulate_kernel(
    x,
    r,
    mu,
    seed,
    cursor0,
    horizon,
    use_stop,
    freeze_window,
    diam_tol,
    check_every,
    snapshot_stride,
    pair_i,
    pair_j,
    moved_i,
    moved_j,
    event_t,
    snap_t,
    snaps,
):
    """Run up to ``horizon`` random-pair steps, mutating ``x`` in place.

    One raw generator draw per step, so the cursor after ``steps`` steps is
    ``cursor0 + steps``. Edge bookkeeping is incremental: after a step only
    rows and columns of agents whose gate opened are recomputed, and a step
    is logged in ``event_t`` when any directed edge flipped. The stop test
    (no edge flip within the freeze window, every component of the
    symmetrized edge relation tighter than ``diam_tol``) runs every
    ``check_every`` steps.

    Returns (steps taken, events logged, snapshots written, stop fired).
    """
    n = x.shape[0]
    d = x.shape[1]
    m_pairs = np.uint64(n * (n - 1) // 2)
    g = np.empty(d, np.float64)
    comp = np.empty(n, np.int32)
    queue = np.empty(n, np.int32)
    adj = np.zeros((n, n), np.uint8)

    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for kk in range(d):
                diff = x[i, kk] - x[j, kk]
                acc += diff * diff
            dd = math.sqrt(acc)
            adj[i, j] = 1 if dd <= r[j] else 0
            adj[j, i] = 1 if dd <= r[i] else 0

    snap_t[0] = 0
    for a in range(n):
        for kk in range(d):
            snaps[0, a, kk] = x[a, kk]
    n_snaps = 1
    n_events = 0
    last_event = np.int64(0)
    cursor = cursor0
    steps = np.int64(0)
    stopped = False

    for t in range(1, horizon + 1):
        u = _draw(seed, cursor)
        cursor += np.uint64(1)
        k = np.int64(_randbelow(u, m_pairs))
        i1, j1 = _pair_from_index(k, np.int64(n))
        a = i1 - 1
        b = j1 - 1

        acc = 0.0
        for kk in range(d):
            gk = x[b, kk] - x[a, kk]
            g[kk] = gk
            acc += gk * gk
        dd = math.sqrt(acc)
        fa = dd <= r[a]
        fb = dd <= r[b]
        if fa:
            for kk in range(d):
                x[a, kk] = x[a, kk] + mu[a] * g[kk]
        if fb:
            for kk in range(d):
                x[b, kk] = x[b, kk] - mu[b] * g[kk]

        pair_i[t - 1] = i1
        pair_j[t - 1] = j1
        moved_i[t - 1] = fa
        moved_j[t - 1] = fb
        steps = np.int64(t)

        changed = False
        if fa:
            changed = _refresh_agent(x, r, adj, a, n, d)
        if fb:
            if _refresh_agent(x, r, adj, b, n, d):
                changed = True
        if changed:
            event_t[n_events] = t
            n_events += 1
            last_event = np.int64(t)

        if t % snapshot_stride == 0:
            snap_t[n_snaps] = t
            for aa in range(n):
                for kk in range(d):
                    snaps[n_snaps, aa, kk] = x[aa, kk]
            n_snaps += 1

        if use_stop and t % check_every == 0:
            if last_event <= t - freeze_window:
                if _max_component_diameter(x, adj, n, d, comp, queue) <= diam_tol:
                    stopped = True
                    break

    if snap_t[n_snaps - 1] != steps:
        snap_t[n_snaps] = steps
        for aa in range(n):
            for kk in range(d):
                snaps[n_snaps, aa, kk] = x[aa, kk]
        n_snaps += 1

    return steps, n_events, n_snaps, stopped
