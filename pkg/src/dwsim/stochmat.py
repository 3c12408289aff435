"""Row-stochastic matrix tools for pairwise averaging dynamics.

An isolated, fully connected group of agents evolves by linear mixing:
each interaction replaces the two participants' rows with convex
combinations, everyone else keeps theirs.  This module builds those
per-step mixing matrices, multiplies them out, measures how fast the
largest pairwise row distance shrinks, and checks the geometric bound
satisfied by a third opinion after a boundary-distance pair averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NotErgodicError, VerificationError
from .model import UnorderedPair

__all__ = [
    "StochasticMatrix",
    "SpreadReport",
    "pair_update_matrix",
    "window_product",
    "spread",
    "is_ergodic",
    "stationary_distribution",
    "verify_spread_contraction",
    "check_mix_distance_bound",
    "verify_hub_window",
]

_ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """A square matrix with nonnegative entries and unit row sums."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        e = np.array(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] < 1:
            raise InvalidParameterError(f"entries must be square, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise InvalidParameterError("entries must be finite")
        if np.any(e < 0.0):
            raise InvalidParameterError("entries must be nonnegative")
        sums = e.sum(axis=1)
        worst = float(np.max(np.abs(sums - 1.0)))
        if worst > _ROW_SUM_TOL:
            raise InvalidParameterError(f"row sums deviate from 1 by {worst:.3e}")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "StochasticMatrix") -> "StochasticMatrix":
        if self.m != other.m:
            raise InvalidParameterError("size mismatch")
        return StochasticMatrix(self.entries @ other.entries)

    def apply(self, rows: np.ndarray) -> np.ndarray:
        return self.entries @ np.asarray(rows, dtype=np.float64)


@dataclass(frozen=True)
class SpreadReport:
    """Spread after k applications, and its ratio to the input spread.

    ``ratio`` is None when the input rows were already identical.
    """

    spread: float
    ratio: float | None


def pair_update_matrix(
    size: int, pair: UnorderedPair, mu_a: float, mu_b: float
) -> StochasticMatrix:
    """Mixing matrix for one interaction inside a group of ``size`` rows.

    Rows are 1-based to match agent indices.  A pair with either endpoint
    outside the group leaves every row alone: interactions that are not
    fully inside an isolated group cannot move its members.
    """
    if size < 1:
        raise InvalidParameterError(f"size must be positive, got {size}")
    if not (0.0 < mu_a < 1.0 and 0.0 < mu_b < 1.0):
        raise InvalidParameterError(f"weights must lie in (0, 1), got ({mu_a}, {mu_b})")
    e = np.eye(size, dtype=np.float64)
    if pair.j <= size:
        a, b = pair.i - 1, pair.j - 1
        e[a, a] = 1.0 - mu_a
        e[a, b] = mu_a
        e[b, b] = 1.0 - mu_b
        e[b, a] = mu_b
    return StochasticMatrix(e)


def window_product(size: int, pairs, weights) -> StochasticMatrix:
    """Product of per-step mixing matrices, latest step leftmost.

    ``weights`` holds the group's per-agent mixing weights (1-based agents
    1..size).  Applying the result to the group's stacked opinions gives
    the state after the whole window in one multiplication.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (size,):
        raise InvalidParameterError(f"need one weight per agent, got shape {w.shape}")
    acc = np.eye(size, dtype=np.float64)
    for p in pairs:
        step = pair_update_matrix(size, p, float(w[p.i - 1]), float(w[p.j - 1]))
        acc = step.entries @ acc
    return StochasticMatrix(acc)


def spread(rows) -> float:
    """Largest Euclidean distance between any two rows."""
    r = np.asarray(rows, dtype=np.float64)
    if r.ndim == 1:
        r = r[:, None]
    if r.ndim != 2 or r.shape[0] < 1:
        raise InvalidParameterError(f"need a stack of rows, got shape {r.shape}")
    if r.shape[0] == 1:
        return 0.0
    diff = r[:, None, :] - r[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2)).max())


def _positive_graph(p: StochasticMatrix) -> np.ndarray:
    return p.entries > 0.0


def _reaches_all(g: np.ndarray, start: int) -> bool:
    m = g.shape[0]
    seen = np.zeros(m, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        v = stack.pop()
        for w in np.nonzero(g[v])[0]:
            if not seen[w]:
                seen[w] = True
                stack.append(int(w))
    return bool(seen.all())


def is_ergodic(p: StochasticMatrix) -> bool:
    """Strong connectivity of the positive-entry graph plus aperiodicity.

    Any positive diagonal entry settles aperiodicity immediately; pure
    rotations and the like fall through to a cycle-length gcd over a
    breadth-first levelling.
    """
    g = _positive_graph(p)
    if not _reaches_all(g, 0) or not _reaches_all(g.T, 0):
        return False
    if np.any(np.diag(p.entries) > 0.0):
        return True
    m = p.m
    level = np.full(m, -1, dtype=np.int64)
    level[0] = 0
    queue = [0]
    while queue:
        v = queue.pop(0)
        for w in np.nonzero(g[v])[0]:
            if level[w] < 0:
                level[w] = level[v] + 1
                queue.append(int(w))
    gcd = 0
    for v in range(m):
        for w in np.nonzero(g[v])[0]:
            gcd = math.gcd(gcd, int(level[v] + 1 - level[w]))
    return gcd == 1


def stationary_distribution(p: StochasticMatrix) -> np.ndarray:
    """Left fixed probability vector of an ergodic matrix.

    Power iteration from the uniform vector, stopping once successive
    iterates agree to 1e-13 in max norm (or after 1e6 rounds); the result
    is renormalized and must satisfy the balance equations to 1e-10.
    """
    if not is_ergodic(p):
        raise NotErgodicError(
            "matrix is reducible or periodic; no unique stationary distribution"
        )
    m = p.m
    pi = np.full(m, 1.0 / m, dtype=np.float64)
    for _ in range(1_000_000):
        nxt = pi @ p.entries
        if float(np.max(np.abs(nxt - pi))) < 1e-13:
            pi = nxt
            break
        pi = nxt
    pi = pi / pi.sum()
    residual = float(np.max(np.abs(pi @ p.entries - pi)))
    if residual >= 1e-10:
        raise VerificationError(
            f"power iteration left a balance residual of {residual:.3e}"
        )
    return pi


def _fit_envelope(spreads: list[float], k0: int, floor: float) -> float:
    # Tightest geometric rate anchored at index k0; spreads at the rounding
    # floor impose no constraint, like exact zeros.
    base = spreads[k0]
    if base <= floor:
        return 0.5
    alpha = 0.0
    for k in range(k0 + 1, len(spreads)):
        if spreads[k] > floor:
            alpha = max(alpha, (spreads[k] / base) ** (1.0 / (k - k0)))
    return alpha if alpha > 0.0 else 0.5


def verify_spread_contraction(
    p: StochasticMatrix, z, k_max: int
) -> tuple[SpreadReport, ...]:
    """Spread of repeated applications, checked for geometric decay.

    Returns one report per application count 1..k_max.  Raises unless the
    spreads are non-increasing and, from the halfway point on, sit under a
    fitted geometric envelope with rate below one.  Spreads that have
    already collapsed to the rounding floor of the consensus value count
    as zero; a fast-mixing matrix must not fail for finishing early.
    """
    if k_max < 2:
        raise InvalidParameterError(f"k_max must be at least 2, got {k_max}")
    if not is_ergodic(p):
        raise NotErgodicError("spread contraction needs an ergodic matrix")
    rows = np.asarray(z, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] != p.m:
        raise InvalidParameterError(
            f"row count {rows.shape[0]} does not match matrix size {p.m}"
        )
    s0 = spread(rows)
    spreads = [s0]
    cur = rows
    for _ in range(k_max):
        cur = p.entries @ cur
        spreads.append(spread(cur))
    for k in range(1, k_max + 1):
        if spreads[k] > spreads[k - 1] + 1e-12:
            raise VerificationError(
                f"spread rose from {spreads[k - 1]:.6e} to {spreads[k]:.6e} "
                f"at application {k}"
            )
    k0 = k_max // 2
    floor = 1e-13 * max(1.0, float(np.abs(rows).max()))
    alpha = _fit_envelope(spreads, k0, floor)
    if not alpha < 1.0:
        raise VerificationError(
            f"no contracting envelope: fitted rate {alpha} from anchor {k0}"
        )
    for k in range(k0, k_max + 1):
        cap = spreads[k0] * alpha ** (k - k0) * (1.0 + 1e-6)
        if spreads[k] > max(cap, floor):
            raise VerificationError(
                f"spread {spreads[k]:.6e} at application {k} escapes the "
                f"envelope {cap:.6e}"
            )
    return tuple(
        SpreadReport(spread=spreads[k], ratio=(spreads[k] / s0 if s0 > 0.0 else None))
        for k in range(1, k_max + 1)
    )


def check_mix_distance_bound(x, y, z, mu: float, r: float) -> tuple[float, float, bool]:
    """Distance from a third opinion to a pair's convex mix.

    The pair (x, y) sits exactly at distance r, z lies within r of both
    endpoints, and the mix is (1-mu) x + mu y.  Returns the achieved
    distance, the ceiling r sqrt(1 - mu + mu^2), and whether the bound
    holds with a 1e-12 slack.
    """
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    zv = np.asarray(z, dtype=np.float64)
    if not (xv.shape == yv.shape == zv.shape) or xv.ndim != 1:
        raise InvalidParameterError("x, y, z must be vectors of one shared dimension")
    if not (0.0 < mu < 1.0):
        raise InvalidParameterError(f"mu must lie in (0, 1), got {mu}")
    if not (r > 0.0 and math.isfinite(r)):
        raise InvalidParameterError(f"r must be positive and finite, got {r}")
    d_xy = float(np.linalg.norm(xv - yv))
    if abs(d_xy - r) > 1e-12:
        raise InvalidParameterError(
            f"pair distance {d_xy} is not at the boundary {r}"
        )
    if float(np.linalg.norm(xv - zv)) > r + 1e-12:
        raise InvalidParameterError("z is out of range of x")
    if float(np.linalg.norm(yv - zv)) > r + 1e-12:
        raise InvalidParameterError("z is out of range of y")
    mix = (1.0 - mu) * xv + mu * yv
    lhs = float(np.linalg.norm(zv - mix))
    rhs = r * math.sqrt(1.0 - mu + mu * mu)
    return lhs, rhs, lhs <= rhs + 1e-12


def verify_hub_window(size: int, hub: int, pairs, weights) -> StochasticMatrix:
    """Entrywise floors for a window in which one agent meets every other.

    Every step must pair the hub with some other member, and each member
    must appear at least once.  The product then carries the hub's initial
    opinion into everyone: off-hub entries of the hub column are at least
    mu_min ((1 - mu_max)^2 / 2)^(T-1).  The hub's own diagonal entry only
    admits the weaker floor (1 - mu_hub)^T; the stronger form fails for
    single-step windows when every weight is large, so it is not asserted
    there.
    """
    if not 1 <= hub <= size:
        raise InvalidParameterError(f"hub {hub} outside group of size {size}")
    pairs = list(pairs)
    if not pairs:
        raise InvalidParameterError("window must contain at least one step")
    seen = set()
    for p in pairs:
        if p.j > size:
            raise InvalidParameterError(f"pair {p.as_tuple()} leaves the group")
        if hub not in (p.i, p.j):
            raise InvalidParameterError(
                f"pair {p.as_tuple()} does not involve the hub"
            )
        seen.add(p.i + p.j - hub)
    missing = set(range(1, size + 1)) - {hub} - seen
    if missing:
        raise InvalidParameterError(f"window never pairs the hub with {sorted(missing)}")

    w = np.asarray(weights, dtype=np.float64)
    product = window_product(size, pairs, w)
    t = len(pairs)
    mu_min = float(w.min())
    mu_max = float(w.max())
    mu_hub = float(w[hub - 1])
    delta = ((1.0 - mu_max) ** 2 / 2.0) ** (t - 1)

    col = product.entries[:, hub - 1]
    for i in range(size):
        if i == hub - 1:
            floor = (1.0 - mu_hub) ** t
        else:
            floor = delta * mu_min
        if col[i] < floor - 1e-12:
            raise VerificationError(
                f"hub column entry {col[i]:.6e} at row {i + 1} undercuts "
                f"its floor {floor:.6e}"
            )
    return product
