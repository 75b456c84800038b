"""Closed-form analysis of the chronology-free lower-bound graph.

The lower bound erases every edge of the uncapped multigraph that touches a
vertex of degree >= k.  Its limiting degree law, the survival probability of
a neighbour, the Molloy-Reed statistic and the supercriticality threshold
all have closed forms; this module evaluates them and samples the matching
configuration model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import LabeledMultigraph
from .rng import RngStream


class RetryExhausted(RuntimeError):
    """Rejection sampler ran out of attempts."""


def _pois_pmf(i: int, t: float) -> float:
    if t == 0.0:
        return 1.0 if i == 0 else 0.0
    # lgamma keeps this finite for t up to ~700
    return math.exp(-t + i * math.log(t) - math.lgamma(i + 1))


def compute_pi(t: float, k: int) -> float:
    """Probability that a Poisson(t) count is at most k-2.

    This is the asymptotic chance that a neighbour survives the degree cap;
    evaluated by compensated summation of the partial Poisson sum.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if k < 2:
        raise ValueError("k must be >= 2")
    return math.fsum(_pois_pmf(i, t) for i in range(k - 1))


@dataclass
class DegreeProfile:
    """Limiting degree law of the lower-bound graph at (t, k)."""

    t: float
    k: int
    pi: float
    p: np.ndarray  # p[i] for 0 <= i <= k-1
    q_t: float  # sum_i i(i-2) p[i]

    def supercritical(self) -> bool:
        return self.q_t > 0


def compute_degree_profile(t: float, k: int) -> DegreeProfile:
    """Closed-form (p_{t,i})_{0<=i<k} and the Molloy-Reed statistic.

    The degree of a vertex is a thinning of its uncapped degree C: given
    C <= k-1 each of the C edges survives independently with probability
    pi_k(t), and C >= k forces degree 0.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if k < 2:
        raise ValueError("k must be >= 2")
    pi = compute_pi(t, k)
    pois = [_pois_pmf(c, t) for c in range(k)]
    p = np.zeros(k)
    for i in range(1, k):
        terms = [
            pois[c] * math.comb(c, i) * pi**i * (1.0 - pi) ** (c - i)
            for c in range(i, k)
        ]
        p[i] = math.fsum(terms)
    p_head = math.fsum(pois)  # P(C <= k-1)
    p[0] = (1.0 - p_head) + math.fsum(pois[c] * (1.0 - pi) ** c for c in range(k))
    q_t = math.fsum(i * (i - 2) * p[i] for i in range(k))
    return DegreeProfile(t=t, k=k, pi=pi, p=p, q_t=q_t)


def threshold_lhs(t: float, k: int) -> float:
    """Left side of the giant-component condition; supercritical iff > 1."""
    if k < 3:
        raise ValueError("threshold is defined for k >= 3")
    if t < 0:
        raise ValueError("t must be >= 0")
    return t * math.fsum(_pois_pmf(i, t) for i in range(k - 2))


def supercritical_interval(k: int, t_max: float = 50.0, tol: float = 1e-9):
    """Maximal interval of [0, t_max] where threshold_lhs > 1, or None.

    The condition function is unimodal on the relevant range; endpoints are
    located by bisection to `tol`.
    """
    if k < 3:
        raise ValueError("k must be >= 3")
    grid = np.linspace(0.0, t_max, 4001)
    vals = np.array([threshold_lhs(float(t), k) for t in grid])
    above = np.nonzero(vals > 1.0)[0]
    if above.size == 0:
        return None

    def bisect(lo: float, hi: float, want_rising: bool) -> float:
        # invariant: f(a) <= 1 < f(b) with (a,b)=(lo,hi) if rising else swapped
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if hi - lo < tol:
                break
            if (threshold_lhs(mid, k) > 1.0) == want_rising:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    i0, i1 = int(above[0]), int(above[-1])
    t_lo = 0.0 if i0 == 0 else bisect(float(grid[i0 - 1]), float(grid[i0]), True)
    t_hi = float(t_max) if i1 == len(grid) - 1 else bisect(float(grid[i1]), float(grid[i1 + 1]), False)
    return (t_lo, t_hi)


def t_k_transform(g: LabeledMultigraph, k) -> LabeledMultigraph:
    """Erase every edge incident to a vertex of degree >= k.

    Chronology-free: depends only on the multiplicities, not the labels.
    """
    from .graphs import UNBOUNDED

    out = g.copy()
    if k == UNBOUNDED:
        return out
    full_deg = list(g.deg)
    for eid in range(len(out.eu)):
        if out.alive[eid] and (full_deg[out.eu[eid]] >= k or full_deg[out.ev[eid]] >= k):
            out.kill_edge(eid)
    return out


@dataclass
class DegreeSequence:
    """Per-vertex target degrees for the configuration model."""

    c: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=int)
        if (self.c < 0).any():
            raise ValueError("degrees must be >= 0")

    @property
    def n(self) -> int:
        return len(self.c)

    def histogram(self) -> np.ndarray:
        return np.bincount(self.c)

    def feasible(self) -> bool:
        return int(self.c.sum()) % 2 == 0


def sample_configuration_model(seq: DegreeSequence, rng: RngStream | np.random.Generator) -> LabeledMultigraph:
    """Uniform pairing of the half-edge multiset (loops and multi-edges kept).

    Loops are stored as (v, v) pairs on a side list since the multigraph
    type rejects them; see `sample_loopless_configuration` for the
    conditioned version used as the lower-bound law.
    """
    if not seq.feasible():
        raise ValueError("sum of degrees must be even")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    half = np.repeat(np.arange(seq.n), seq.c)
    gen.shuffle(half)
    g = LabeledMultigraph(seq.n)
    for j in range(0, len(half), 2):
        u, v = int(half[j]), int(half[j + 1])
        if u == v:
            g.loops.append(u)
        else:
            g.add_edge(u, v, float(j))
    return g


def sample_loopless_configuration(
    seq: DegreeSequence, rng: RngStream | np.random.Generator, max_attempts: int = 10**6
) -> LabeledMultigraph:
    """Configuration model conditioned on being loopless, by rejection.

    The acceptance probability is bounded below for bounded-degree
    sequences, so exhausting `max_attempts` signals a pathological input.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    for _ in range(max_attempts):
        g = sample_configuration_model(seq, gen)
        if not g.loops:
            return g
    raise RetryExhausted(f"no loopless pairing in {max_attempts} attempts")


def degree_table(t_grid, k: int) -> list[dict]:
    """Grid of analytic quantities for the CLI table generator."""
    rows = []
    for t in t_grid:
        prof = compute_degree_profile(float(t), k)
        row = {
            "t": float(t),
            "k": k,
            "pi": prof.pi,
            "q_t": prof.q_t,
            "threshold_lhs": threshold_lhs(float(t), k) if k >= 3 else float("nan"),
        }
        for i in range(k):
            row[f"p{i}"] = float(prof.p[i])
        rows.append(row)
    return rows
