"""Exact simulation of the forbidden-degree multigraph process.

A vertex whose degree reaches the forbidden value k loses every incident
edge at that instant (both endpoints flush when they saturate together) and
ends at degree 0.  k = UNBOUNDED disables removal and yields the plain
multigraph arrival process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import (
    UNBOUNDED,
    ComponentSummary,
    EventStream,
    LabeledMultigraph,
    components,
    phi_cascade,
    sample_event_stream,
)
from .rng import RngStream


def _check_k(k) -> None:
    if k == UNBOUNDED:
        return
    if not (isinstance(k, (int, np.integer)) and k >= 2):
        raise ValueError(f"forbidden degree must be an integer >= 2 or UNBOUNDED, got {k!r}")


@dataclass
class ProcessState:
    """State of one run: current graph, clock and saturation history."""

    graph: LabeledMultigraph
    clock: float
    forbidden_degree: object  # int or UNBOUNDED
    removal_log: list[tuple[float, int]] = field(default_factory=list)


def _apply_event(g: LabeledMultigraph, u: int, v: int, label: float, k, log, checks: bool) -> None:
    g.add_edge(u, v, label)
    if k != UNBOUNDED and (g.deg[u] == k or g.deg[v] == k):
        saturated = [w for w in (u, v) if g.deg[w] == k]
        for w in saturated:
            log.append((label, w))
            for eid in g.adj[w]:
                if g.alive[eid]:
                    g.kill_edge(eid)
            g.adj[w].clear()
    if checks and k != UNBOUNDED:
        assert max(g.deg) <= k - 1, "degree cap violated"


def run_stream(stream: EventStream, k, observe_at=(), checks: bool = False):
    """Replay an event stream under forbidden degree k.

    Returns (state, snapshots): snapshots are (time, ComponentSummary)
    taken right after all events with time <= observation time (the process
    is right-continuous piecewise constant).
    """
    _check_k(k)
    g = LabeledMultigraph(stream.n)
    log: list[tuple[float, int]] = []
    obs = sorted(observe_at)
    snapshots: list[tuple[float, ComponentSummary]] = []
    times = stream.times
    pairs = stream.pairs
    oi = 0
    for i in range(len(times)):
        t_i = times[i]
        while oi < len(obs) and obs[oi] < t_i:
            snapshots.append((obs[oi], components(g)))
            oi += 1
        _apply_event(g, int(pairs[i, 0]), int(pairs[i, 1]), float(t_i), k, log, checks)
    while oi < len(obs):
        snapshots.append((obs[oi], components(g)))
        oi += 1
    state = ProcessState(graph=g, clock=stream.horizon, forbidden_degree=k, removal_log=log)
    return state, snapshots


def simulate(n: int, k, t: float, rng: RngStream, observe_at=(), checks: bool = False):
    """Simulate the continuous-time process on [0, t].

    Returns the component summaries at the requested observation times (the
    horizon t is appended if no times are given).
    """
    _check_k(k)
    stream = sample_event_stream(n, t, rng)
    obs = list(observe_at) or [t]
    if any(s < 0 or s > t for s in obs):
        raise ValueError("observation times must lie in [0, t]")
    _, snapshots = run_stream(stream, k, observe_at=obs, checks=checks)
    return snapshots


def simulate_discrete(n: int, k, steps: int, rng: RngStream, checks: bool = False) -> ProcessState:
    """The discrete-time jump chain: one uniform pair per step.

    Distributionally equal to the continuous process stopped at its
    steps-th arrival (arrival times are independent of the jump chain).
    Edge labels are the step indices.
    """
    _check_k(k)
    if n < 2:
        raise ValueError(f"need n >= 2 vertices, got {n}")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    gen = rng.generator()
    u = gen.integers(0, n, size=steps)
    v = gen.integers(0, n - 1, size=steps)
    v = np.where(v >= u, v + 1, v)
    g = LabeledMultigraph(n)
    log: list[tuple[float, int]] = []
    for i in range(steps):
        _apply_event(g, int(u[i]), int(v[i]), float(i), k, log, checks)
    return ProcessState(graph=g, clock=float(steps), forbidden_degree=k, removal_log=log)


def simulate_discrete_z(n: int, steps: int, rng: RngStream, checkpoint_every: int):
    """k=3 jump chain tracking the path/cycle statistic Z at checkpoints.

    Returns (checkpoint steps, Z values).  Components are recomputed by BFS
    at each checkpoint; between checkpoints Z moves by O(checkpoint/n) per
    step in expectation, so the sampled trajectory bounds the whole one up
    to that slack.
    """
    gen = rng.generator()
    u = gen.integers(0, n, size=steps)
    v = gen.integers(0, n - 1, size=steps)
    v = np.where(v >= u, v + 1, v)
    g = LabeledMultigraph(n)
    log: list[tuple[float, int]] = []
    ticks: list[int] = []
    zs: list[float] = []
    for i in range(steps):
        _apply_event(g, int(u[i]), int(v[i]), float(i), 3, log, False)
        if (i + 1) % checkpoint_every == 0:
            ticks.append(i + 1)
            zs.append(z_statistic(components(g)))
    return ticks, zs


def phi_transform(g: LabeledMultigraph, k) -> LabeledMultigraph:
    """Deterministic forbidden-degree transform of a finite labelled graph.

    Processes the edge records in increasing label order with the degree-k
    removal cascade; the result is record-wise a subgraph of g.  Raises on
    duplicate labels (the order would be ambiguous).
    """
    _check_k(k)
    live = [i for i, a in enumerate(g.alive) if a]
    labs = [g.labels[i] for i in live]
    if len(set(labs)) != len(labs):
        raise ValueError("edge labels must be pairwise distinct")
    alive = phi_cascade(g.n, g.eu, g.ev, g.labels, k, include=g.alive)
    out = g.copy()
    for eid in range(len(out.eu)):
        if out.alive[eid] and not alive[eid]:
            out.kill_edge(eid)
    return out


def accumulate(stream: EventStream) -> LabeledMultigraph:
    """The uncapped multigraph holding every arrival of the stream."""
    g = LabeledMultigraph(stream.n)
    for i in range(len(stream.times)):
        g.add_edge(int(stream.pairs[i, 0]), int(stream.pairs[i, 1]), float(stream.times[i]))
    return g


def coupled_sandwich(n: int, k, t: float, rng: RngStream):
    """One stream, three graphs: (lower bound, capped process, uncapped).

    Edge records share ids across the triple, so the record-wise inclusions
    lower <= capped <= uncapped can be checked directly.
    """
    from .analytic import t_k_transform  # deferred: analytic imports this module's peers

    stream = sample_event_stream(n, t, rng)
    g_inf = accumulate(stream)
    g_k = phi_transform(g_inf, k)
    g_lower = t_k_transform(g_inf, k)
    return g_lower, g_k, g_inf


def z_statistic(summary: ComponentSummary) -> float:
    """Z = sum of squared sizes over acyclic components + twice over cycles.

    Defined for forbidden degree 3, where every component is a path or a
    cycle; Z >= c_max^2 by construction.
    """
    z = 0.0
    for size, cls in zip(summary.sizes, summary.classes):
        if cls == "path":
            z += size * size
        elif cls == "cycle":
            z += 2.0 * size * size
        else:
            raise ValueError("z_statistic needs a pure path/cycle summary (k=3)")
    return z
