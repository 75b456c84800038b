"""Labeled multigraphs and the marked-Poisson edge-arrival stream.

The multigraph stores parallel edges as separate records, each carrying its
own real-valued label (the arrival time).  Self-loops are rejected and labels
must be pairwise distinct within a graph; both are required for the
forbidden-degree transform to be well defined.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream

UNBOUNDED = float("inf")  # sentinel forbidden degree: arrivals are never capped


class LabeledMultigraph:
    """Multigraph on dense vertex ids 0..n-1 with labelled edge records.

    Edge records are append-only; removal flips an `alive` flag so record
    identities stay stable (the sandwich and replay oracles compare graphs
    record-wise).
    """

    __slots__ = ("n", "eu", "ev", "labels", "alive", "adj", "deg", "loops")

    def __init__(self, n: int):
        if n < 0:
            raise ValueError("vertex count must be >= 0")
        self.n = n
        self.eu: list[int] = []
        self.ev: list[int] = []
        self.labels: list[float] = []
        self.alive = bytearray()
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.deg = [0] * n
        # configuration-model pairings may produce loops; they are held out
        # of the record arrays (self-loops are outside the edge domain)
        self.loops: list[int] = []

    def add_edge(self, u: int, v: int, label: float) -> int:
        if u == v:
            raise ValueError(f"self-loop at vertex {u} is out of domain")
        eid = len(self.eu)
        self.eu.append(u)
        self.ev.append(v)
        self.labels.append(label)
        self.alive.append(1)
        self.adj[u].append(eid)
        self.adj[v].append(eid)
        self.deg[u] += 1
        self.deg[v] += 1
        return eid

    def kill_edge(self, eid: int) -> None:
        if self.alive[eid]:
            self.alive[eid] = 0
            self.deg[self.eu[eid]] -= 1
            self.deg[self.ev[eid]] -= 1

    def n_alive(self) -> int:
        return sum(self.alive)

    def alive_ids(self) -> set[int]:
        return {i for i, a in enumerate(self.alive) if a}

    def incident_labels(self, v: int) -> list[float]:
        return [self.labels[e] for e in self.adj[v] if self.alive[e]]

    def copy(self) -> "LabeledMultigraph":
        g = LabeledMultigraph(self.n)
        g.eu = list(self.eu)
        g.ev = list(self.ev)
        g.labels = list(self.labels)
        g.alive = bytearray(self.alive)
        g.adj = [list(a) for a in self.adj]
        g.deg = list(self.deg)
        g.loops = list(self.loops)
        return g

    def validate(self) -> None:
        """Check structural invariants; used by tests and debug runs."""
        labs = [self.labels[i] for i, a in enumerate(self.alive) if a]
        if len(set(labs)) != len(labs):
            raise ValueError("edge labels are not pairwise distinct")
        for e in range(len(self.eu)):
            if self.eu[e] == self.ev[e]:
                raise ValueError("self-loop present")
        deg = [0] * self.n
        for e in range(len(self.eu)):
            if self.alive[e]:
                deg[self.eu[e]] += 1
                deg[self.ev[e]] += 1
        if deg != self.deg:
            raise ValueError("degree cache inconsistent with records")


@dataclass
class ComponentSummary:
    """Connected components of a graph: sizes and path/cycle classification."""

    n: int
    sizes: list[int]
    classes: list[str]  # per component: "path", "cycle" or "other"
    c_max: int

    @property
    def n_components(self) -> int:
        return len(self.sizes)


def components(g: LabeledMultigraph) -> ComponentSummary:
    """Connected components by breadth-first traversal over alive edges.

    For max-degree<=2 graphs every component is a path (including isolated
    vertices) or a cycle (a pair joined by two parallel edges counts as a
    cycle); anything with a degree-3 vertex is tagged "other".
    """
    seen = bytearray(g.n)
    sizes: list[int] = []
    classes: list[str] = []
    adj, alive, eu, ev, deg = g.adj, g.alive, g.eu, g.ev, g.deg
    for start in range(g.n):
        if seen[start]:
            continue
        seen[start] = 1
        queue = deque([start])
        n_vert = 0
        n_edge2 = 0  # alive edge endpoints seen (2x edge count)
        max_deg = 0
        while queue:
            v = queue.popleft()
            n_vert += 1
            d = deg[v]
            if d > max_deg:
                max_deg = d
            n_edge2 += d
            for e in adj[v]:
                if alive[e]:
                    w = ev[e] if eu[e] == v else eu[e]
                    if not seen[w]:
                        seen[w] = 1
                        queue.append(w)
        n_edge = n_edge2 // 2
        if max_deg <= 2 and n_edge == n_vert - 1:
            cls = "path"
        elif max_deg == 2 and n_edge == n_vert:
            cls = "cycle"
        else:
            cls = "other"
        sizes.append(n_vert)
        classes.append(cls)
    return ComponentSummary(n=g.n, sizes=sizes, classes=classes, c_max=max(sizes) if sizes else 0)


@dataclass
class EventStream:
    """Time-ordered realization of the marked Poisson arrival process."""

    n: int
    horizon: float
    times: np.ndarray  # strictly increasing, shape (K,)
    pairs: np.ndarray  # int array, shape (K, 2), unordered distinct pairs

    def __len__(self) -> int:
        return len(self.times)

    def restrict(self, s: float) -> "EventStream":
        """The stream cut at horizon s <= horizon."""
        m = int(np.searchsorted(self.times, s, side="right"))
        return EventStream(self.n, s, self.times[:m], self.pairs[:m])


def sample_event_stream(n: int, t_max: float, rng: RngStream) -> EventStream:
    """Exact realization of the arrival process on [0, t_max].

    Global arrival rate (n-1)/2 per unit time; each arrival is marked with a
    uniform pair of distinct vertices.  Equivalently: a Poisson count of
    events, i.i.d. uniform times (sorted) and i.i.d. uniform pairs.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 vertices, got {n}")
    if not t_max >= 0:
        raise ValueError(f"need t_max >= 0, got {t_max}")
    gen = rng.generator()
    k = int(gen.poisson(t_max * (n - 1) / 2.0))
    times = np.sort(gen.uniform(0.0, t_max, size=k))
    # exact ties have probability ~0 but would break the label invariant;
    # re-draw the duplicates against the remaining gap
    while k > 1:
        dup = np.nonzero(np.diff(times) == 0.0)[0]
        if dup.size == 0:
            break
        times[dup + 1] = gen.uniform(0.0, t_max, size=dup.size)
        times = np.sort(times)
    u = gen.integers(0, n, size=k)
    v = gen.integers(0, n - 1, size=k)
    v = np.where(v >= u, v + 1, v)  # uniform over the n-1 vertices != u
    return EventStream(n=n, horizon=float(t_max), times=times, pairs=np.column_stack([u, v]))


def phi_cascade(n: int, eu, ev, labels, k, include=None) -> bytearray:
    """Forbidden-degree cascade: add edges in label order, flush at degree k.

    Returns the alive mask over edge records (records excluded by `include`
    stay dead).  When both endpoints of an arrival saturate simultaneously
    the union of their incidence lists is removed in one atomic step.
    k = UNBOUNDED disables removal.
    """
    m = len(eu)
    alive = bytearray(m)
    ids = range(m) if include is None else [i for i in range(m) if include[i]]
    if k == UNBOUNDED:
        for i in ids:
            alive[i] = 1
        return alive
    order = sorted(ids, key=labels.__getitem__)
    deg = [0] * n
    adj: list[list[int]] = [[] for _ in range(n)]
    for eid in order:
        u = eu[eid]
        v = ev[eid]
        alive[eid] = 1
        adj[u].append(eid)
        adj[v].append(eid)
        deg[u] += 1
        deg[v] += 1
        if deg[u] == k or deg[v] == k:
            saturated = [w for w in (u, v) if deg[w] == k]
            for w in saturated:
                for f in adj[w]:
                    if alive[f]:
                        alive[f] = 0
                        deg[eu[f]] -= 1
                        deg[ev[f]] -= 1
                adj[w].clear()
    return alive
