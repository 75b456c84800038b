"""The local limit: lazily grown labelled trees and their capped version.

The uncapped limit is a Galton-Watson tree whose per-node child labels form
a Poisson point process of intensity 1 on [0, t].  Node randomness is keyed
by a per-node uid hash, so the tree a seed denotes does not depend on the
order of exploration; lazy and eager growth agree exactly.

Two engines evaluate the capped version of a sampled tree:

* flush engine (production): the capped tree is a branching structure whose
  root-edge set evolves by arrivals, departures and flush-to-empty at the
  forbidden degree; the departure time of a child edge is computed in the
  detached subtree below it, recursively.  Subtrees whose total degree
  never reaches the cap resolve without recursion, which keeps the expected
  work per node bounded for the parameter ranges of interest.
* ball engine (reference): grow the ball around a node until no
  label-feasible propagation path of the ball's radius exists, then read
  edge fates off the cascade on the explored ball.  A propagation path is a
  self-avoiding spine with side edges of strictly decreasing labels; its
  absence certifies that nothing outside the ball can change the fates.

The engines are exact and are cross-validated against each other and
against the cascade on eagerly sampled trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .graphs import UNBOUNDED, LabeledMultigraph, phi_cascade
from .rng import RngStream, child_uid, node_poisson, node_uniform

_INF = float("inf")


class BudgetExceeded(RuntimeError):
    """Exploration hit the arena or recursion budget."""


class LocalTree:
    """Append-only arena of tree nodes; node 0 is the root.

    Every non-root node c carries the edge (c, parent[c]) with label
    plabel[c]; edge ids coincide with the child node id.  An optional
    parent-side leaf models the extra vertex attached above the root, and
    forced root children model a conditioned root edge set.
    """

    __slots__ = (
        "t",
        "parent",
        "plabel",
        "depth",
        "kids",
        "expanded",
        "uid",
        "parent_leaf",
        "forced_ids",
        "_pending_forced",
        "depth_cap",
        "max_nodes",
        "cap_hit",
        "cert_depth",
        "component",
        "alive_mask",
    )

    # reserved uid/draw offset for the root's free children, so runs sharing
    # a seed but differing in forced root edges share the free part of the
    # tree (common random numbers for ratio estimators)
    _ROOT_EXTRA = 64

    def __init__(self, t, uid, forced=(), parent_label=None, depth_cap=10**9, max_nodes=10**6):
        if t < 0:
            raise ValueError("t must be >= 0")
        self.t = float(t)
        self.parent = [-1]
        self.plabel = [0.0]
        self.depth = [0]
        self.kids: list[list[int]] = [[]]
        self.expanded = bytearray([0])
        self.uid = [uid]
        self.depth_cap = depth_cap
        self.max_nodes = max_nodes
        self.cap_hit = False
        self.parent_leaf = None
        self.forced_ids: list[int] = []
        self.cert_depth: dict[int, int] = {}
        self.component: list[int] | None = None
        self.alive_mask: bytearray | None = None
        if parent_label is not None:
            w = self._add_node(0, float(parent_label), 0)
            self.expanded[w] = 1  # the parent-side vertex is a leaf by construction
            self.parent_leaf = w
        self._pending_forced = tuple(float(x) for x in forced)

    # storage ----------------------------------------------------------------
    def __len__(self) -> int:
        return len(self.parent)

    def _add_node(self, par: int, label: float, uid: int) -> int:
        c = len(self.parent)
        self.parent.append(par)
        self.plabel.append(label)
        self.depth.append(self.depth[par] + 1)
        self.kids.append([])
        self.expanded.append(0)
        self.uid.append(uid)
        self.kids[par].append(c)
        return c

    # growth -------------------------------------------------------------
    def expand(self, v: int) -> bool:
        """Sample v's children; False when a cap prevents it."""
        if self.expanded[v]:
            return True
        if self.depth[v] >= self.depth_cap or len(self.parent) >= self.max_nodes:
            self.cap_hit = True
            return False
        t = self.t
        u = self.uid[v]
        m = node_poisson(u, t, offset=0)
        entries: list[tuple[float, int]]
        if v == 0:
            nf = len(self._pending_forced)
            if nf >= self._ROOT_EXTRA:
                raise ValueError("too many forced root edges")
            entries = [(lab, j) for j, lab in enumerate(self._pending_forced)]
            base = self._ROOT_EXTRA
            entries += [(t * node_uniform(u, base + 1 + j), base + j) for j in range(m)]
            counter = base + 1 + m
        else:
            entries = [(t * node_uniform(u, 1 + j), j) for j in range(m)]
            counter = 1 + m
        while True:  # prob-0 tie guard: redraw duplicates, keep the counter moving
            seen: set[float] = set()
            dup: list[int] = []
            for idx, (lab, _j) in enumerate(entries):
                if lab in seen:
                    dup.append(idx)
                else:
                    seen.add(lab)
            if not dup:
                break
            for idx in dup:
                entries[idx] = (t * node_uniform(u, counter), entries[idx][1])
                counter += 1
        entries.sort()
        nf = len(self._pending_forced) if v == 0 else 0
        for lab, j in entries:
            c = self._add_node(v, lab, child_uid(u, j))
            if v == 0 and j < nf:
                self.forced_ids.append(c)
        self.expanded[v] = 1
        return True

    def ensure_ball(self, v: int, r: int) -> bool:
        """Expand every node within distance r-1 of v; False on a cap."""
        if r <= 0:
            return True
        frontier = [v]
        dist = 0
        seen = {v}
        while frontier and dist <= r - 1:
            nxt = []
            for u in frontier:
                if not self.expand(u):
                    return False
                p = self.parent[u]
                neigh = self.kids[u] if p < 0 else self.kids[u] + [p]
                for w in neigh:
                    if w not in seen:
                        seen.add(w)
                        nxt.append(w)
            frontier = nxt
            dist += 1
        return True

    # shared helpers -------------------------------------------------------
    def _incident(self, u: int) -> list[tuple[int, float]]:
        inc = [(c, self.plabel[c]) for c in self.kids[u]]
        if u != 0:
            inc.append((u, self.plabel[u]))
        return inc

    def neighbors(self, u: int) -> list[int]:
        out = list(self.kids[u])
        if u != 0:
            out.append(self.parent[u])
        return out

    def prop_len(self, v: int, cap: int, strong: bool = False) -> int:
        """Longest propagation path from v, exact, capped at `cap`.

        Requires the ball of radius `cap` around v to be explored.  On a
        tree the spine to any vertex is unique and side-edge feasibility is
        monotone in the last side label used, so carrying the largest
        feasible side label along a DFS is exact.

        With strong=True the side/spine label constraints implied by the
        uncertainty-propagation argument are enforced as well (the next
        spine label lies strictly below the current side label, which in
        turn is at least the current spine label); these paths are the only
        ones that can actually carry information inward, and they are much
        rarer, so certification needs smaller balls.
        """
        if cap <= 0:
            return 0
        best = 0
        parent, plabel = self.parent, self.plabel
        stack = [(v, -1, _INF, 0)]
        while stack:
            u, in_e, lam, ln = stack.pop()
            if ln > best:
                best = ln
                if best >= cap:
                    return cap
            if ln >= cap:
                continue
            inc = self._incident(u)
            if ln == 0:
                for f, _flab in inc:
                    w = parent[u] if f == u else f
                    stack.append((w, f, _INF, 1))
                continue
            in_lab = plabel[in_e]
            for f, flab in inc:
                if f == in_e:
                    continue
                side = -1.0
                for e2, l2 in inc:
                    if e2 != f and l2 < lam and l2 > side:
                        if strong and (l2 < in_lab or l2 <= flab):
                            continue
                        side = l2
                if side >= 0.0:
                    w = parent[u] if f == u else f
                    stack.append((w, f, side, ln + 1))
        return best

    def certify(self, v: int, r_max: int = 40):
        """Ball radius at which every edge incident to v has a determined
        fate, or None when caps preclude it.

        Uses the label-constrained (strong) propagation paths: if no such
        path of length r-1 starts at v or at one of its neighbours, every
        incident edge is determined by a ball the explored region contains.
        """
        cached = self.cert_depth.get(v)
        if cached is not None:
            return cached
        r = 2
        while r <= r_max:
            if not self.ensure_ball(v, r):
                return None
            worst = self.prop_len(v, r - 1, strong=True)
            if worst < r - 1:
                for u in self.neighbors(v):
                    worst = max(worst, self.prop_len(u, r - 1, strong=True))
                    if worst >= r - 1:
                        break
            if worst < r - 1:
                self.cert_depth[v] = r
                return r
            r += 1
        return None

    def phi_alive(self, k) -> bytearray:
        """Cascade over the explored arena; entry c is the fate of edge
        (c, parent[c]).  Valid for any node whose certified ball is inside
        the arena (the arena only attaches new edges at sphere vertices)."""
        n = len(self.parent)
        eu = list(range(1, n))
        ev = self.parent[1:]
        labels = self.plabel[1:]
        mask = phi_cascade(n, eu, ev, labels, k)
        return bytearray(b"\x00") + mask

    def root_child_labels(self, alive: bytearray | None = None) -> list[float]:
        """Labels of the root's (surviving) child edges, parent leaf excluded."""
        out = []
        for c in self.kids[0]:
            if c == self.parent_leaf:
                continue
            if alive is None or alive[c]:
                out.append(self.plabel[c])
        return out


# ---------------------------------------------------------------------------
# plain sampling


def sample_gw_levels(t: float, depth: int, rng: RngStream, max_nodes: int = 10**7) -> LocalTree:
    """Eagerly sample the first `depth` generations of the uncapped tree."""
    tree = LocalTree(t, rng.root_uid(), depth_cap=depth, max_nodes=max_nodes)
    frontier = [0]
    for _ in range(depth):
        nxt: list[int] = []
        for v in frontier:
            if not tree.expand(v):
                return tree
            nxt.extend(tree.kids[v])
        frontier = nxt
    return tree


def generation_sizes(tree: LocalTree, depth: int) -> list[int]:
    sizes = [0] * (depth + 1)
    for v in range(len(tree)):
        if v == tree.parent_leaf:
            continue
        d = tree.depth[v]
        if d <= depth:
            sizes[d] += 1
    return sizes


def expected_propagation_count(t: float, l: int) -> float:
    """Expected number of possible propagation paths of length l from the root."""
    if t < 0 or l < 1:
        raise ValueError("need t >= 0 and l >= 1")
    return t * (t + t * t) ** (l - 1)


def find_propagation_paths(g: LabeledMultigraph, v: int, l_max: int) -> int:
    """Longest propagation path from v in g, exact; l_max means "reached cap".

    Full backtracking over (spine, side-edge) assignments: side edges must
    avoid every other spine edge, including ones chosen later, so side
    choices are kept explicitly.  Exponential in the worst case; intended
    for finite graphs at test scale (the tree engine has a fast variant).
    """
    if l_max <= 0:
        return 0
    adj, alive, eu, ev, labels = g.adj, g.alive, g.eu, g.ev, g.labels
    best = 0

    def inc(u):
        return [e for e in adj[u] if alive[e]]

    def other(e, u):
        return ev[e] if eu[e] == u else eu[e]

    stack = [(v, -1, frozenset([v]), (), frozenset(), _INF, 0)]
    while stack:
        u, in_e, verts, spine, sides, lam, ln = stack.pop()
        if ln > best:
            best = ln
            if best >= l_max:
                return l_max
        if ln >= l_max:
            continue
        edges_u = inc(u)
        if ln == 0:
            for f in edges_u:
                w = other(f, u)
                if w not in verts:
                    stack.append((w, f, verts | {w}, (f,), sides, _INF, 1))
            continue
        spine_before = frozenset(spine[:-1])  # the side at u may reuse the in-edge
        for f in edges_u:
            if f == in_e or f in sides:
                continue
            w = other(f, u)
            if w in verts:
                continue
            for s in edges_u:
                if s == f or s in spine_before:
                    continue
                ls = labels[s]
                if ls < lam:
                    stack.append((w, f, verts | {w}, spine + (f,), sides | {s}, ls, ln + 1))
    return best


# ---------------------------------------------------------------------------
# flush engine: exact evaluation through the branching structure


class _FlushState:
    """Memoized departure times plus a work budget for one tree."""

    __slots__ = ("k", "rho", "work", "budget")

    def __init__(self, k, budget: int):
        self.k = k
        self.rho: dict[int, float] = {}
        self.work = 0
        self.budget = budget


def _rho_of(tree: LocalTree, state: _FlushState, c: int) -> float:
    """First time the edge above c is removed, in the detached subtree below
    c; inf when it survives to the horizon.  Subtrees whose total degree
    stays below the cap resolve immediately."""
    cached = state.rho.get(c)
    if cached is not None:
        return cached
    state.work += 1
    if state.work > state.budget:
        raise BudgetExceeded
    if not tree.expand(c):
        raise BudgetExceeded
    if state.k == UNBOUNDED or len(tree.kids[c]) + 1 < state.k:
        state.rho[c] = _INF
        return _INF
    rho = _member_process(tree, state, c, tree.plabel[c], want="first_flush")
    state.rho[c] = rho
    return rho


def _member_process(tree: LocalTree, state: _FlushState, v: int, parent_arrival, want: str):
    """Run the arrival/departure/flush process at v.

    Members are v's children (arriving at their labels, departing at their
    detached removal times) plus, when parent_arrival is not None, the
    parent edge (departing only through a flush of v).  A flush empties the
    member set whenever an arrival tips the count to the forbidden degree.

    want="first_flush": return the first flush time >= parent_arrival (inf
    if none).  want="survivors": return (parent_alive, child ids alive at
    the horizon).
    """
    k = state.k
    kids = [c for c in tree.kids[v] if c != tree.parent_leaf]
    events = []
    for g in kids:
        events.append((tree.plabel[g], 1, g))
        rho_g = _rho_of(tree, state, g)
        if rho_g < _INF:
            events.append((rho_g, 2, g))
    if parent_arrival is not None:
        events.append((parent_arrival, 0, -1))
    events.sort()
    active: set[int] = set()
    parent_in = False
    parent_alive = None if parent_arrival is None else False
    for time_, kind, g in events:
        if kind == 2:
            active.discard(g)
            continue
        size = len(active) + (1 if parent_in else 0)
        if k != UNBOUNDED and size == k - 1:
            # the arriving edge tips the degree to the cap: flush everything
            if want == "first_flush" and (parent_in or kind == 0):
                return time_
            active.clear()
            if parent_in or kind == 0:
                parent_in = False
                parent_alive = False
            continue
        if kind == 0:
            parent_in = True
            parent_alive = True
        elif state.rho[g] > time_:  # dead-on-arrival edges never join
            active.add(g)
    if want == "first_flush":
        return _INF
    return parent_alive, sorted(active, key=tree.plabel.__getitem__)


def root_fates(
    t: float,
    k,
    rng: RngStream,
    forced=(),
    parent_label=None,
    engine: str = "flush",
    budget: int = 200_000,
    r_max: int = 40,
    max_nodes: int = 10**6,
):
    """Fates of the root's incident edges in one lazily grown sample.

    Returns (parent_alive, number of forced edges surviving, labels of the
    other surviving child edges), or None when the work budget was hit
    (callers report those separately).
    """
    tree = LocalTree(t, rng.root_uid(), forced=forced, parent_label=parent_label,
                     max_nodes=max_nodes)
    if engine == "flush":
        state = _FlushState(k, budget)
        try:
            if not tree.expand(0):
                return None
            parent_alive, alive_kids = _member_process(tree, state, 0, parent_label, "survivors")
        except BudgetExceeded:
            return None
    elif engine == "ball":
        if tree.certify(0, r_max) is None:
            return None
        alive = tree.phi_alive(k)
        parent_alive = bool(alive[tree.parent_leaf]) if tree.parent_leaf is not None else None
        alive_kids = [c for c in tree.kids[0] if alive[c] and c != tree.parent_leaf]
    else:
        raise ValueError("engine must be flush or ball")
    forced_set = set(tree.forced_ids)
    forced_alive = sum(1 for c in alive_kids if c in forced_set)
    others = [tree.plabel[c] for c in alive_kids if c not in forced_set]
    return parent_alive, forced_alive, others


def sample_root_law(t: float, k, rng: RngStream, engine: str = "flush", **kw):
    """Labels of the surviving root edges of one capped-tree sample, or None."""
    res = root_fates(t, k, rng, engine=engine, **kw)
    if res is None:
        return None
    return res[2]


def flush_component(
    t: float,
    k,
    rng: RngStream,
    member_cap: int | None = None,
    gen_cap: int | None = None,
    arena_cap: int = 10**6,
    budget: int = 2_000_000,
):
    """Root component of the capped tree via the flush engine.

    Returns (status, members, tree): status "complete" when the component
    closed off, "alive-cap" when it hit the member or generation cap while
    alive, "truncated" when the work budget was exceeded first.
    """
    tree = LocalTree(t, rng.root_uid(), max_nodes=arena_cap)
    state = _FlushState(k, budget)
    members: list[int] = []
    try:
        if not tree.expand(0):
            return "truncated", members, tree
        _, survivors = _member_process(tree, state, 0, None, "survivors")
        members.append(0)
        frontier = survivors
        while frontier:
            if gen_cap is not None and tree.depth[frontier[0]] >= gen_cap:
                return "alive-cap", members + frontier, tree
            if member_cap is not None and len(members) + len(frontier) >= member_cap:
                return "alive-cap", members + frontier, tree
            nxt: list[int] = []
            for v in frontier:
                members.append(v)
                alive_here = _member_process(tree, state, v, tree.plabel[v], "survivors")[1]
                nxt.extend(alive_here)
            frontier = nxt
    except BudgetExceeded:
        return "truncated", members, tree
    return "complete", members, tree


# ---------------------------------------------------------------------------
# ball engine: certified component growth


def grow_certified_component(
    tree: LocalTree,
    k,
    member_cap: int | None = None,
    gen_cap: int | None = None,
    r_max: int = 40,
):
    """BFS of the root's component, certifying the frontier in rounds and
    re-running the cascade once per round on the grown arena.

    Returns (status, members, parent_alive) with status "certified",
    "alive-cap" or "truncated" (could not certify within caps).
    """
    frontier = [0]
    members: list[int] = []
    discovered = {0}
    parent_alive = None
    while frontier:
        for v in frontier:
            if tree.certify(v, r_max) is None:
                return "truncated", members + frontier, parent_alive
        alive = tree.phi_alive(k)
        nxt: list[int] = []
        max_depth = 0
        for v in frontier:
            members.append(v)
            if v == 0 and tree.parent_leaf is not None:
                parent_alive = bool(alive[tree.parent_leaf])
            for c in tree.kids[v]:
                if c == tree.parent_leaf:
                    continue
                if alive[c] and c not in discovered:
                    discovered.add(c)
                    nxt.append(c)
                    if tree.depth[c] > max_depth:
                        max_depth = tree.depth[c]
        if nxt:
            if gen_cap is not None and max_depth >= gen_cap:
                return "alive-cap", members + nxt, parent_alive
            if member_cap is not None and len(members) + len(nxt) >= member_cap:
                return "alive-cap", members + nxt, parent_alive
        frontier = nxt
    return "certified", members, parent_alive


def sample_tkt(t: float, k, rng: RngStream, depth_cap: int = 60, size_cap: int = 10**6):
    """Sample the capped local-limit tree (the root's component).

    Returns (tree, status): "certified" when the component was fully
    determined, "truncated" when a cap was hit first.  The tree retains the
    pruned structure; `tree.component` and `tree.alive_mask` hold the
    cascade outcome.
    """
    tree = LocalTree(t, rng.root_uid(), depth_cap=depth_cap, max_nodes=size_cap)
    status, members, _ = grow_certified_component(tree, k)
    tree.component = members
    tree.alive_mask = tree.phi_alive(k)
    return tree, "certified" if status == "certified" else "truncated"


# ---------------------------------------------------------------------------
# survival estimation


@dataclass
class SurvivalEstimate:
    """Monte Carlo estimate of the survival probability of the capped tree."""

    a_hat: float
    replicas: int
    gen_cap: int
    size_cap: int
    ci_halfwidth: float
    truncated_fraction: float = 0.0

    @property
    def se(self) -> float:
        return self.ci_halfwidth / 1.959963984540054


def classify_survival(
    t: float,
    k,
    rng: RngStream,
    gen_cap: int,
    member_cap: int,
    arena_cap: int = 10**6,
) -> str:
    """One replica of the survival proxy: "surviving", "extinct" or
    "truncated".  A replica survives when the root component reaches the
    generation or size cap while alive; it is extinct when the component
    closes off below the caps."""
    status, _, _ = flush_component(
        t, k, rng, member_cap=member_cap, gen_cap=gen_cap, arena_cap=arena_cap
    )
    if status == "alive-cap":
        return "surviving"
    if status == "complete":
        return "extinct"
    return "truncated"


def estimate_survival(
    t: float,
    k,
    replicas: int,
    rng: RngStream,
    gen_cap: int = 50,
    size_cap: int = 10**4,
    arena_cap: int = 10**6,
) -> SurvivalEstimate:
    """Surviving fraction over independent replicas of the capped tree.

    `size_cap` is the component-size part of the survival proxy; truncated
    replicas (budget exhausted before the proxy resolved) are reported
    separately, never counted as extinct or surviving.
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    surviving = 0
    truncated = 0
    for i in range(replicas):
        res = classify_survival(t, k, rng.child(i), gen_cap, size_cap, arena_cap=arena_cap)
        if res == "surviving":
            surviving += 1
        elif res == "truncated":
            truncated += 1
    a = surviving / replicas
    ci = 1.959963984540054 * math.sqrt(max(a * (1 - a), 1e-12) / replicas)
    return SurvivalEstimate(
        a_hat=a,
        replicas=replicas,
        gen_cap=gen_cap,
        size_cap=size_cap,
        ci_halfwidth=ci,
        truncated_fraction=truncated / replicas,
    )
