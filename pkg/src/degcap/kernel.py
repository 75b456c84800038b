"""Discretized offspring kernel of the capped local limit and its numerics.

The capped tree below the root is a multitype branching process with type
space [0, t] (the label of the edge to the parent).  Conditional on
survival of that edge, the law of the surviving child-label set has a
density on each cardinality stratum; this module estimates those densities
cell by cell on a uniform grid by direct simulation with a forced root edge
set, then evaluates the generating operator, the extinction fixed point and
the spectral radius of the mean operator on the grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, permutations

import numpy as np

from .localtree import flush_component, root_fates, sample_root_law
from .rng import RngStream


class NumericFailure(RuntimeError):
    """Iterative numerical routine failed to make progress."""


@dataclass
class OffspringKernel:
    """Monte Carlo tables of the offspring law on a B-bin grid of [0, t].

    `f[i]` holds the raw event probabilities (numerators) on cells
    (y-bin, x_1-bin, ..., x_i-bin); dividing by the survival factor
    `m_hat[y]` gives the conditional offspring densities.  Tables are
    symmetric in the x axes by construction.
    """

    t: float
    k: int
    bins: int
    f: dict[int, np.ndarray]
    m_hat: np.ndarray
    samples_per_cell: int
    m_samples: int
    seed: int
    failed_fraction: float = 0.0
    percolation: float = 0.0  # 2*epsilon applied by thinning, 0 for the raw kernel
    # per (y-bin, stratum) quadrature masses before calibration, and the
    # plain-run masses the tables were calibrated to (diagnostics)
    raw_stratum: np.ndarray | None = None
    plain_stratum: np.ndarray | None = None

    @property
    def delta(self) -> float:
        return self.t / self.bins

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.bins) + 0.5) * self.delta

    def g(self, i: int) -> np.ndarray:
        """Conditional offspring density table for i children."""
        fi = self.f[i]
        shape = (self.bins,) + (1,) * i
        return fi / self.m_hat.reshape(shape)

    def g0_vec(self) -> np.ndarray:
        return self.g(0)

    def density_floor(self, i: int) -> float:
        """Analytic lower bound for the i-child density."""
        return math.exp(-(i + 1) * self.t)

    def floor_violations(self, i: int, slack_se: float = 3.0) -> int:
        """Cells whose estimate falls below the analytic floor minus slack SE."""
        gi = self.g(i)
        n = max(self.samples_per_cell, 1)
        se = np.sqrt(np.maximum(gi * (1 - np.minimum(gi, 1.0)), 0.0) / n) / self.m_hat.reshape(
            (self.bins,) + (1,) * i
        )
        return int(np.sum(gi < self.density_floor(i) - slack_se * se - 1e-12))

    def h_from_link(self, i: int) -> np.ndarray:
        """Root-stage density for i >= 1 children via the survival-factor link.

        h_i(x_1, ..., x_i) = m(x_1) * f_{i-1}(y=x_1, x_2, ..., x_i).
        """
        if i < 1 or i > self.k - 1:
            raise ValueError("root stage has 1..k-1 children")
        fi = self.f[i - 1]
        return self.m_hat.reshape((self.bins,) + (1,) * (i - 1)) * fi

    def mean_matrix(self) -> np.ndarray:
        """Density m(y, z) of the expected number of type-z children."""
        B = self.bins
        d = self.delta
        m = np.zeros((B, B))
        for i in range(1, self.k - 1):
            gi = self.g(i)
            reduced = gi.sum(axis=tuple(range(2, i + 1))) * d ** (i - 1)
            m += reduced / math.factorial(i - 1)
        return m

    def thin(self, epsilon: float) -> "OffspringKernel":
        """Kernel of the (1-2*epsilon)-percolated process.

        Percolation keeps each child independently with probability
        1-2*epsilon, which thins the offspring law; the thinned stratum
        densities are mixtures of the raw ones with the extra children
        integrated out.
        """
        if not 0 <= epsilon < 0.5:
            raise ValueError("epsilon must be in [0, 1/2)")
        p = 1.0 - 2.0 * epsilon
        B = self.bins
        d = self.delta
        new_f: dict[int, np.ndarray] = {}
        for i in range(self.k - 1):
            acc = np.zeros((B,) * (i + 1))
            for j in range(i, self.k - 1):
                gj = self.g(j)
                reduced = gj.sum(axis=tuple(range(i + 1, j + 1))) * d ** (j - i)
                acc += (p**i * (1 - p) ** (j - i) / math.factorial(j - i)) * reduced
            new_f[i] = acc
        return OffspringKernel(
            t=self.t,
            k=self.k,
            bins=B,
            f=new_f,
            m_hat=np.ones(B),
            samples_per_cell=self.samples_per_cell,
            m_samples=self.m_samples,
            seed=self.seed,
            failed_fraction=self.failed_fraction,
            percolation=2.0 * epsilon,
            raw_stratum=None,
            plain_stratum=None,
        )

    # persistence ----------------------------------------------------------
    def save(self, path) -> None:
        meta = {
            "t": self.t,
            "k": self.k,
            "bins": self.bins,
            "samples_per_cell": self.samples_per_cell,
            "m_samples": self.m_samples,
            "seed": self.seed,
            "failed_fraction": self.failed_fraction,
            "percolation": self.percolation,
        }
        arrays = {f"f{i}": self.f[i] for i in self.f}
        if self.raw_stratum is not None:
            arrays["raw_stratum"] = self.raw_stratum
        if self.plain_stratum is not None:
            arrays["plain_stratum"] = self.plain_stratum
        np.savez_compressed(path, meta=json.dumps(meta), m_hat=self.m_hat, **arrays)

    @classmethod
    def load(cls, path, expect: dict | None = None) -> "OffspringKernel":
        data = np.load(path, allow_pickle=False)
        meta = json.loads(str(data["meta"]))
        if expect:
            for key, val in expect.items():
                if meta.get(key) != val:
                    raise ValueError(
                        f"kernel file {path} has {key}={meta.get(key)!r}, expected {val!r}"
                    )
        f = {}
        i = 0
        while f"f{i}" in data:
            f[i] = data[f"f{i}"]
            i += 1
        return cls(
            t=meta["t"],
            k=meta["k"],
            bins=meta["bins"],
            f=f,
            m_hat=data["m_hat"],
            samples_per_cell=meta["samples_per_cell"],
            m_samples=meta["m_samples"],
            seed=meta["seed"],
            failed_fraction=meta.get("failed_fraction", 0.0),
            percolation=meta.get("percolation", 0.0),
            raw_stratum=data["raw_stratum"] if "raw_stratum" in data else None,
            plain_stratum=data["plain_stratum"] if "plain_stratum" in data else None,
        )


def _cell_points(bin_ids, y_bin, delta, bins_total):
    """Representative label points for a multiset of bins, plus the y point.

    Repeated bins get stratified offsets inside the bin; if the parent type
    shares a bin with an odd-multiplicity midpoint slot, the parent point is
    nudged off the lattice so all labels stay distinct.
    """
    counts: dict[int, int] = {}
    for b in bin_ids:
        counts[b] = counts.get(b, 0) + 1
    points = []
    seen: dict[int, int] = {}
    for b in bin_ids:
        j = seen.get(b, 0)
        seen[b] = j + 1
        m = counts[b]
        points.append((b + (2 * j + 1) / (2 * m)) * delta)
    y_point = None
    if y_bin is not None:
        frac = 0.5
        m = counts.get(y_bin, 0)
        if m % 2 == 1:
            frac = 0.5 + 1.0 / (4.0 * m)
        y_point = (y_bin + frac) * delta
    return points, y_point


def estimate_kernel(
    t: float,
    k: int,
    bins: int,
    samples_per_cell: int,
    rng: RngStream,
    m_samples: int = 4000,
    r_max: int = 40,
) -> OffspringKernel:
    """Estimate the offspring tables by per-cell forced-root simulation.

    Each cell event: force root edges at the cell's label points, attach
    the parent edge at the y point, grow lazily until the root's edge fates
    resolve and test that exactly the forced edges survive.  Cells use
    mutually independent streams: sharing draws across cells would couple
    their errors coherently in every quadrature sum.

    Per-cell noise adds up across the many cells of a stratum, so the
    stratum totals are post-stratified: a plain (unforced) run per y bin
    measures the survival factor and the exact offspring-count masses, and
    each stratum table is rescaled to integrate to its measured mass.  The
    tables keep supplying the within-stratum shape; `raw_stratum` and
    `plain_stratum` record the correction applied.
    """
    if bins < 4:
        raise ValueError("need at least 4 bins")
    if samples_per_cell < 100:
        raise ValueError("need at least 100 samples per cell")
    if k < 2:
        raise ValueError("k must be >= 2")
    B = bins
    delta = t / B
    failures = 0
    total = 0

    m_hat = np.zeros(B)
    plain_stratum = np.zeros((B, k - 1))
    for b in range(B):
        _, y_pt = _cell_points((), b, delta, B)
        good = 0
        hits = 0
        strat = np.zeros(k - 1)
        ystream = rng.child(500 + b)
        for s in range(m_samples):
            res = root_fates(t, k, ystream.child(s), parent_label=y_pt, r_max=r_max)
            total += 1
            if res is None:
                failures += 1
                continue
            good += 1
            if res[0]:
                hits += 1
                strat[len(res[2])] += 1
        m_hat[b] = hits / max(good, 1)
        plain_stratum[b] = strat / max(hits, 1)

    f: dict[int, np.ndarray] = {}
    raw_stratum = np.zeros((B, k - 1))
    for i in range(k - 1):
        table = np.zeros((B,) * (i + 1))
        stratum = rng.child(1000 + i)
        for cell_idx, cell in enumerate(combinations_with_replacement(range(B), i)):
            cstream = stratum.child(cell_idx)
            for b in range(B):
                pts, y_pt = _cell_points(cell, b, delta, B)
                ystream = cstream.child(b)
                hits = 0
                good = 0
                for s in range(samples_per_cell):
                    res = root_fates(
                        t, k, ystream.child(s), forced=pts, parent_label=y_pt, r_max=r_max
                    )
                    total += 1
                    if res is None:
                        failures += 1
                        continue
                    good += 1
                    parent_alive, forced_alive, others = res
                    if parent_alive and forced_alive == i and not others:
                        hits += 1
                val = hits / max(good, 1)
                for perm in set(permutations(cell)):
                    table[(b,) + perm] = val
        # post-stratification: rescale to the plain-run stratum masses
        axes = tuple(range(1, i + 1))
        quad = table.sum(axis=axes) * delta**i / math.factorial(i) / m_hat
        raw_stratum[:, i] = quad
        target = plain_stratum[:, i]
        factor = np.where(quad > 0, np.divide(target, quad, out=np.ones(B), where=quad > 0), 1.0)
        f[i] = table * factor.reshape((B,) + (1,) * i)

    return OffspringKernel(
        t=t,
        k=k,
        bins=B,
        f=f,
        m_hat=m_hat,
        samples_per_cell=samples_per_cell,
        m_samples=m_samples,
        seed=rng.seed,
        failed_fraction=failures / max(total, 1),
        raw_stratum=raw_stratum,
        plain_stratum=plain_stratum,
    )


def estimate_root_stage(
    t: float, k: int, bins: int, samples_per_cell: int, rng: RngStream, r_max: int = 40
) -> dict[int, np.ndarray]:
    """Direct per-cell estimates of the root-stage densities (no parent edge).

    Used as the independent side of the link-lemma and symmetry checks; the
    production path recovers these tables from `h_from_link`.
    """
    B = bins
    delta = t / B
    out: dict[int, np.ndarray] = {}
    for i in range(1, k):
        table = np.zeros((B,) * i)
        for cell_idx, cell in enumerate(combinations_with_replacement(range(B), i)):
            pts, _ = _cell_points(cell, None, delta, B)
            stream = rng.child(10_000 + i).child(cell_idx)
            hits = 0
            good = 0
            for s in range(samples_per_cell):
                res = root_fates(t, k, stream.child(s), forced=pts, r_max=r_max)
                if res is None:
                    continue
                good += 1
                _, forced_alive, others = res
                if forced_alive == i and not others:
                    hits += 1
            val = hits / max(good, 1)
            for perm in set(permutations(cell)):
                table[perm] = val
        out[i] = table
    return out


def estimate_root_cell(
    t: float, k: int, labels, samples: int, rng: RngStream, r_max: int = 40
) -> tuple[float, float]:
    """P(exactly the forced labels survive at a free root): estimate and SE."""
    hits = 0
    good = 0
    for s in range(samples):
        res = root_fates(t, k, rng.child(s), forced=labels, r_max=r_max)
        if res is None:
            continue
        good += 1
        _, forced_alive, others = res
        if forced_alive == len(labels) and not others:
            hits += 1
    p = hits / max(good, 1)
    se = math.sqrt(max(p * (1 - p), 1e-12) / max(good, 1))
    return p, se


def phi_apply(kernel: OffspringKernel, fvec: np.ndarray) -> np.ndarray:
    """Generating operator on the grid: midpoint quadrature of the expansion.

    phi(f)(y) = sum_i (1/i!) * integral of g_i(y, x_1..x_i) f(x_1)..f(x_i).
    Nonnegative weights, so the discretized operator is monotone exactly.
    """
    fvec = np.asarray(fvec, dtype=float)
    if fvec.shape != (kernel.bins,):
        raise ValueError("f must be a per-bin vector")
    d = kernel.delta
    out = kernel.g0_vec().copy()
    for i in range(1, kernel.k - 1):
        gi = kernel.g(i)
        contracted = gi
        for _ in range(i):
            contracted = contracted @ fvec
        out += contracted * d**i / math.factorial(i)
    return out


@dataclass
class ExtinctionSolution:
    """Fixed point of the generating operator plus derived quantities."""

    q: np.ndarray
    q_above: np.ndarray
    residual: float
    bracket_gap: float
    iterations: int
    rho_hat: float
    q_twostage: float
    twostage_se: float
    status: str
    critical_window: bool
    monotone_violation: float


def solve_extinction(
    kernel: OffspringKernel,
    rng: RngStream,
    tol: float = 1e-6,
    max_iters: int = 5000,
    root_draws: int = 30_000,
) -> ExtinctionSolution:
    """Extinction probability on the grid by two-sided monotone iteration.

    From below the start is phi(0), which satisfies q <= phi(q); from above
    the start is 1 - eps (1 itself is always a fixed point since the
    offspring masses sum to one).  Success requires both iterations to
    settle and the two limits to agree; near-critical kernels are flagged
    instead of asserting the sign of the survival probability.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    lo = kernel.g0_vec().copy()
    hi = np.full(kernel.bins, 1.0 - 1e-3)
    mono_violation = 0.0
    iters = 0
    d_lo = d_hi = _INF = float("inf")
    for iters in range(1, max_iters + 1):
        lo_next = np.clip(phi_apply(kernel, lo), 0.0, 1.0)
        hi_next = np.clip(phi_apply(kernel, hi), 0.0, 1.0)
        mono_violation = max(
            mono_violation,
            float(np.max(lo - lo_next, initial=0.0)),
            float(np.max(hi_next - hi, initial=0.0)) if iters > 1 else 0.0,
        )
        d_lo = float(np.max(np.abs(lo_next - lo)))
        d_hi = float(np.max(np.abs(hi_next - hi)))
        lo, hi = lo_next, hi_next
        if max(d_lo, d_hi) < tol:
            break
    gap = float(np.max(np.abs(hi - lo)))
    residual = float(np.max(np.abs(phi_apply(kernel, lo) - lo)))
    status = "converged" if (max(d_lo, d_hi) < tol and gap <= max(100 * tol, 1e-4)) else "diverged"
    rho = estimate_spectral_radius(kernel)

    # two-stage extinction: average prod q(label) over root-offspring draws,
    # thinning the draws when the kernel is a percolated one
    mids = kernel.midpoints()
    keep = 1.0 - kernel.percolation
    u = np.random.Generator(np.random.PCG64(rng.seed ^ 0x5EED))
    draws = 0
    acc = 0.0
    acc2 = 0.0
    for s in range(root_draws):
        labels = sample_root_law(kernel.t, kernel.k, rng.child(s))
        if labels is None:
            continue
        prod = 1.0
        for lab in labels:
            if keep < 1.0 and u.random() > keep:
                continue
            prod *= float(np.interp(lab, mids, lo))
        draws += 1
        acc += prod
        acc2 += prod * prod
    q2 = acc / max(draws, 1)
    var = max(acc2 / max(draws, 1) - q2 * q2, 0.0)
    se = math.sqrt(var / max(draws, 1))
    return ExtinctionSolution(
        q=lo,
        q_above=hi,
        residual=residual,
        bracket_gap=gap,
        iterations=iters,
        rho_hat=rho,
        q_twostage=q2,
        twostage_se=se,
        status=status,
        critical_window=abs(rho - 1.0) < 0.05,
        monotone_violation=mono_violation,
    )


def estimate_spectral_radius(kernel: OffspringKernel, tol: float = 1e-12, max_iters: int = 20_000) -> float:
    """Largest eigenvalue of the discretized mean operator by power iteration."""
    a = kernel.mean_matrix() * kernel.delta
    if not np.any(a > 0):
        return 0.0
    x = np.ones(kernel.bins)
    lam = 0.0
    for _ in range(max_iters):
        y = a @ x
        lam_next = float(np.max(y))
        if lam_next <= 0:
            return 0.0
        y /= lam_next
        if abs(lam_next - lam) < tol * max(lam_next, 1.0):
            return lam_next
        lam, x = lam_next, y
    raise NumericFailure("power iteration failed to settle")


def growth_rate_mc(
    t: float,
    k: int,
    replicas: int,
    rng: RngStream,
    max_gen: int = 8,
    fit_from: int = 2,
    size_cap: int = 10**5,
) -> float:
    """Spectral radius from the growth of generation totals of sampled trees.

    Pools the generation sizes of `replicas` independent capped trees
    (unconditioned totals grow like rho^i) and regresses the log totals on
    the generation index.
    """
    totals = np.zeros(max_gen + 1)
    for i in range(replicas):
        status, members, tree = flush_component(
            t, k, rng.child(i), gen_cap=max_gen + 1, arena_cap=size_cap
        )
        for v in members:
            d = tree.depth[v]
            if d <= max_gen:
                totals[d] += 1
    gens = np.arange(fit_from, max_gen + 1)
    vals = totals[fit_from:]
    if np.any(vals <= 0):
        return 0.0
    slope = np.polyfit(gens, np.log(vals), 1)[0]
    return float(np.exp(slope))
