"""Experiment configuration, dispatch and result persistence.

A config plus the code version fully determines the outputs: every run
derives its randomness from the config seed, outputs carry the config hash
and files are written atomically (temp file + rename).
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import analytic, kernel as kernelmod, localtree, process
from .graphs import UNBOUNDED, sample_event_stream
from .rng import RngStream

EXPERIMENTS = (
    "simulate",
    "no-giant-k3",
    "threshold-scan",
    "giant-k5",
    "local-limit-tv",
    "equivalence",
    "kernel-build",
    "extinction",
    "survival",
)


@dataclass
class ExperimentConfig:
    experiment: str
    n: int = 1000
    k: object = 5  # int or "inf"
    t: float = 2.0
    t_grid: list | None = None
    replicas: int = 10
    seed: int = 0
    workers: int = 1
    fmt: str = "csv"
    out: str | None = None
    plot: bool = True
    # caps and numeric knobs
    depth_cap: int = 60
    gen_cap: int = 50
    size_cap: int = 10_000
    bins: int = 8
    samples_per_cell: int = 120
    samples: int = 100_000
    kernel_path: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.fmt not in ("csv", "json"):
            raise ValueError("format must be csv or json")

    def k_value(self):
        return UNBOUNDED if self.k in ("inf", UNBOUNDED) else int(self.k)

    def to_json(self) -> str:
        d = asdict(self)
        d["k"] = "inf" if self.k in ("inf", UNBOUNDED) else int(self.k)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    # human-editable mirror -------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["experiment"] = {
            "name": self.experiment,
            "n": str(self.n),
            "k": "inf" if self.k in ("inf", UNBOUNDED) else str(self.k),
            "t": str(self.t),
            "t_grid": "" if self.t_grid is None else ",".join(str(x) for x in self.t_grid),
            "replicas": str(self.replicas),
            "seed": str(self.seed),
            "workers": str(self.workers),
            "format": self.fmt,
            "out": self.out or "",
            "plot": str(self.plot).lower(),
        }
        cp["caps"] = {
            "depth_cap": str(self.depth_cap),
            "gen_cap": str(self.gen_cap),
            "size_cap": str(self.size_cap),
            "bins": str(self.bins),
            "samples_per_cell": str(self.samples_per_cell),
            "samples": str(self.samples),
            "kernel_path": self.kernel_path or "",
        }
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        e = cp["experiment"]
        caps = cp["caps"] if cp.has_section("caps") else {}
        grid = e.get("t_grid", "")
        k_raw = e.get("k", "5")
        return cls(
            experiment=e["name"],
            n=int(e.get("n", "1000")),
            k="inf" if k_raw == "inf" else int(k_raw),
            t=float(e.get("t", "2.0")),
            t_grid=[float(x) for x in grid.split(",")] if grid else None,
            replicas=int(e.get("replicas", "10")),
            seed=int(e.get("seed", "0")),
            workers=int(e.get("workers", "1")),
            fmt=e.get("format", "csv"),
            out=e.get("out") or None,
            plot=e.get("plot", "true") == "true",
            depth_cap=int(caps.get("depth_cap", "60")),
            gen_cap=int(caps.get("gen_cap", "50")),
            size_cap=int(caps.get("size_cap", "10000")),
            bins=int(caps.get("bins", "8")),
            samples_per_cell=int(caps.get("samples_per_cell", "120")),
            samples=int(caps.get("samples", "100000")),
            kernel_path=caps.get("kernel_path") or None,
        )


@dataclass
class RunRecord:
    config_hash: str
    rows: list
    summary: dict
    wall_time: float
    extra: dict = field(default_factory=dict)


def _summary_stats(values) -> dict:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        return {"count": 0}
    return {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "se": float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0,
        "q10": float(np.quantile(arr, 0.1)),
        "q50": float(np.quantile(arr, 0.5)),
        "q90": float(np.quantile(arr, 0.9)),
    }


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename; interrupted runs leave no
    partial file at the target path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(rows: list, config_hash: str) -> str:
    buf = io.StringIO()
    buf.write("# schema=1\n")
    buf.write(f"# config={config_hash}\n")
    if rows:
        cols = list(rows[0].keys())
        buf.write(",".join(cols) + "\n")
        for row in rows:
            buf.write(",".join(_csv_cell(row.get(c)) for c in cols) + "\n")
    return buf.getvalue()


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_record(record: RunRecord, config: ExperimentConfig) -> None:
    if not config.out:
        return
    out = Path(config.out)
    if config.fmt == "csv":
        write_atomic(out, rows_to_csv(record.rows, record.config_hash))
        write_atomic(
            out.with_suffix(out.suffix + ".summary.json"),
            json.dumps(
                {"schema": 1, "config": record.config_hash, "summary": record.summary,
                 "wall_time": record.wall_time},
                indent=2,
            ),
        )
    else:
        payload = {
            "schema": 1,
            "config": record.config_hash,
            "config_full": json.loads(config.to_json()),
            "rows": record.rows,
            "summary": record.summary,
            "wall_time": record.wall_time,
        }
        write_atomic(out, json.dumps(payload, indent=2))
    if config.plot:
        from . import plots

        plots.render_record(config, record, out)


# ---------------------------------------------------------------------------
# experiment bodies


def _run_simulate(config: ExperimentConfig) -> tuple[list, dict, dict]:
    k = config.k_value()
    rows = []
    base = RngStream(config.seed)
    for rep in range(config.replicas):
        stream = base.child(rep)
        snaps = process.simulate(config.n, k, config.t, stream)
        _, summary = snaps[-1]
        row = {
            "replica": rep,
            "seed": config.seed,
            "n": config.n,
            "k": "inf" if k == UNBOUNDED else k,
            "t": config.t,
            "c_max": summary.c_max,
            "n_components": summary.n_components,
        }
        if k == 3:
            row["z"] = process.z_statistic(summary)
        rows.append(row)
    return rows, {"c_max_over_n": _summary_stats(r["c_max"] / config.n for r in rows)}, {}


def _run_no_giant_k3(config: ExperimentConfig) -> tuple[list, dict, dict]:
    grid = config.t_grid or [0.5, 1.0, 2.0, 4.0, 8.0]
    rows = []
    base = RngStream(config.seed)
    for rep in range(config.replicas):
        snaps = process.simulate(config.n, 3, max(grid), base.child(rep), observe_at=grid)
        for t_obs, summ in snaps:
            rows.append(
                {"replica": rep, "t": t_obs, "c_max": summ.c_max,
                 "c_max_over_n": summ.c_max / config.n, "z_over_n": process.z_statistic(summ) / config.n}
            )
    summary = {
        f"t={t}": _summary_stats(r["c_max_over_n"] for r in rows if r["t"] == t) for t in grid
    }
    return rows, summary, {}


def _run_threshold_scan(config: ExperimentConfig) -> tuple[list, dict, dict]:
    grid = config.t_grid or list(np.linspace(0.0, 8.0, 81))
    k = int(config.k_value())
    rows = analytic.degree_table(grid, k)
    interval = analytic.supercritical_interval(k) if k >= 3 else None
    summary = {"supercritical_interval": list(interval) if interval else None}
    return rows, summary, {}


def _run_giant_k5(config: ExperimentConfig) -> tuple[list, dict, dict]:
    k = int(config.k_value())
    rows = []
    base = RngStream(config.seed)
    for rep in range(config.replicas):
        g_low, g_k, _ = process.coupled_sandwich(config.n, k, config.t, base.child(rep))
        from .graphs import components

        c_k = components(g_k).c_max
        c_low = components(g_low).c_max
        rows.append(
            {"replica": rep, "c_max": c_k, "c_max_over_n": c_k / config.n,
             "lower_c_max_over_n": c_low / config.n}
        )
    return rows, {
        "c_max_over_n": _summary_stats(r["c_max_over_n"] for r in rows),
        "lower_c_max_over_n": _summary_stats(r["lower_c_max_over_n"] for r in rows),
    }, {}


def _run_equivalence(config: ExperimentConfig) -> tuple[list, dict, dict]:
    k = config.k_value()
    rows = []
    base = RngStream(config.seed)
    for rep in range(config.replicas):
        snaps = process.simulate(config.n, k, config.t, base.child(rep))
        _, summ = snaps[-1]
        rows.append({"replica": rep, "c_max": summ.c_max, "c_max_over_n": summ.c_max / config.n})
    return rows, {"c_max_over_n": _summary_stats(r["c_max_over_n"] for r in rows)}, {}


def root_statistic_tv(n: int, k: int, t: float, replicas: int, samples: int, seed: int,
                      label_bins: int = 10):
    """Total-variation distance between the joint (root degree, binned
    incident-label histogram) under the finite process and under the
    local-limit sampler."""
    from collections import Counter

    base = RngStream(seed)
    g_counts: Counter = Counter()
    g_total = 0
    for rep in range(replicas):
        stream = sample_event_stream(n, t, base.child(rep))
        state, _ = process.run_stream(stream, k)
        g = state.graph
        for v in range(n):
            labs = g.incident_labels(v)
            hist = [0] * label_bins
            for lab in labs:
                hist[min(int(lab / t * label_bins), label_bins - 1)] += 1
            g_counts[(len(labs), tuple(hist))] += 1
            g_total += 1
    tree_counts: Counter = Counter()
    tree_total = 0
    tstream = base.child(10**6)
    draws = 0
    i = 0
    while draws < samples:
        labels = localtree.sample_root_law(t, k, tstream.child(i))
        i += 1
        if labels is None:
            continue
        draws += 1
        hist = [0] * label_bins
        for lab in labels:
            hist[min(int(lab / t * label_bins), label_bins - 1)] += 1
        tree_counts[(len(labels), tuple(hist))] += 1
        tree_total += 1
    keys = set(g_counts) | set(tree_counts)
    tv = 0.5 * sum(
        abs(g_counts.get(key, 0) / g_total - tree_counts.get(key, 0) / tree_total) for key in keys
    )
    return tv, g_total, tree_total


def _run_local_limit_tv(config: ExperimentConfig) -> tuple[list, dict, dict]:
    k = int(config.k_value())
    tv, n_g, n_tree = root_statistic_tv(
        config.n, k, config.t, config.replicas, config.samples, config.seed
    )
    rows = [{"n": config.n, "k": k, "t": config.t, "tv": tv,
             "samples_graph": n_g, "samples_tree": n_tree}]
    return rows, {"tv": tv}, {}


def _run_survival(config: ExperimentConfig) -> tuple[list, dict, dict]:
    k = int(config.k_value())
    grid = config.t_grid or [config.t]
    rows = []
    base = RngStream(config.seed)
    for idx, t in enumerate(grid):
        est = localtree.estimate_survival(
            float(t), k, config.replicas, base.child(idx),
            gen_cap=config.gen_cap, size_cap=config.size_cap,
        )
        rows.append(
            {"t": float(t), "k": k, "a_hat": est.a_hat, "ci": est.ci_halfwidth,
             "truncated_fraction": est.truncated_fraction}
        )
    return rows, {"max_a_hat": max(r["a_hat"] for r in rows) if rows else 0.0}, {}


def _build_kernel(config: ExperimentConfig) -> kernelmod.OffspringKernel:
    k = int(config.k_value())
    return kernelmod.estimate_kernel(
        config.t, k, config.bins, config.samples_per_cell, RngStream(config.seed)
    )


def _run_kernel_build(config: ExperimentConfig) -> tuple[list, dict, dict]:
    kern = _build_kernel(config)
    if config.kernel_path:
        kern.save(config.kernel_path)
    mass = kernelmod.phi_apply(kern, np.ones(kern.bins))
    rows = [{
        "t": config.t, "k": int(config.k_value()), "bins": config.bins,
        "samples_per_cell": config.samples_per_cell, "seed": config.seed,
        "mass_min": float(mass.min()), "mass_max": float(mass.max()),
        "failed_fraction": kern.failed_fraction,
        "kernel_path": config.kernel_path or "",
    }]
    return rows, {"mass_dev": float(np.max(np.abs(mass - 1.0)))}, {}


def _run_extinction(config: ExperimentConfig) -> tuple[list, dict, dict]:
    k = int(config.k_value())
    if config.kernel_path and Path(config.kernel_path).exists():
        kern = kernelmod.OffspringKernel.load(
            config.kernel_path,
            expect={"t": config.t, "k": k, "bins": config.bins,
                    "samples_per_cell": config.samples_per_cell, "seed": config.seed},
        )
    else:
        kern = _build_kernel(config)
        if config.kernel_path:
            kern.save(config.kernel_path)
    sol = kernelmod.solve_extinction(kern, RngStream(config.seed).child(999))
    rows = [{
        "t": config.t, "k": k, "bins": config.bins,
        "rho_hat": sol.rho_hat, "q_twostage": sol.q_twostage,
        "a": 1.0 - sol.q_twostage, "residual": sol.residual,
        "bracket_gap": sol.bracket_gap, "iterations": sol.iterations,
        "status": sol.status, "critical_window": sol.critical_window,
    }]
    extra = {"q": sol.q, "midpoints": kern.midpoints()}
    return rows, {"a": 1.0 - sol.q_twostage, "rho_hat": sol.rho_hat}, extra


_BODIES = {
    "simulate": _run_simulate,
    "no-giant-k3": _run_no_giant_k3,
    "threshold-scan": _run_threshold_scan,
    "giant-k5": _run_giant_k5,
    "equivalence": _run_equivalence,
    "local-limit-tv": _run_local_limit_tv,
    "survival": _run_survival,
    "kernel-build": _run_kernel_build,
    "extinction": _run_extinction,
}


def run(config: ExperimentConfig) -> RunRecord:
    """Dispatch an experiment, write outputs atomically, return the record."""
    start = time.monotonic()
    rows, summary, extra = _BODIES[config.experiment](config)
    record = RunRecord(
        config_hash=config.config_hash(),
        rows=rows,
        summary=summary,
        wall_time=time.monotonic() - start,
        extra=extra,
    )
    write_record(record, config)
    return record
