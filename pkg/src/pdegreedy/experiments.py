"""Sweep and baseline protocols, k-means summaries, result persistence."""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .features import PdeSpec, relative_error
from .sampling import QdeimConfig, qdeim_sample, random_sample, sample_size_grid
from .siren import init_siren
from .snapshots import SnapshotMatrix
from .training import TrainConfig, train

DEFAULT_EPS_RANGES = {
    "allen-cahn": (1e-13, 1e-4),
    "burgers": (1e-10, 1e-2),
    "kdv": (1e-10, 1e-2),
}
DEFAULT_WIDTHS = (2, 128, 128, 128, 1)
DEFAULT_OMEGA0 = 30.0


def eps_grid(eps_min: float, eps_max: float, count: int = 20) -> tuple[float, ...]:
    """Logarithmically equispaced thresholds, endpoints included."""
    if not 0 < eps_min < eps_max:
        raise ValueError(f"need 0 < eps_min < eps_max, got ({eps_min}, {eps_max})")
    return tuple(np.logspace(np.log10(eps_min), np.log10(eps_max), count))


@dataclass(frozen=True)
class SweepConfig:
    t_divs: tuple[int, ...] = (1, 2, 3, 4)
    eps_values: tuple[float, ...] = eps_grid(1e-10, 1e-2)
    repetitions: int = 5
    base_seed: int = 0
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    omega0: float = DEFAULT_OMEGA0

    def __post_init__(self):
        if not self.t_divs or not self.eps_values:
            raise ValueError("t_divs and eps_values must be non-empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @classmethod
    def for_pde(cls, name: str, **overrides) -> "SweepConfig":
        lo, hi = DEFAULT_EPS_RANGES.get(name, (1e-10, 1e-2))
        overrides.setdefault("eps_values", eps_grid(lo, hi))
        return cls(**overrides)


@dataclass
class ExperimentRecord:
    sampler: str                       # greedy | random
    pde: str
    n_samples: int
    rel_errors: tuple[float, ...]      # NaN where truth is zero or run failed
    final_p: tuple[float, ...]
    wall_time_s: float
    t_div: int | None = None
    eps_thr: float | None = None
    size: int | None = None
    seed: int | None = None
    error: str | None = None


def _run_one(s: SnapshotMatrix, spec: PdeSpec, samples, train_cfg: TrainConfig,
             widths, omega0) -> tuple[np.ndarray, np.ndarray, float, str | None]:
    started = time.perf_counter()
    net = init_siren(widths, omega0=omega0, seed=train_cfg.seed)
    try:
        result = train(net, samples, spec, s.scales, train_cfg)
    except Exception as exc:  # record the failure, keep sweeping
        nan = np.full(len(spec.terms), np.nan)
        return nan, nan, time.perf_counter() - started, f"{type(exc).__name__}: {exc}"
    errs = (relative_error(spec.true_p, result.final_p)
            if spec.true_p is not None else np.full(len(spec.terms), np.nan))
    detail = "diverged" if result.diverged else None
    return errs, result.final_p, time.perf_counter() - started, detail


def _greedy_task(args):
    s, spec, t_div, eps, train_cfg, widths, omega0 = args
    try:
        samples = qdeim_sample(s, QdeimConfig(t_div=t_div, eps_thr=eps))
    except Exception as exc:
        nan = tuple(np.full(len(spec.terms), np.nan))
        return ExperimentRecord(sampler="greedy", pde=spec.name, n_samples=0,
                                rel_errors=nan, final_p=nan, wall_time_s=0.0,
                                t_div=t_div, eps_thr=eps,
                                error=f"{type(exc).__name__}: {exc}")
    errs, final_p, wall, detail = _run_one(s, spec, samples, train_cfg, widths, omega0)
    return ExperimentRecord(
        sampler="greedy", pde=spec.name, n_samples=len(samples),
        rel_errors=tuple(float(e) for e in errs),
        final_p=tuple(float(v) for v in final_p),
        wall_time_s=wall, t_div=t_div, eps_thr=eps, error=detail)


def _random_task(args):
    s, spec, size, seed, train_cfg, widths, omega0 = args
    try:
        samples = random_sample(s, size, seed)
    except Exception as exc:
        nan = tuple(np.full(len(spec.terms), np.nan))
        return ExperimentRecord(sampler="random", pde=spec.name, n_samples=0,
                                rel_errors=nan, final_p=nan, wall_time_s=0.0,
                                size=size, seed=seed,
                                error=f"{type(exc).__name__}: {exc}")
    errs, final_p, wall, detail = _run_one(s, spec, samples, train_cfg, widths, omega0)
    return ExperimentRecord(
        sampler="random", pde=spec.name, n_samples=len(samples),
        rel_errors=tuple(float(e) for e in errs),
        final_p=tuple(float(v) for v in final_p),
        wall_time_s=wall, size=size, seed=seed, error=detail)


def _map_tasks(fn, tasks, jobs: int):
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def sweep_greedy(s: SnapshotMatrix, spec: PdeSpec, sweep_cfg: SweepConfig,
                 train_cfg: TrainConfig, jobs: int = 1) -> list[ExperimentRecord]:
    """One record per (t_div, eps) pair; 4 x 20 = 80 with the defaults."""
    tasks = [(s, spec, t_div, eps, train_cfg, sweep_cfg.widths, sweep_cfg.omega0)
             for t_div in sweep_cfg.t_divs for eps in sweep_cfg.eps_values]
    return _map_tasks(_greedy_task, tasks, jobs)


def sweep_random(s: SnapshotMatrix, spec: PdeSpec, min_n: int, max_n: int,
                 train_cfg: TrainConfig, repetitions: int = 5, base_seed: int = 0,
                 jobs: int = 1, widths=DEFAULT_WIDTHS,
                 omega0: float = DEFAULT_OMEGA0) -> list[ExperimentRecord]:
    """Size-matched random baseline: 11 sizes x repetitions (55 by default).

    Seeds are not chosen by the caller per run but derived from base_seed
    and recorded, so the whole baseline replays exactly.
    """
    sizes = sample_size_grid(min_n, max_n)
    tasks = []
    run = 0
    for size in sizes:
        for _ in range(repetitions):
            tasks.append((s, spec, size, base_seed + run, train_cfg, widths, omega0))
            run += 1
    return _map_tasks(_random_task, tasks, jobs)


def mean_errors_by_size(records: list[ExperimentRecord]) -> dict[int, np.ndarray]:
    """Average relative error across the repetitions of each sample size."""
    by_size: dict[int, list[np.ndarray]] = {}
    for rec in records:
        if rec.size is None:
            continue
        by_size.setdefault(rec.size, []).append(np.asarray(rec.rel_errors))
    return {size: np.nanmean(np.vstack(errs), axis=0)
            for size, errs in sorted(by_size.items())}


# ---------------------------------------------------------------------------
# k-means summaries

@dataclass(frozen=True)
class ClusterSummary:
    centroids: np.ndarray  # (k, 2): (n_samples, rel_error)
    inertia: float
    k: int
    n_init: int


def lloyd(points: np.ndarray, centroids: np.ndarray, max_iter: int = 300):
    """Lloyd iterations from the given centroids until assignments settle.

    Returns (centroids, labels, inertia_history); the history is recorded
    once per assignment step and never increases. An emptied cluster is
    reseeded at the point farthest from its assigned centroid.
    """
    points = np.asarray(points, dtype=float)
    centroids = np.array(centroids, dtype=float)
    labels = None
    history = []
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(points.shape[0]), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(centroids.shape[0]):
            members = points[labels == c]
            if members.shape[0]:
                centroids[c] = members.mean(axis=0)
            else:
                worst = np.argmax(d2[np.arange(points.shape[0]), labels])
                centroids[c] = points[worst]
    return centroids, labels, history


def kmeans(points, k: int, n_init: int = 100, seed: int = 0) -> ClusterSummary:
    """Best of n_init Lloyd runs, each started from k distinct random points."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be an (n, d) array")
    if not 1 <= k <= points.shape[0]:
        raise ValueError(f"k = {k} out of range [1, {points.shape[0]}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        start = points[rng.choice(points.shape[0], k, replace=False)]
        centroids, _, history = lloyd(points, start)
        if best is None or history[-1] < best[1]:
            best = (centroids, history[-1])
    return ClusterSummary(centroids=best[0], inertia=best[1], k=k, n_init=n_init)


def cluster_records(records: list[ExperimentRecord], coef_index: int, k: int = 20,
                    n_init: int = 100, seed: int = 0) -> ClusterSummary:
    """Cluster the (sample count, relative error) pairs of one coefficient."""
    rows = [(rec.n_samples, rec.rel_errors[coef_index]) for rec in records
            if rec.error is None and np.isfinite(rec.rel_errors[coef_index])]
    if not rows:
        raise ValueError(f"no usable records for coefficient {coef_index}")
    return kmeans(np.array(rows, dtype=float), k=k, n_init=n_init, seed=seed)


# ---------------------------------------------------------------------------
# persistence

CSV_FIELDS = ["sampler", "pde", "t_div", "eps_thr", "size", "seed",
              "n_samples", "coef_index", "rel_error", "wall_time_s"]


def export_results(records: list[ExperimentRecord], path, format: str = "csv") -> None:
    """CSV: one row per (record, coefficient). JSON: lossless record dump."""
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            writer.writeheader()
            for rec in records:
                for ci, err in enumerate(rec.rel_errors):
                    writer.writerow({
                        "sampler": rec.sampler, "pde": rec.pde,
                        "t_div": "" if rec.t_div is None else rec.t_div,
                        "eps_thr": "" if rec.eps_thr is None else "%.17g" % rec.eps_thr,
                        "size": "" if rec.size is None else rec.size,
                        "seed": "" if rec.seed is None else rec.seed,
                        "n_samples": rec.n_samples,
                        "coef_index": ci,
                        "rel_error": "%.17g" % err,
                        "wall_time_s": "%.6f" % rec.wall_time_s,
                    })
    elif format == "json":
        payload = [dataclasses.asdict(rec) for rec in records]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown results format {format!r}")


def read_results(path) -> list[ExperimentRecord]:
    """Load a JSON export back into records."""
    with open(path) as fh:
        payload = json.load(fh)
    out = []
    for raw in payload:
        raw["rel_errors"] = tuple(float(v) for v in raw["rel_errors"])
        raw["final_p"] = tuple(float(v) for v in raw["final_p"])
        out.append(ExperimentRecord(**raw))
    return out


def export_plot_data(records: list[ExperimentRecord], path,
                     summaries: dict[int, ClusterSummary] | None = None) -> None:
    """Sample-count vs error series per t_div (plus centroids), as JSON."""
    series: dict = {}
    for rec in records:
        key = f"t_div={rec.t_div}" if rec.t_div is not None else "random"
        entry = series.setdefault(key, {"n_samples": [], "rel_errors": []})
        entry["n_samples"].append(rec.n_samples)
        entry["rel_errors"].append(list(rec.rel_errors))
    payload = {"series": series}
    if summaries:
        payload["centroids"] = {
            str(ci): summary.centroids.tolist() for ci, summary in summaries.items()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
