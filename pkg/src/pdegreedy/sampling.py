"""Greedy two-way sample selection on snapshot matrices, plus random baseline."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .linalg import pivoted_qr, svd
from .snapshots import SnapshotMatrix, subdivide_time


@dataclass(frozen=True)
class QdeimConfig:
    """Greedy sampling knobs: time divisions and the rank threshold.

    ``squared_energy`` switches the rank criterion to sums of squared
    singular values; the default follows the plain-sum convention.
    """

    t_div: int = 1
    eps_thr: float = 1e-6
    squared_energy: bool = False

    def __post_init__(self):
        if self.t_div < 1:
            raise ValueError(f"t_div must be >= 1, got {self.t_div}")
        if not 0.0 < self.eps_thr < 1.0:
            raise ValueError(f"eps_thr must lie in (0, 1), got {self.eps_thr}")


@dataclass
class SampleSet:
    """Selected (t, x, u) triples with their provenance.

    Coordinates are the normalized axes of the parent snapshot; the
    index arrays point back into the snapshot grid.
    """

    t_norm: np.ndarray
    x_norm: np.ndarray
    u: np.ndarray
    window_id: np.ndarray
    x_idx: np.ndarray
    t_idx: np.ndarray
    spatial_pivots: list[list[int]] = field(default_factory=list)
    temporal_pivots: list[list[int]] = field(default_factory=list)
    source: str = "greedy"
    seed: int | None = None

    def __post_init__(self):
        lengths = {arr.shape[0] for arr in
                   (self.t_norm, self.x_norm, self.u, self.window_id,
                    self.x_idx, self.t_idx)}
        if len(lengths) != 1:
            raise ValueError(f"inconsistent point array lengths: {lengths}")
        pairs = set(zip(self.t_idx.tolist(), self.x_idx.tolist()))
        if len(pairs) != self.t_norm.shape[0]:
            raise ValueError("duplicate (t, x) samples")

    def __len__(self) -> int:
        return self.t_norm.shape[0]

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["window", "t_index", "x_index", "t", "x", "u"])
            for i in range(len(self)):
                writer.writerow([int(self.window_id[i]), int(self.t_idx[i]),
                                 int(self.x_idx[i]), "%.17g" % self.t_norm[i],
                                 "%.17g" % self.x_norm[i], "%.17g" % self.u[i]])


def select_rank(sigma, eps_thr: float, squared_energy: bool = False) -> int:
    """Smallest r whose retained-energy deficit drops below eps_thr.

    The deficit is 1 - sum(sigma[:r]) / sum(sigma); r = len(sigma) always
    satisfies the bound since the ratio reaches one.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 1 or sigma.size == 0:
        raise ValueError("sigma must be a non-empty 1-d array")
    if np.any(sigma < 0) or np.any(np.diff(sigma) > 0):
        raise ValueError("singular values must be non-negative and non-increasing")
    if squared_energy:
        sigma = sigma ** 2
    total = sigma.sum()
    if total == 0.0:
        raise ValueError("all-zero spectrum has no meaningful rank")
    deficit = 1.0 - np.cumsum(sigma) / total
    deficit[-1] = 0.0  # exact in real arithmetic; cumsum rounding must not flip it
    return int(np.argmax(deficit < eps_thr)) + 1


def qdeim_window(u_window, eps_thr: float, squared_energy: bool = False):
    """Spatial and temporal pivot indices for one snapshot block.

    Ranks the block by its singular values, then pivots the transposed
    left and right singular-vector blocks so the chosen rows index space
    and the chosen columns index time.
    """
    u_window = np.asarray(u_window, dtype=float)
    if u_window.size == 0:
        raise ValueError("empty window")
    factors = svd(u_window)
    r = select_rank(factors.singular_values, eps_thr, squared_energy)
    z_r = factors.left[:, :r]      # (n, r)
    y_r_t = factors.right_t[:r, :]  # (r, m)
    spatial = pivoted_qr(z_r.T).pivots[:r]
    temporal = pivoted_qr(y_r_t).pivots[:r]
    return [int(i) for i in spatial], [int(j) for j in temporal]


def qdeim_sample(s: SnapshotMatrix, cfg: QdeimConfig) -> SampleSet:
    """Greedy sample set: per window, the spatial x temporal pivot grid."""
    t_norm, x_norm, u_vals = [], [], []
    window_id, x_idx, t_idx = [], [], []
    spatial_pivots, temporal_pivots = [], []
    for wid, window in enumerate(subdivide_time(s, cfg.t_div)):
        spatial, temporal_local = qdeim_window(window.u, cfg.eps_thr, cfg.squared_energy)
        temporal = [window.col_start + j for j in temporal_local]
        spatial_pivots.append(spatial)
        temporal_pivots.append(temporal)
        for i in spatial:
            for j in temporal:
                t_norm.append(s.t_norm[j])
                x_norm.append(s.x_norm[i])
                u_vals.append(s.u[i, j])
                window_id.append(wid)
                x_idx.append(i)
                t_idx.append(j)
    return SampleSet(
        t_norm=np.array(t_norm), x_norm=np.array(x_norm), u=np.array(u_vals),
        window_id=np.array(window_id, dtype=int),
        x_idx=np.array(x_idx, dtype=int), t_idx=np.array(t_idx, dtype=int),
        spatial_pivots=spatial_pivots, temporal_pivots=temporal_pivots,
        source="greedy")


def random_sample(s: SnapshotMatrix, size: int, seed: int) -> SampleSet:
    """Uniform draw of `size` distinct grid points, reproducible per seed."""
    total = s.n * s.m
    if not 1 <= size <= total:
        raise ValueError(f"size {size} out of range [1, {total}]")
    rng = np.random.default_rng(seed)
    flat = rng.choice(total, size=size, replace=False)
    x_idx, t_idx = np.unravel_index(flat, (s.n, s.m))
    return SampleSet(
        t_norm=s.t_norm[t_idx], x_norm=s.x_norm[x_idx], u=s.u[x_idx, t_idx],
        window_id=np.zeros(size, dtype=int),
        x_idx=np.asarray(x_idx, dtype=int), t_idx=np.asarray(t_idx, dtype=int),
        spatial_pivots=[], temporal_pivots=[], source="random", seed=seed)


def sample_size_grid(min_n: int, max_n: int) -> list[int]:
    """Eleven integer sizes from min_n to max_n inclusive, linearly spaced.

    Values are rounded, then deduplicated so the result is strictly
    increasing; the endpoints survive exactly.
    """
    if min_n >= max_n:
        raise ValueError(f"need min_n < max_n, got {min_n} >= {max_n}")
    raw = np.linspace(min_n, max_n, 11)
    sizes: list[int] = []
    for v in np.rint(raw).astype(int):
        if not sizes or v > sizes[-1]:
            sizes.append(int(v))
    return sizes
