"""Finite-difference trajectory curvature and its summary statistics.

For a path sampled at ascending times 0 = t_0 < ... < t_n = 1 (data end at
t = 0, noise end at t = 1) with states x_i in R^D, the deviation of the
local velocity from the straight chord is measured per interior grid point:

    C(t_i) = (1/D) || (x_i - x_{i-1}) / (t_i - t_{i-1}) - (x_n - x_0) ||^2

for i = 1..n. A path that is a straight line in t scores exactly zero
everywhere. Summary statistics aggregate the fraction of each trajectory's
curvature mass in the high-noise region t >= threshold: mean, standard
error, a percentile-bootstrap confidence interval, and the pooled ratio of
high-band mass over the middle band [0.3, 0.7).
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ContractError
from .fileio import atomic_write_text
from .synthworld import TrajectoryRecord

MID_BAND = (0.3, 0.7)


def curvature_profile(record: TrajectoryRecord) -> tuple[np.ndarray, np.ndarray]:
    """Per-grid-point curvature: times (n,), values (n,), aligned at t_1..t_n."""
    grid, states = record.grid, record.states
    d = states.shape[1]
    chord = states[-1] - states[0]
    dt = np.diff(grid)[:, None]
    vel = np.diff(states, axis=0) / dt
    dev = vel - chord
    values = np.sum(dev * dev, axis=1) / d
    return grid[1:].copy(), values


def temporal_difference_record(record: TrajectoryRecord, frames: int | None = None) -> TrajectoryRecord:
    """Re-expresses states as frame differences before curvature is measured.

    Each state is reshaped to (frames, dim) and replaced by the (frames-1,
    dim) array of consecutive frame deltas, flattened. Isolates how motion
    content (rather than static content) bends along the path.
    """
    frames = frames if frames is not None else record.frames
    if frames is None:
        raise ContractError("temporal difference needs frame metadata (frames per state)")
    if frames < 2:
        raise ContractError("temporal difference needs at least 2 frames")
    d_state = record.states.shape[1]
    if d_state % frames != 0:
        raise ContractError(f"state dim {d_state} not divisible by {frames} frames")
    dim = d_state // frames
    seq = record.states.reshape(len(record.grid), frames, dim)
    diff = np.diff(seq, axis=1).reshape(len(record.grid), (frames - 1) * dim)
    return TrajectoryRecord(grid=record.grid.copy(), states=diff,
                            frames=frames - 1, dim=dim)


def mass_fraction(times: np.ndarray, values: np.ndarray, threshold: float,
                  dt_weighted: bool = False, grid: np.ndarray | None = None) -> float:
    """Fraction of curvature mass at times >= threshold; 0 for an all-zero profile."""
    if times.shape != values.shape:
        raise ContractError("times and values must align")
    w = values
    if dt_weighted:
        if grid is None:
            raise ContractError("dt weighting needs the full grid")
        w = values * np.diff(grid)
    total = float(w.sum())
    if total <= 0.0:
        return 0.0
    return float(w[times >= threshold].sum() / total)


def curvature_stats(records: list[TrajectoryRecord], threshold: float = 0.9,
                    n_boot: int = 10000, rng=None, dt_weighted: bool = False) -> dict:
    """Aggregate high-noise mass statistics over a set of trajectories.

    Returns a dict with keys high_noise_mass_mean, high_noise_mass_sem,
    ci95_lo, ci95_hi (percentile bootstrap over trajectories), high_mid_ratio
    (pooled high-band mass / pooled mid-band mass, None when the mid band is
    empty), n_trajectories and threshold. At least 2 trajectories are
    required for a standard error.
    """
    if len(records) < 2:
        raise ContractError("need at least 2 trajectories for summary statistics")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    fractions = []
    hi_sum = 0.0
    mid_sum = 0.0
    for rec in records:
        times, values = curvature_profile(rec)
        w = values * np.diff(rec.grid) if dt_weighted else values
        fractions.append(mass_fraction(times, values, threshold,
                                       dt_weighted=dt_weighted, grid=rec.grid))
        hi_sum += float(w[times >= threshold].sum())
        mid = (times >= MID_BAND[0]) & (times < MID_BAND[1])
        mid_sum += float(w[mid].sum())
    fractions = np.array(fractions)
    n = len(fractions)
    mean = float(fractions.mean())
    sem = float(fractions.std(ddof=1) / np.sqrt(n))
    idx = rng.integers(0, n, size=(n_boot, n))
    boot_means = fractions[idx].mean(axis=1)
    lo, hi = np.percentile(boot_means, [2.5, 97.5])
    ratio = None if mid_sum <= 0.0 else hi_sum / mid_sum
    return {
        "high_noise_mass_mean": mean,
        "high_noise_mass_sem": sem,
        "ci95_lo": float(lo),
        "ci95_hi": float(hi),
        "high_mid_ratio": None if ratio is None else float(ratio),
        "n_trajectories": n,
        "threshold": float(threshold),
    }


def write_stats_json(path: str, stats: dict) -> None:
    atomic_write_text(path, json.dumps(stats, sort_keys=True, indent=2) + "\n")
