"""Distribution and motion metrics for generated sequence sets."""

from __future__ import annotations

import numpy as np
from scipy.stats import wasserstein_distance

from .errors import ContractError


def sliced_wasserstein(set_a: np.ndarray, set_b: np.ndarray,
                       n_projections: int = 128, rng=None) -> float:
    """Mean 1-D Wasserstein distance over random unit projections.

    Inputs are (n, D) point sets (sequences should be flattened first).
    Zero for identical sets; symmetric in its arguments. The projection
    directions are drawn from the provided rng/seed, so a fixed seed gives
    a deterministic estimate.
    """
    a = np.asarray(set_a, dtype=np.float64)
    b = np.asarray(set_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ContractError(f"point sets must be (n, D) with equal D: {a.shape} vs {b.shape}")
    if len(a) < 1 or len(b) < 1:
        raise ContractError("point sets must be non-empty")
    if n_projections < 1:
        raise ContractError("n_projections must be >= 1")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    dirs = rng.standard_normal((n_projections, a.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = a @ dirs.T
    pb = b @ dirs.T
    total = 0.0
    for j in range(n_projections):
        total += wasserstein_distance(pa[:, j], pb[:, j])
    return total / n_projections


def flatten_sequences(seqs: np.ndarray) -> np.ndarray:
    seqs = np.asarray(seqs, dtype=np.float64)
    if seqs.ndim != 3:
        raise ContractError(f"expected (n, frames, dim), got {seqs.shape}")
    return seqs.reshape(len(seqs), -1)


def motion_proxy(seqs: np.ndarray) -> float:
    """Mean per-step displacement norm, normalized by sqrt(dim).

    Averages ||x^k - x^{k-1}|| / sqrt(d) over all sequences and frame
    transitions; a static sequence set scores 0.
    """
    seqs = np.asarray(seqs, dtype=np.float64)
    if seqs.ndim != 3:
        raise ContractError(f"expected (n, frames, dim), got {seqs.shape}")
    n, f, d = seqs.shape
    if f < 2:
        raise ContractError("motion proxy needs at least 2 frames")
    steps = np.linalg.norm(np.diff(seqs, axis=1), axis=2) / np.sqrt(d)
    return float(steps.mean())


def logit_gap_stats(log, window: int) -> tuple[float, float]:
    """Mean and population std of the critic logit gap over the final window.

    `log` is a TrainLog or any object with a column("gap") accessor, or a
    plain array of gap values.
    """
    if hasattr(log, "column"):
        gaps = log.column("gap")
    else:
        gaps = np.asarray(log, dtype=np.float64)
    if window < 1:
        raise ContractError("window must be >= 1")
    if len(gaps) < window:
        raise ContractError(f"log has {len(gaps)} gap entries, window is {window}")
    tail = gaps[-window:]
    return float(tail.mean()), float(tail.std())
