"""Block-autoregressive sampling with per-block step budgets.

The first block may take several denoising steps (it has no context to lean
on); later blocks default to a single step. Intermediate steps move by the
sigma increment between consecutive timesteps (deterministic Euler), and the
final step converts to the clean estimate. Each counted model evaluation is
a denoise pass; the clean-context re-encode that extends the KV cache is
uncounted, so the evaluation budget of a sequence is exactly

    first_block_steps + (num_blocks - 1) * later_block_steps.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError
from .fileio import atomic_write_text, fmt
from .model import GeneratorNet, KVCache
from .schedule import NoiseSchedule, sigma_at, x0_from_velocity
from .seeding import stream_rng
from .synthworld import LatentSequence


@dataclass(frozen=True)
class SampleConfig:
    first_block_steps: int = 4
    later_block_steps: int = 1
    num_sequences: int = 64
    warmup_timesteps: tuple | None = None

    def __post_init__(self):
        if self.first_block_steps < 1 or self.later_block_steps < 1:
            raise ContractError("step counts must be >= 1")
        if self.num_sequences < 1:
            raise ContractError("num_sequences must be >= 1")


def step_schedule(schedule: NoiseSchedule, steps: int) -> list[int]:
    """Descending timestep ladder for a given step budget.

    Evenly spaced on the integer grid from the top: with N = 1000 and 4
    steps this is [1000, 750, 500, 250].
    """
    if steps < 1:
        raise ContractError("steps must be >= 1")
    n = schedule.num_timesteps
    out = [round(n * (steps - j) / steps) for j in range(steps)]
    if len(set(out)) != len(out) or out[-1] < 1:
        raise ContractError(f"step budget {steps} too fine for a {n}-step grid")
    return out


def _validate_steps(steps, schedule: NoiseSchedule) -> list[int]:
    steps = [int(s) for s in steps]
    if not steps:
        raise ContractError("empty step list")
    for s in steps:
        if not (1 <= s <= schedule.num_timesteps):
            raise ContractError(f"timestep {s} outside [1, {schedule.num_timesteps}]")
    if any(a <= b for a, b in zip(steps, steps[1:])):
        raise ContractError(f"timesteps must be strictly descending: {steps}")
    return steps


def denoise_block(net: GeneratorNet, cache: KVCache, noise_block, cond, steps,
                  schedule: NoiseSchedule | None = None):
    """Iteratively denoise one block against the cache, then bank it.

    noise_block is the block state already noised to steps[0] (pure noise
    when steps[0] = num_timesteps). Every step here is a counted denoise
    pass; the cache is extended once at the end with the clean estimate
    re-encoded at t = 0 (uncounted). Returns the clean block Tensor.
    """
    schedule = schedule or net.schedule
    steps = _validate_steps(steps, schedule)
    x = ad.ensure_tensor(noise_block)
    for j, tj in enumerate(steps):
        v = net.forward_block(x, tj, cond, cache, extend=False)
        if j < len(steps) - 1:
            sig_now = sigma_at(schedule, tj)
            sig_next = sigma_at(schedule, steps[j + 1])
            x = x - (sig_now - sig_next) * v
        else:
            x = x0_from_velocity(x, v, tj, schedule)
    net.forward_block(x, 0, cond, cache, extend=True, want_velocity=False)
    return x


def sample_from_noise(net: GeneratorNet, noise: np.ndarray, cond,
                      config: SampleConfig) -> Tensor:
    """Generate sequences from explicit per-block noise (B, n_blocks, bs, d).

    With first_block_steps = later_block_steps = 1 this performs exactly the
    arithmetic of rollout_one_step, bit for bit.
    """
    cfg = net.config
    schedule = net.schedule
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim == 3:
        noise = noise[None]
    if noise.ndim != 4 or noise.shape[2] != cfg.block_size or noise.shape[3] != cfg.dim:
        raise ContractError(
            f"noise must be (B, n_blocks, {cfg.block_size}, {cfg.dim}), got {noise.shape}"
        )
    b, n_blocks = noise.shape[0], noise.shape[1]
    if n_blocks * cfg.block_size > cfg.max_frames:
        raise ContractError("sample longer than max_frames")
    if config.warmup_timesteps is not None:
        first = _validate_steps(config.warmup_timesteps, schedule)
    else:
        first = step_schedule(schedule, config.first_block_steps)
    later = step_schedule(schedule, config.later_block_steps)
    if first[0] != schedule.num_timesteps or later[0] != schedule.num_timesteps:
        raise ContractError("block denoising must start from pure noise (t = N)")
    cache = net.init_cache(b)
    blocks = []
    for j in range(n_blocks):
        steps = first if j == 0 else later
        blocks.append(denoise_block(net, cache, noise[:, j], cond, steps, schedule))
    return ad.concat(blocks, axis=1)


def sample_batch_ffe(net: GeneratorNet, n: int, cond, config: SampleConfig,
                     seed: int) -> np.ndarray:
    """Draw n sequences (n, F, d) with block noise from the sample-noise stream."""
    cfg = net.config
    n_blocks = cfg.max_frames // cfg.block_size
    rng = stream_rng(seed, "sample-noise")
    noise = rng.standard_normal((n, n_blocks, cfg.block_size, cfg.dim))
    with ad.no_grad():
        out = sample_from_noise(net, noise, cond, config)
    return out.data


def sample_ffe(net: GeneratorNet, cond, config: SampleConfig, seed: int) -> LatentSequence:
    """One sequence with the first-block-enhanced step budget."""
    return LatentSequence(sample_batch_ffe(net, 1, cond, config, seed)[0])


# ---------------------------------------------------------------------------
# sequence CSV
# ---------------------------------------------------------------------------


def write_sequences_csv(path: str, seqs: np.ndarray) -> None:
    """Rows seq_id,frame,c0..c{d-1}; one row per frame; %.17g floats."""
    seqs = np.asarray(seqs, dtype=np.float64)
    if seqs.ndim != 3:
        raise ContractError(f"expected (n, frames, dim), got {seqs.shape}")
    n, f, d = seqs.shape
    buf = io.StringIO()
    buf.write(",".join(["seq_id", "frame"] + [f"c{i}" for i in range(d)]) + "\n")
    for sid in range(n):
        for k in range(f):
            row = [str(sid), str(k)] + [fmt(v) for v in seqs[sid, k]]
            buf.write(",".join(row) + "\n")
    atomic_write_text(path, buf.getvalue())


def read_sequences_csv(path: str) -> np.ndarray:
    import csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["seq_id", "frame"]:
            raise ContractError(f"{path}: expected header seq_id,frame,c0,...")
        d = len(header) - 2
        if d < 1 or header[2:] != [f"c{i}" for i in range(d)]:
            raise ContractError(f"{path}: malformed coordinate columns")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ContractError(f"{path}:{line_no}: wrong column count")
            rows.append((int(row[0]), int(row[1]), [float(v) for v in row[2:]]))
    if not rows:
        raise ContractError(f"{path}: no sequence rows")
    by_id: dict[int, list] = {}
    for sid, frame, vals in rows:
        by_id.setdefault(sid, []).append((frame, vals))
    n = len(by_id)
    if sorted(by_id) != list(range(n)):
        raise ContractError(f"{path}: seq_id values must be 0..n-1")
    f = len(by_id[0])
    out = np.empty((n, f, d))
    for sid, items in by_id.items():
        items = sorted(items)
        if [k for k, _ in items] != list(range(f)):
            raise ContractError(f"{path}: sequence {sid} has irregular frames")
        out[sid] = [vals for _, vals in items]
    return out
