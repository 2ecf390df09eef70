"""Shifted flow-matching noise schedule on an integer timestep grid.

The noise level at timestep t in {0..N} is

    sigma_t = k * u / (1 + (k - 1) * u),   u = t / N

with shift k > 0. k = 1 is the linear schedule; k > 1 spends more of the
integer grid near sigma = 1. sigma_0 = 0 and sigma_N = 1 exactly.

Corruption pairs a clean sample with unit Gaussian noise:

    x_t = (1 - sigma_t) * x0 + sigma_t * eps

and the regression target for a velocity model is v = eps - x0, so a
predicted velocity converts back to a clean estimate via x_t - sigma_t * v.
These helpers accept plain ndarrays or autodiff Tensors; with a per-sample
timestep array t of shape (B,), sigma broadcasts over all trailing axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class NoiseSchedule:
    num_timesteps: int = 1000
    shift: float = 5.0

    def __post_init__(self):
        if self.num_timesteps < 1:
            raise ContractError(f"num_timesteps must be >= 1, got {self.num_timesteps}")
        if not (self.shift > 0.0) or not np.isfinite(self.shift):
            raise ContractError(f"shift must be a positive finite float, got {self.shift}")


def sigma_frac(schedule: NoiseSchedule, u):
    """Noise level at continuous progress u in [0, 1]."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ContractError("progress u out of [0, 1]")
    k = schedule.shift
    out = k * u / (1.0 + (k - 1.0) * u)
    return out if out.ndim else float(out)


def sigma_at(schedule: NoiseSchedule, t):
    """Noise level at integer timestep t in {0..num_timesteps}.

    t may be a python int or an integer ndarray; the return matches (float or
    float ndarray). Endpoints are exact: sigma_at(s, 0) == 0.0 and
    sigma_at(s, N) == 1.0.
    """
    t = np.asarray(t)
    if not np.issubdtype(t.dtype, np.integer):
        raise ContractError(f"timestep must be integer, got dtype {t.dtype}")
    if np.any(t < 0) or np.any(t > schedule.num_timesteps):
        raise ContractError(
            f"timestep out of range [0, {schedule.num_timesteps}]: {t}"
        )
    return sigma_frac(schedule, t / schedule.num_timesteps)


def _sigma_for(x0, t, schedule: NoiseSchedule):
    """sigma_t shaped to broadcast against x0 (ndarray or Tensor)."""
    sig = sigma_at(schedule, t)
    if np.ndim(sig) == 0:
        return sig
    ndim = x0.ndim if hasattr(x0, "ndim") else np.ndim(x0)
    shape = np.shape(x0)
    if np.shape(sig)[0] != shape[0]:
        raise ContractError(
            f"per-sample t has length {np.shape(sig)[0]}, batch is {shape[0]}"
        )
    return sig.reshape((-1,) + (1,) * (ndim - 1))


def _check_same_shape(a, b, what: str):
    if np.shape(a) != np.shape(b):
        raise ContractError(f"{what}: shapes {np.shape(a)} vs {np.shape(b)} differ")


def corrupt(x0, eps, t, schedule: NoiseSchedule):
    """Noised sample (1 - sigma_t) * x0 + sigma_t * eps.

    Differentiable when x0 or eps is a Tensor. At t = 0 this returns x0
    exactly; at t = num_timesteps it returns eps exactly.
    """
    _check_same_shape(x0, eps, "corrupt(x0, eps)")
    sig = _sigma_for(x0, t, schedule)
    return (1.0 - sig) * x0 + sig * eps


def velocity_target(x0, eps):
    """Flow-matching regression target eps - x0."""
    _check_same_shape(x0, eps, "velocity_target(x0, eps)")
    return eps - x0


def x0_from_velocity(x_t, v, t, schedule: NoiseSchedule):
    """Clean estimate x_t - sigma_t * v; inverts corrupt for exact v."""
    _check_same_shape(x_t, v, "x0_from_velocity(x_t, v)")
    sig = _sigma_for(x_t, t, schedule)
    return x_t - sig * v
