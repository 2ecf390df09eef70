"""Training losses for one-step distillation with an adversarial critic.

Score functions are passed as callables `fn(x_t, t) -> velocity` on plain
ndarrays (per-sample integer t allowed); both the trainable critic and the
closed-form world oracle provide adapters with this signature. Stop-gradient
boundaries are structural: anything that must not receive gradient enters a
loss as detached numpy data, never through the autodiff graph.
"""

from __future__ import annotations

import logging

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError
from .model import CriticNet, GeneratorNet, rollout_one_step
from .schedule import NoiseSchedule, corrupt, velocity_target, x0_from_velocity

log = logging.getLogger(__name__)

DMD_NORM_FLOOR = 1e-8


def _detached(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def fake_score_loss(critic: CriticNet, x_theta, eps: np.ndarray, t, cond,
                    schedule: NoiseSchedule):
    """Critic velocity regression on corrupted generator output.

    x_theta is treated as data (detached on entry): the generator receives
    no gradient from this loss. Returns mean squared error between the
    critic's velocity on corrupt(x_theta, eps, t) and the target eps -
    x_theta; gradient flows into critic parameters only.
    """
    x0 = _detached(x_theta)
    eps = np.asarray(eps, dtype=np.float64)
    x_noisy = corrupt(x0, eps, t, schedule)
    target = velocity_target(x0, eps)
    v, _ = critic.forward(x_noisy, t, cond)
    return ad.mse(v, Tensor(target))


def dmd_generator_loss(x_theta: Tensor, fake_score, real_score, eps: np.ndarray, t,
                       schedule: NoiseSchedule):
    """Distribution-matching gradient injected through a squared surrogate.

    Both scores are evaluated at the same noised sample of (detached)
    x_theta; their clean estimates are differenced, normalized by the mean
    absolute real-score residual n = mean(|x_theta - x0hat_real|) (a
    detached per-batch scalar, floored at 1e-8), and baked into a constant
    target so that

        L = 0.5 * mean((x_theta - (x_theta - delta).detach())^2)

    has gradient delta / count with respect to x_theta and no gradient into
    either score.
    """
    if not isinstance(x_theta, Tensor):
        raise ContractError("x_theta must be a Tensor carrying the generator graph")
    xd = x_theta.data
    eps = np.asarray(eps, dtype=np.float64)
    x_t = corrupt(xd, eps, t, schedule)
    v_fake = np.asarray(fake_score(x_t, t), dtype=np.float64)
    v_real = np.asarray(real_score(x_t, t), dtype=np.float64)
    if v_fake.shape != xd.shape or v_real.shape != xd.shape:
        raise ContractError("score outputs must match x_theta's shape")
    x0_fake = x0_from_velocity(x_t, v_fake, t, schedule)
    x0_real = x0_from_velocity(x_t, v_real, t, schedule)
    norm = float(np.mean(np.abs(xd - x0_real)))
    if norm < DMD_NORM_FLOOR:
        log.warning("DMD normalizer %.3e below floor; clamping to %.0e", norm, DMD_NORM_FLOOR)
        norm = DMD_NORM_FLOOR
    delta = (x0_fake - x0_real) / norm
    target = Tensor(xd - delta)
    diff = x_theta - target
    return 0.5 * ad.tmean(diff * diff)


def adv_generator_loss(logits_fake):
    """Non-saturating logistic generator loss: mean softplus(-logit)."""
    return ad.tmean(ad.softplus(-ad.ensure_tensor(logits_fake)))


def adv_discriminator_loss(logits_real, logits_fake):
    """Logistic discriminator loss: mean softplus(-real) + mean softplus(fake).

    Plain non-relativistic form; no gradient penalties.
    """
    lr = ad.ensure_tensor(logits_real)
    lf = ad.ensure_tensor(logits_fake)
    return ad.tmean(ad.softplus(-lr)) + ad.tmean(ad.softplus(lf))


def forward_kl_surrogate(net: GeneratorNet, x_noise: np.ndarray, x_target: np.ndarray,
                         cond, schedule: NoiseSchedule | None = None):
    """Regression of one-step outputs onto frozen flow endpoints.

    x_noise/x_target are paired (B, F, d) arrays: a pure-noise state and the
    probability-flow endpoint it integrates to. The generator re-generates
    from exactly that noise in one step and is penalized toward the paired
    endpoint. A mode-seeking anchor: it pulls samples toward deterministic
    flow targets and visibly suppresses frame-to-frame motion when weighted
    up.
    """
    x_noise = np.asarray(x_noise, dtype=np.float64)
    x_target = np.asarray(x_target, dtype=np.float64)
    if x_noise.shape != x_target.shape or x_noise.ndim != 3:
        raise ContractError("x_noise and x_target must be matching (B, F, d) arrays")
    cfg = net.config
    b, f, d = x_noise.shape
    if f % cfg.block_size != 0 or d != cfg.dim:
        raise ContractError("pair shape incompatible with the generator")
    blocks = x_noise.reshape(b, f // cfg.block_size, cfg.block_size, d)
    pred = rollout_one_step(net, blocks, cond, schedule)
    return ad.mse(pred, Tensor(x_target))


def consistency_loss(student, student_ema, x_t: np.ndarray, t, dt: float, teacher_step):
    """Consistency-distillation step: match the EMA student across one teacher hop.

    teacher_step(x, t, dt) integrates the probability flow one (coarse)
    Euler step toward data; the EMA student's endpoint prediction there is
    the frozen target for the student's prediction at (x_t, t). With an
    exact endpoint map on an exactly-integrated family the loss is zero.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    tt = np.asarray(t, dtype=np.float64)
    if np.any(tt - dt < -1e-12):
        raise ContractError("teacher step would cross t = 0")
    with ad.no_grad():
        x_prev = np.asarray(teacher_step(x_t, t, dt), dtype=np.float64)
        target = student_ema.forward(x_prev, np.maximum(tt - dt, 0.0)).data
    pred = student.forward(x_t, t)
    return ad.mse(pred, Tensor(target))
