"""Alternating distillation loop: one critic update every iteration, one
generator update every K-th iteration (the generator update runs first on
its own minibatch when both fire).

Per iteration:

  * generator (when i mod K == 0): fresh rollouts with gradient, pushed by
    the distribution-matching loss, the adversarial generator loss, and
    optionally the forward-KL anchor; AdamW step on generator params only.
  * critic (every i): fresh detached rollouts; velocity regression toward
    the corrupted generator outputs plus the logistic discriminator loss
    against the comparison batch (world data, or a 2-step rollout of a
    frozen snapshot of the generator in self-distilled mode); AdamW step on
    critic params only.

Randomness discipline: generator-side draws come from the "rollout" stream,
critic-side draws from "critic-noise", comparison-data draws from "world".
Paired ablation runs on the same root seed therefore see identical draws
everywhere except the ablated component. Any non-finite loss or gradient
aborts with a diagnostic dump.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, TrainingDiverged
from .fileio import atomic_write_text, fmt
from .model import CriticNet, GeneratorNet, ModelConfig, rollout_one_step, save_checkpoint
from .objectives import (adv_discriminator_loss, adv_generator_loss, consistency_loss,
                         dmd_generator_loss, fake_score_loss, forward_kl_surrogate)
from .sampler import SampleConfig, sample_from_noise
from .schedule import corrupt
from .seeding import StreamSet, stream_rng
from .synthworld import World, WorldConfig, make_ode_pairs, sample_batch

DISCRIMINATOR_TARGETS = ("real-data", "self-distilled")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 300
    batch_size: int = 16
    k_interval: int = 5
    lambda_g: float = 0.03
    lambda_d: float = 0.03
    lambda_fkl: float = 0.0
    lr_generator: float = 1e-3
    lr_critic: float = 1e-3
    beta1: float = 0.0
    beta2: float = 0.999
    weight_decay: float = 0.01
    ema_decay: float = 0.99
    ema_start: int = 50
    t_min: int = 20
    t_max: int = 980
    discriminator_target: str = "real-data"
    init_steps: int = 200
    init_pairs: int = 256
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1 or self.k_interval < 1:
            raise ContractError("iterations, batch_size, k_interval must be >= 1")
        if self.discriminator_target not in DISCRIMINATOR_TARGETS:
            raise ContractError(
                f"discriminator_target must be one of {DISCRIMINATOR_TARGETS}"
            )
        if not (0 <= self.t_min <= self.t_max):
            raise ContractError("need 0 <= t_min <= t_max")
        if not (0.0 <= self.ema_decay < 1.0):
            raise ContractError("ema_decay must be in [0, 1)")


def paper_hparams(cfg: TrainConfig) -> TrainConfig:
    """Published full-scale optimizer settings (tiny lr; slow at desk scale)."""
    return TrainConfig(**{**_asdict(cfg), "lr_generator": 1e-5, "lr_critic": 1e-5})


def _asdict(cfg) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


# ---------------------------------------------------------------------------
# optimizer / ema
# ---------------------------------------------------------------------------


class AdamW:
    """Decoupled weight decay Adam over a dict of parameter Tensors."""

    def __init__(self, params: dict[str, Tensor], lr: float, beta1: float = 0.0,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.01):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = beta1, beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            m = self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            v = self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data = p.data - self.lr * (update + self.weight_decay * p.data)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


def ema_update(ema_params: dict[str, np.ndarray], params: dict,
               decay: float) -> dict[str, np.ndarray]:
    """In-place exponential moving average: ema <- decay*ema + (1-decay)*p."""
    if set(ema_params) != set(params):
        raise ContractError("EMA/parameter name sets differ")
    for k, p in params.items():
        arr = p.data if isinstance(p, Tensor) else np.asarray(p)
        if ema_params[k].shape != arr.shape:
            raise ContractError(f"EMA shape mismatch for {k}")
        ema_params[k] = decay * ema_params[k] + (1.0 - decay) * arr
    return ema_params


def global_grad_norm(params: dict[str, Tensor]) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# training log
# ---------------------------------------------------------------------------

LOG_COLUMNS = ("iter", "L_fake", "L_D_adv", "L_DMD", "L_G_adv", "l_real", "l_fake",
               "gap", "gnorm_G", "gnorm_C", "wall_ms")


@dataclass
class TrainLogRow:
    iter: int
    L_fake: float | None = None
    L_D_adv: float | None = None
    L_DMD: float | None = None
    L_G_adv: float | None = None
    l_real: float | None = None
    l_fake: float | None = None
    gap: float | None = None
    gnorm_G: float | None = None
    gnorm_C: float | None = None
    wall_ms: float | None = None


@dataclass
class TrainLog:
    rows: list[TrainLogRow] = field(default_factory=list)

    def append(self, row: TrainLogRow):
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        """Values of one column with None rows dropped."""
        if name not in LOG_COLUMNS:
            raise ContractError(f"unknown log column {name!r}")
        vals = [getattr(r, name) for r in self.rows]
        return np.array([v for v in vals if v is not None], dtype=np.float64)

    def generator_iterations(self) -> list[int]:
        return [r.iter for r in self.rows if r.L_DMD is not None]

    def to_csv(self, include_timing: bool = False) -> str:
        buf = io.StringIO()
        buf.write(",".join(LOG_COLUMNS) + "\n")
        for r in self.rows:
            cells = [str(r.iter)]
            for name in LOG_COLUMNS[1:]:
                v = getattr(r, name)
                if name == "wall_ms" and not include_timing:
                    v = None
                cells.append("" if v is None else fmt(v))
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def write_csv(self, path: str, include_timing: bool = False) -> None:
        atomic_write_text(path, self.to_csv(include_timing))

    @classmethod
    def from_csv(cls, path: str) -> "TrainLog":
        import csv

        log = cls()
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(header) != LOG_COLUMNS:
                raise ContractError(f"{path}: unexpected training-log header")
            for line_no, row in enumerate(reader, start=2):
                if len(row) != len(LOG_COLUMNS):
                    raise ContractError(f"{path}:{line_no}: wrong column count")
                vals = {"iter": int(row[0])}
                for name, cell in zip(LOG_COLUMNS[1:], row[1:]):
                    vals[name] = None if cell == "" else float(cell)
                log.append(TrainLogRow(**vals))
        return log


# ---------------------------------------------------------------------------
# trainer
# ---------------------------------------------------------------------------


class Trainer:
    def __init__(self, world_config: WorldConfig, model_config: ModelConfig,
                 train_config: TrainConfig, seed: int):
        if model_config.dim != world_config.dim:
            raise ContractError("model dim must match world dim")
        if world_config.frames > model_config.max_frames:
            raise ContractError("world frames exceed model max_frames")
        if world_config.frames % model_config.block_size != 0:
            raise ContractError("world frames must be a multiple of block_size")
        self.world_config = world_config
        self.world = World(world_config)
        self.model_config = model_config
        self.cfg = train_config
        self.seed = int(seed)
        self.schedule = model_config.schedule
        self.streams = StreamSet(seed)
        self.gen = GeneratorNet(model_config, self.streams.get("init-generator").gen)
        self.critic = CriticNet(model_config, self.streams.get("init-critic").gen)
        self.opt_g = AdamW(self.gen.params, train_config.lr_generator,
                           train_config.beta1, train_config.beta2,
                           weight_decay=train_config.weight_decay)
        self.opt_c = AdamW(self.critic.params, train_config.lr_critic,
                           train_config.beta1, train_config.beta2,
                           weight_decay=train_config.weight_decay)
        self.ema = self.gen.param_arrays()
        self.real_score = self.world.velocity_fn(self.schedule)
        self.log = TrainLog()
        self.pairs: tuple[np.ndarray, np.ndarray] | None = None
        self._init_done = False
        self.n_blocks = world_config.frames // model_config.block_size

    # -- helpers -------------------------------------------------------------

    def _cond(self, batch: int) -> np.ndarray:
        return np.zeros(batch, dtype=np.int64)

    def _rollout_noise(self, stream, batch: int) -> np.ndarray:
        mc = self.model_config
        return stream.standard_normal((batch, self.n_blocks, mc.block_size, mc.dim))

    def _assert_finite(self, i: int, name: str, loss_val: float, extra: dict):
        if np.isfinite(loss_val):
            return
        dump = {"iteration": i, "loss": name, "value": float(loss_val)}
        dump.update(extra)
        raise TrainingDiverged(
            f"non-finite {name} ({loss_val}) at iteration {i}", dump
        )

    def _comparison_batch(self, batch: int) -> np.ndarray:
        """The batch the discriminator treats as real."""
        ws = self.streams.get("world")
        if self.cfg.discriminator_target == "real-data":
            ws.draws += 1
            return sample_batch(self.world_config, batch, ws.gen)
        # self-distilled: 2-step rollout of the frozen current generator
        noise = self._rollout_noise(ws, batch)
        with ad.no_grad():
            out = sample_from_noise(
                self.gen, noise, self._cond(batch),
                SampleConfig(first_block_steps=2, later_block_steps=2),
            )
        return out.data

    # -- stages --------------------------------------------------------------

    def ode_init(self):
        """Pre-fit the generator by regression onto flow (noise, endpoint) pairs."""
        if self._init_done:
            return
        ws = self.streams.get("world")
        ws.draws += 1
        self.pairs = make_ode_pairs(self.world_config, self.schedule,
                                    self.cfg.init_pairs, ws.gen)
        rs = self.streams.get("rollout")
        x_noise, x_target = self.pairs
        mc = self.model_config
        b = self.cfg.batch_size
        for _ in range(self.cfg.init_steps):
            idx = rs.choice(len(x_noise), size=b)
            blocks = x_noise[idx].reshape(b, self.n_blocks, mc.block_size, mc.dim)
            pred = rollout_one_step(self.gen, blocks, self._cond(b), self.schedule)
            loss = ad.mse(pred, Tensor(x_target[idx]))
            self.gen.zero_grad()
            loss.backward()
            self.opt_g.step()
            self.gen.zero_grad()
        self.ema = self.gen.param_arrays()
        self._init_done = True

    def _generator_update(self, i: int, row: TrainLogRow):
        cfg, mc = self.cfg, self.model_config
        rs = self.streams.get("rollout")
        b = cfg.batch_size
        cond = self._cond(b)
        noise = self._rollout_noise(rs, b)
        x_theta = rollout_one_step(self.gen, noise, cond, self.schedule)

        t_dmd = rs.integers(cfg.t_min, cfg.t_max + 1, size=b)
        eps_dmd = rs.standard_normal(x_theta.shape)
        loss_dmd = dmd_generator_loss(
            x_theta, self.critic.velocity_fn(cond), self.real_score,
            eps_dmd, t_dmd, self.schedule,
        )

        t_adv = rs.integers(cfg.t_min, cfg.t_max + 1, size=b)
        eps_adv = rs.standard_normal(x_theta.shape)
        x_noisy = corrupt(x_theta, Tensor(eps_adv), t_adv, self.schedule)
        _, logits_fake = self.critic.forward(x_noisy, t_adv, cond)
        loss_adv = adv_generator_loss(logits_fake)

        total = loss_dmd + cfg.lambda_g * loss_adv
        # index draw happens regardless of the flag so paired ablation runs
        # consume identical rollout-stream sequences
        idx = rs.choice(len(self.pairs[0]), size=b)
        if cfg.lambda_fkl != 0.0:
            loss_fkl = forward_kl_surrogate(
                self.gen, self.pairs[0][idx], self.pairs[1][idx], cond, self.schedule
            )
            total = total + cfg.lambda_fkl * loss_fkl

        self.gen.zero_grad()
        self.critic.zero_grad()
        total.backward()
        gnorm = global_grad_norm(self.gen.params)
        self._assert_finite(i, "generator loss", total.item(), {
            "L_DMD": loss_dmd.item(), "L_G_adv": loss_adv.item(), "gnorm_G": gnorm,
        })
        self._assert_finite(i, "generator grad norm", gnorm, {"total": total.item()})
        self.opt_g.step()
        self.gen.zero_grad()
        self.critic.zero_grad()  # adversarial path deposits critic grads; discard

        row.L_DMD = loss_dmd.item()
        row.L_G_adv = loss_adv.item()
        row.gnorm_G = gnorm

    def _critic_update(self, i: int, row: TrainLogRow):
        cfg = self.cfg
        cs = self.streams.get("critic-noise")
        b = cfg.batch_size
        cond = self._cond(b)
        noise = self._rollout_noise(cs, b)
        with ad.no_grad():
            x_fake = rollout_one_step(self.gen, noise, cond, self.schedule).data
        x_real = self._comparison_batch(b)

        t_den = cs.integers(cfg.t_min, cfg.t_max + 1, size=b)
        eps_den = cs.standard_normal(x_fake.shape)
        loss_fake = fake_score_loss(self.critic, x_fake, eps_den, t_den, cond,
                                    self.schedule)

        t_adv = cs.integers(cfg.t_min, cfg.t_max + 1, size=b)
        eps_r = cs.standard_normal(x_real.shape)
        eps_f = cs.standard_normal(x_fake.shape)
        x_r_noisy = corrupt(x_real, eps_r, t_adv, self.schedule)
        x_f_noisy = corrupt(x_fake, eps_f, t_adv, self.schedule)
        xcat = np.concatenate([x_r_noisy, x_f_noisy], axis=0)
        tcat = np.concatenate([t_adv, t_adv])
        _, logits = self.critic.forward(xcat, tcat, self._cond(2 * b))
        logits_real = logits[:b]
        logits_fake = logits[b:]
        loss_adv = adv_discriminator_loss(logits_real, logits_fake)

        total = loss_fake + cfg.lambda_d * loss_adv
        self.critic.zero_grad()
        total.backward()
        gnorm = global_grad_norm(self.critic.params)
        self._assert_finite(i, "critic loss", total.item(), {
            "L_fake": loss_fake.item(), "L_D_adv": loss_adv.item(), "gnorm_C": gnorm,
        })
        self._assert_finite(i, "critic grad norm", gnorm, {"total": total.item()})
        self.opt_c.step()
        self.critic.zero_grad()

        row.L_fake = loss_fake.item()
        row.L_D_adv = loss_adv.item()
        row.l_real = float(np.mean(logits_real.data))
        row.l_fake = float(np.mean(logits_fake.data))
        row.gap = row.l_real - row.l_fake
        row.gnorm_C = gnorm

    def train_step(self, i: int) -> TrainLogRow:
        """One iteration: generator first when i mod K == 0, then the critic."""
        row = TrainLogRow(iter=i)
        if i % self.cfg.k_interval == 0:
            self._generator_update(i, row)
        self._critic_update(i, row)
        if i > self.cfg.ema_start:
            ema_update(self.ema, self.gen.params, self.cfg.ema_decay)
        else:
            self.ema = self.gen.param_arrays()
        return row

    def run(self, log_path: str | None = None, ckpt_path: str | None = None,
            ckpt_ema_path: str | None = None, timing: bool = False) -> TrainLog:
        self.ode_init()
        for i in range(self.cfg.iterations):
            t0 = time.perf_counter()
            row = self.train_step(i)
            row.wall_ms = (time.perf_counter() - t0) * 1000.0
            self.log.append(row)
            if (self.cfg.checkpoint_every > 0 and ckpt_path
                    and (i + 1) % self.cfg.checkpoint_every == 0
                    and (i + 1) < self.cfg.iterations):
                save_checkpoint(_suffixed(ckpt_path, i + 1), self.gen, "generator")
        if ckpt_path:
            save_checkpoint(ckpt_path, self.gen, "generator")
        if ckpt_ema_path:
            save_checkpoint(ckpt_ema_path, self.gen, "generator",
                            params_override=self.ema)
        if log_path:
            self.log.write_csv(log_path, include_timing=timing)
        return self.log


def _suffixed(path: str, it: int) -> str:
    stem, dot, ext = path.rpartition(".")
    if not dot:
        return f"{path}.iter{it}"
    return f"{stem}.iter{it}.{ext}"


# ---------------------------------------------------------------------------
# consistency-distillation baseline (endpoint student on a flow family)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyConfig:
    iterations: int = 1500
    batch_size: int = 128
    grid_steps: int = 8
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    ema_decay: float = 0.95
    width: int = 64

    def __post_init__(self):
        if self.grid_steps < 2:
            raise ContractError("grid_steps must be >= 2")
        if self.iterations < 1 or self.batch_size < 1:
            raise ContractError("iterations and batch_size must be >= 1")
        if not (0.0 <= self.ema_decay < 1.0):
            raise ContractError("ema_decay must be in [0, 1)")


def train_consistency_student(family, config: ConsistencyConfig, seed: int) -> "EndpointNet":
    """Distill an endpoint map against the family's one-hop teacher.

    Times are drawn uniformly from [1/grid_steps, 1]; each update matches
    the student at (x_t, t) to the frozen EMA student at the teacher's
    one-hop landing point. Whatever error the coarse teacher hop makes,
    especially across a mixing ramp narrower than the hop, is inherited by
    the student at the times above it. Returns the EMA student.
    """
    from .model import EndpointConfig, EndpointNet

    streams = StreamSet(seed)
    ecfg = EndpointConfig(dim=family.dim, width=config.width)
    net = EndpointNet(ecfg, streams.get("init-generator").gen)
    ema_net = EndpointNet(ecfg, streams.get("init-critic").gen)
    ema = net.param_arrays()
    ema_net.load_param_arrays(ema)
    opt = AdamW(net.params, config.lr, config.beta1, config.beta2, weight_decay=0.0)
    dt = 1.0 / config.grid_steps
    roll = streams.get("rollout")
    for _ in range(config.iterations):
        roll.draws += 1
        t = dt + (1.0 - dt) * roll.gen.uniform(size=config.batch_size)
        x_t, _ = family.sample_states(config.batch_size, t, roll.gen)
        loss = consistency_loss(net, ema_net, x_t, t, dt, family.teacher_step)
        if not np.isfinite(loss.data):
            raise TrainingDiverged("non-finite consistency loss",
                                   {"loss": float(loss.data)})
        loss.backward()
        opt.step()
        net.zero_grad()
        ema_update(ema, net.params, config.ema_decay)
        ema_net.load_param_arrays(ema)
    return ema_net


def endpoint_sample(net, family, x1: np.ndarray, anchor_times=()) -> np.ndarray:
    """Few-hop endpoint prediction starting from states at t=1.

    Each anchor re-corrupts the current clean estimate to the anchor time
    along the implied-noise line (the deterministic analogue of re-noising)
    and re-queries the student there. Empty anchors = a single direct jump.
    """
    x = np.asarray(x1, dtype=np.float64)
    prev = None
    for a in anchor_times:
        if not (0.0 < a < 1.0):
            raise ContractError("anchor times must be inside (0, 1)")
        if prev is not None and a >= prev:
            raise ContractError("anchor times must be strictly decreasing")
        prev = a
    t_cur = 1.0
    with ad.no_grad():
        for t_m in anchor_times:
            x0_hat = net.forward(x, t_cur).data
            a_cur, b_cur = family.anchor_coeffs(t_cur)
            a_m, b_m = family.anchor_coeffs(t_m)
            eps_hat = (x - a_cur * x0_hat) / b_cur
            x = a_m * x0_hat + b_m * eps_hat
            t_cur = t_m
        return net.forward(x, t_cur).data


def half_mix_time(family) -> float:
    """Anchor where the family's mixing level crosses one half."""
    from scipy.optimize import brentq

    return float(brentq(lambda t: float(family.mix(t)) - 0.5, 1e-9, 1.0 - 1e-9))


def endpoint_error_medians(net, family, n_points: int = 200, seed: int = 0,
                           anchor: float | None = None,
                           oracle_steps: int = 4000) -> tuple[float, float]:
    """Median 1-hop and 2-hop endpoint errors against fine-grid integration.

    The default 2-hop anchor is the half-mixing time, splitting the noise
    traversal evenly between the two student queries.
    """
    from .synthworld import integrate_bend

    if anchor is None:
        anchor = half_mix_time(family)
    rng = stream_rng(seed, "sample-noise")
    x1 = rng.standard_normal((n_points, family.dim))
    ref = integrate_bend(family, x1, oracle_steps)
    e1 = np.linalg.norm(endpoint_sample(net, family, x1) - ref, axis=1)
    e2 = np.linalg.norm(endpoint_sample(net, family, x1, (anchor,)) - ref, axis=1)
    return float(np.median(e1)), float(np.median(e2))
