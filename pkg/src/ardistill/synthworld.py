"""Synthetic latent-sequence worlds with closed-form score oracles.

A world is a linear-Gaussian state-space model over F frames of dimension d:

    x^1 ~ sum_j w_j N(mu_j, s0^2 I)          (mode mixture)
    x^k = A x^{k-1} + b + w_k,  w_k ~ N(0, q^2 I)

The flattened sequence (F*d,) is then a Gaussian mixture whose moments are
available in closed form, which makes the exact posterior mean under the
corruption x_t = (1-sigma) x0 + sigma eps, and hence the exact flow-matching
velocity, computable for any noise level. That analytic velocity is the
frozen "real score" the distillation losses regress against, and it also
drives a reference probability-flow integrator for trajectory studies.

Worlds are deliberately tiny (a few frames, a few dimensions) so every
experiment here runs in seconds on a CPU.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .fileio import atomic_write_text, fmt
from .schedule import NoiseSchedule, sigma_frac

_LOG2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------------------
# configs and data containers
# ---------------------------------------------------------------------------


def rotation_matrix(dim: int, angle: float, contraction: float = 1.0) -> np.ndarray:
    """Block-diagonal Givens rotation on coordinate pairs, scaled by contraction.

    Odd trailing dimension is left unrotated (pure contraction).
    """
    a = np.eye(dim)
    c, s = np.cos(angle), np.sin(angle)
    for i in range(0, dim - 1, 2):
        a[i, i] = c
        a[i, i + 1] = -s
        a[i + 1, i] = s
        a[i + 1, i + 1] = c
    return contraction * a


@dataclass
class WorldConfig:
    """Parameters of one latent-sequence world.

    init_means has shape (n_modes, dim); transition must have spectral
    radius < 1 so long rollouts stay bounded. init_scale and process_noise
    may be zero (degenerate point-mass worlds are valid and useful as exact
    fixtures).
    """

    dim: int
    frames: int
    init_means: np.ndarray
    init_scale: float
    transition: np.ndarray
    drift: np.ndarray
    process_noise: float
    mode_weights: np.ndarray

    def __post_init__(self):
        self.init_means = np.atleast_2d(np.asarray(self.init_means, dtype=np.float64))
        self.transition = np.asarray(self.transition, dtype=np.float64)
        self.drift = np.asarray(self.drift, dtype=np.float64)
        self.mode_weights = np.asarray(self.mode_weights, dtype=np.float64)
        if self.dim < 1 or self.frames < 1:
            raise ContractError("dim and frames must be >= 1")
        if self.init_means.shape[1] != self.dim:
            raise ContractError(
                f"init_means has dim {self.init_means.shape[1]}, expected {self.dim}"
            )
        if self.transition.shape != (self.dim, self.dim):
            raise ContractError("transition must be (dim, dim)")
        if self.drift.shape != (self.dim,):
            raise ContractError("drift must be (dim,)")
        if self.init_scale < 0.0 or self.process_noise < 0.0:
            raise ContractError("scales must be non-negative")
        if self.mode_weights.shape != (self.init_means.shape[0],):
            raise ContractError("mode_weights must match the number of modes")
        if np.any(self.mode_weights < 0) or abs(self.mode_weights.sum() - 1.0) > 1e-9:
            raise ContractError("mode_weights must be non-negative and sum to 1")
        rho = np.max(np.abs(np.linalg.eigvals(self.transition)))
        if rho >= 1.0:
            raise ContractError(f"transition spectral radius {rho:.4f} must be < 1")

    @property
    def n_modes(self) -> int:
        return self.init_means.shape[0]


def gauss_ssm_world(dim: int = 4, frames: int = 8, init_scale: float = 1.0,
                    process_noise: float = 0.35, contraction: float = 0.95,
                    angle: float = 0.4, drift: float = 0.0) -> WorldConfig:
    """Unimodal world: single Gaussian initial mode, rotating contraction."""
    mean = np.linspace(1.0, -1.0, dim) if dim > 1 else np.array([1.0])
    return WorldConfig(
        dim=dim,
        frames=frames,
        init_means=mean[None, :],
        init_scale=init_scale,
        transition=rotation_matrix(dim, angle, contraction),
        drift=np.full(dim, drift),
        process_noise=process_noise,
        mode_weights=np.array([1.0]),
    )


def bimodal_ssm_world(dim: int = 4, frames: int = 8, separation: float = 3.0,
                      init_scale: float = 0.5, process_noise: float = 0.25,
                      contraction: float = 0.95, angle: float = 0.4,
                      drift: float = 0.0) -> WorldConfig:
    """Two symmetric initial modes separated along the all-ones direction."""
    u = np.ones(dim) / np.sqrt(dim)
    half = 0.5 * separation * u
    return WorldConfig(
        dim=dim,
        frames=frames,
        init_means=np.stack([half, -half]),
        init_scale=init_scale,
        transition=rotation_matrix(dim, angle, contraction),
        drift=np.full(dim, drift),
        process_noise=process_noise,
        mode_weights=np.array([0.5, 0.5]),
    )


@dataclass
class LatentSequence:
    """One sequence of F frames, each a d-vector."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ContractError(f"sequence must be (frames, dim), got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ContractError("sequence contains non-finite values")

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_batch(config: WorldConfig, n: int, rng) -> np.ndarray:
    """Draw n sequences, returned as (n, frames, dim)."""
    rng = _as_rng(rng)
    modes = rng.choice(config.n_modes, size=n, p=config.mode_weights)
    out = np.empty((n, config.frames, config.dim))
    out[:, 0] = config.init_means[modes] + config.init_scale * rng.standard_normal(
        (n, config.dim)
    )
    for k in range(1, config.frames):
        noise = rng.standard_normal((n, config.dim))
        out[:, k] = out[:, k - 1] @ config.transition.T + config.drift
        out[:, k] += config.process_noise * noise
    return out


def sample_sequence(config: WorldConfig, rng) -> LatentSequence:
    """Draw one sequence (see sample_batch for the generative process)."""
    return LatentSequence(sample_batch(config, 1, rng)[0])


# ---------------------------------------------------------------------------
# closed-form joint moments and posterior oracle
# ---------------------------------------------------------------------------


class World:
    """Precomputed flattened moments of a WorldConfig plus posterior oracles.

    The flattened sequence x0 in R^{F*d} is a mixture of Gaussians sharing
    one covariance. Under x_t = (1-sigma) x0 + sigma eps the posterior mean
    of x0 given x_t is available per mode; mixture responsibilities weight
    the per-mode means. Everything is done in the eigenbasis of the shared
    covariance so per-sample noise levels are cheap.
    """

    def __init__(self, config: WorldConfig):
        self.config = config
        f, d, m = config.frames, config.dim, config.n_modes
        self.flat_dim = f * d

        means = np.empty((m, f, d))
        means[:, 0] = config.init_means
        for k in range(1, f):
            means[:, k] = means[:, k - 1] @ config.transition.T + config.drift
        self.means = means.reshape(m, self.flat_dim)

        # Block covariance: P[k,k] recursion, cross blocks via powers of A.
        a = config.transition
        diag_blocks = [config.init_scale**2 * np.eye(d)]
        for _ in range(1, f):
            diag_blocks.append(a @ diag_blocks[-1] @ a.T + config.process_noise**2 * np.eye(d))
        cov = np.zeros((self.flat_dim, self.flat_dim))
        for k in range(f):
            cov[k * d:(k + 1) * d, k * d:(k + 1) * d] = diag_blocks[k]
            ap = np.eye(d)
            for l in range(k + 1, f):
                ap = a @ ap
                blk = diag_blocks[k] @ ap.T
                cov[k * d:(k + 1) * d, l * d:(l + 1) * d] = blk
                cov[l * d:(l + 1) * d, k * d:(k + 1) * d] = blk.T
        self.cov = 0.5 * (cov + cov.T)

        lam, u = np.linalg.eigh(self.cov)
        self.eigvals = np.maximum(lam, 0.0)
        self.eigvecs = u
        self.log_weights = np.log(np.maximum(config.mode_weights, 1e-300))

    # -- flat-space oracles --------------------------------------------------

    def _check_flat(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        if x2.ndim != 2 or x2.shape[1] != self.flat_dim:
            raise ContractError(f"expected (..., {self.flat_dim}) flat states, got {x.shape}")
        return x2, single

    def _mode_terms(self, x2: np.ndarray, sigma):
        """Per-mode posterior means and log densities at noise level sigma."""
        sig = np.asarray(sigma, dtype=np.float64)
        if sig.ndim == 0:
            sig = np.full(x2.shape[0], float(sig))
        if np.any(sig < 0.0) or np.any(sig > 1.0):
            raise ContractError("sigma out of [0, 1]")
        a = (1.0 - sig)[:, None]                      # (B,1)
        c = a**2 * self.eigvals[None, :] + (sig**2)[:, None]  # (B,D) eigenvalues of C
        c_safe = np.maximum(c, 1e-300)
        post_means = []
        log_dens = []
        for j in range(self.config.n_modes):
            centered = x2 - a * self.means[j]
            y = centered @ self.eigvecs                # coordinates in eigenbasis
            gain = a * self.eigvals[None, :] / c_safe
            post = self.means[j] + (gain * y) @ self.eigvecs.T
            quad = np.sum(y * y / c_safe, axis=1)
            logdet = np.sum(np.log(c_safe), axis=1)
            log_dens.append(self.log_weights[j] - 0.5 * (self.flat_dim * _LOG2PI + logdet + quad))
            post_means.append(post)
        return np.stack(post_means), np.stack(log_dens), sig

    def responsibilities(self, x, sigma) -> np.ndarray:
        """Mixture mode posteriors r_j(x_t), shape (n_modes,) or (B, n_modes)."""
        x2, single = self._check_flat(x)
        _, log_dens, _ = self._mode_terms(x2, sigma)
        m = log_dens.max(axis=0, keepdims=True)
        e = np.exp(log_dens - m)
        r = (e / e.sum(axis=0, keepdims=True)).T
        return r[0] if single else r

    def posterior_mean(self, x, sigma, mode=None) -> np.ndarray:
        """E[x0 | x_t] at noise level sigma; mode pins one mixture component."""
        x2, single = self._check_flat(x)
        post, log_dens, sig = self._mode_terms(x2, sigma)
        if mode is None:
            m = log_dens.max(axis=0, keepdims=True)
            e = np.exp(log_dens - m)
            r = e / e.sum(axis=0, keepdims=True)       # (M,B)
            out = np.einsum("mb,mbd->bd", r, post)
        else:
            out = post[int(mode)]
        return out[0] if single else out

    def velocity(self, x, sigma, mode=None, guidance: float = 1.0) -> np.ndarray:
        """Exact flow velocity (x_t - E[x0|x_t]) / sigma at noise level sigma.

        At sigma = 0 the corruption is the identity, so the posterior-mean
        form degenerates to 0/0; the limit used here is the zero vector.
        With a mode label, guidance g interpolates in velocity space between
        the unconditional mixture field (g=0) and the single-mode field
        (g=1); g > 1 extrapolates. Without a label the mixture field is
        returned and guidance is ignored.
        """
        x2, single = self._check_flat(x)
        sig = np.asarray(sigma, dtype=np.float64)
        if sig.ndim == 0:
            sig = np.full(x2.shape[0], float(sig))
        if mode is None or guidance == 0.0:
            post = self.posterior_mean(x2, sig)
        elif guidance == 1.0:
            post = self.posterior_mean(x2, sig, mode=mode)
        else:
            pm = self.posterior_mean(x2, sig, mode=mode)
            pu = self.posterior_mean(x2, sig)
            post = pu + guidance * (pm - pu)
        safe = np.where(sig > 0.0, sig, 1.0)[:, None]
        v = np.where(sig[:, None] > 0.0, (x2 - post) / safe, 0.0)
        return v[0] if single else v

    # -- sequence-shaped wrappers ---------------------------------------------

    def _flatten_seq(self, x_seq: np.ndarray) -> tuple[np.ndarray, bool]:
        x_seq = np.asarray(x_seq, dtype=np.float64)
        f, d = self.config.frames, self.config.dim
        if x_seq.shape[-2:] != (f, d):
            raise ContractError(f"expected (..., {f}, {d}) sequences, got {x_seq.shape}")
        single = x_seq.ndim == 2
        x2 = x_seq.reshape(1, f * d) if single else x_seq.reshape(-1, f * d)
        return x2, single

    def posterior_mean_seq(self, x_seq, sigma) -> np.ndarray:
        x2, single = self._flatten_seq(x_seq)
        out = self.posterior_mean(x2, sigma)
        shape = (self.config.frames, self.config.dim)
        return out.reshape(shape) if single else out.reshape((-1,) + shape)

    def velocity_seq(self, x_seq, sigma, mode=None, guidance: float = 1.0) -> np.ndarray:
        x2, single = self._flatten_seq(x_seq)
        out = self.velocity(x2, sigma, mode=mode, guidance=guidance)
        shape = (self.config.frames, self.config.dim)
        return out.reshape(shape) if single else out.reshape((-1,) + shape)

    def velocity_fn(self, schedule: NoiseSchedule):
        """Score-function adapter fn(x_t, t) -> velocity on integer timesteps."""
        from .schedule import sigma_at

        def fn(x_t: np.ndarray, t):
            return self.velocity_seq(x_t, sigma_at(schedule, t))

        return fn


def analytic_velocity(x_t, t, world, schedule: NoiseSchedule):
    """Exact velocity for sequence-shaped states at integer timestep t.

    world may be a WorldConfig (moments built on the fly) or a prebuilt
    World. x_t is (frames, dim) or (batch, frames, dim); t is an int or a
    per-sample integer array.
    """
    from .schedule import sigma_at

    if isinstance(world, WorldConfig):
        world = World(world)
    sig = sigma_at(schedule, t)
    return world.velocity_seq(x_t, sig)


# ---------------------------------------------------------------------------
# probability-flow trajectories
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryRecord:
    """States of one path sampled on an ascending time grid.

    grid[0] = 0 is the data end and grid[-1] = 1 the noise end; states[i]
    is the state at grid[i]. frames/dim are optional sequence metadata used
    by the temporal-difference curvature variant.
    """

    grid: np.ndarray
    states: np.ndarray
    frames: int | None = None
    dim: int | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.grid.ndim != 1 or len(self.grid) < 2:
            raise ContractError("grid must be 1-D with at least 2 points")
        if np.any(np.diff(self.grid) <= 0.0):
            raise ContractError("grid must be strictly increasing")
        if self.states.shape != (len(self.grid), self.states.shape[1]):
            raise ContractError("states must be (len(grid), state_dim)")
        if self.frames is not None and self.dim is not None:
            if self.frames * self.dim != self.states.shape[1]:
                raise ContractError("frames * dim must equal the state dimension")


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or len(grid) < 2:
        raise ContractError("grid must be 1-D with at least 2 points")
    if grid[0] != 0.0 or grid[-1] != 1.0:
        raise ContractError("grid must start at 0 and end at 1")
    if np.any(np.diff(grid) <= 0.0):
        raise ContractError("grid must be strictly increasing")
    return grid


def integrate_flow(world: World, schedule: NoiseSchedule, grid, x1: np.ndarray) -> np.ndarray:
    """Euler-integrate the probability flow from noise (u=1) down to data (u=0).

    Each step moves by the sigma increment between consecutive grid times:
    x <- x - (sigma(u_hi) - sigma(u_lo)) * v(x, sigma(u_hi)). Returns states
    of shape (len(grid), B, D) with rows aligned to the ascending grid.
    """
    grid = _check_grid(grid)
    x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
    n = len(grid) - 1
    states = np.empty((n + 1, x1.shape[0], x1.shape[1]))
    states[n] = x1
    x = x1
    for i in range(n, 0, -1):
        s_hi = float(sigma_frac(schedule, grid[i]))
        s_lo = float(sigma_frac(schedule, grid[i - 1]))
        v = world.velocity(x, s_hi)
        x = x - (s_hi - s_lo) * v
        states[i - 1] = x
    return states


def make_ode_trajectory(config: WorldConfig, schedule: NoiseSchedule, grid,
                        seed: int) -> TrajectoryRecord:
    """One probability-flow path from a seeded unit-Gaussian noise draw."""
    world = config if isinstance(config, World) else World(config)
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(world.flat_dim)
    states = integrate_flow(world, schedule, grid, x1)[:, 0, :]
    return TrajectoryRecord(
        grid=np.asarray(grid, dtype=np.float64),
        states=states,
        frames=world.config.frames,
        dim=world.config.dim,
    )


def make_ode_pairs(config: WorldConfig, schedule: NoiseSchedule, n_pairs: int,
                   rng, grid_points: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """(noise state at u=1, flow endpoint at u=0) pairs, sequence-shaped.

    These seed the generator pre-fit regression and the forward-KL anchor.
    """
    rng = _as_rng(rng)
    world = config if isinstance(config, World) else World(config)
    cfg = world.config
    grid = np.linspace(0.0, 1.0, grid_points)
    x1 = rng.standard_normal((n_pairs, world.flat_dim))
    states = integrate_flow(world, schedule, grid, x1)
    shape = (n_pairs, cfg.frames, cfg.dim)
    return states[-1].reshape(shape), states[0].reshape(shape)


# ---------------------------------------------------------------------------
# trajectory CSV
# ---------------------------------------------------------------------------


def write_trajectories_csv(path: str, records: list[TrajectoryRecord]) -> None:
    """Rows traj_id,step,t,c0..c{D-1}; sorted by (traj_id, step); %.17g floats."""
    if not records:
        raise ContractError("no trajectories to write")
    dim = records[0].states.shape[1]
    for r in records:
        if r.states.shape[1] != dim:
            raise ContractError("all trajectories must share one state dimension")
    buf = io.StringIO()
    cols = ["traj_id", "step", "t"] + [f"c{i}" for i in range(dim)]
    buf.write(",".join(cols) + "\n")
    for tid, rec in enumerate(records):
        for step in range(len(rec.grid)):
            row = [str(tid), str(step), fmt(rec.grid[step])]
            row.extend(fmt(v) for v in rec.states[step])
            buf.write(",".join(row) + "\n")
    atomic_write_text(path, buf.getvalue())


def read_trajectories_csv(path: str) -> list[TrajectoryRecord]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[:3] != ["traj_id", "step", "t"]:
            raise ContractError(f"{path}: expected header traj_id,step,t,c0,...")
        dim = len(header) - 3
        if dim < 1 or header[3:] != [f"c{i}" for i in range(dim)]:
            raise ContractError(f"{path}: malformed coordinate columns")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ContractError(f"{path}:{line_no}: wrong column count")
            rows.append((int(row[0]), int(row[1]), [float(v) for v in row[2:]]))
    if not rows:
        raise ContractError(f"{path}: no trajectory rows")
    records = []
    by_id: dict[int, list] = {}
    for tid, step, vals in rows:
        by_id.setdefault(tid, []).append((step, vals))
    for tid in sorted(by_id):
        items = sorted(by_id[tid])
        if [s for s, _ in items] != list(range(len(items))):
            raise ContractError(f"trajectory {tid}: steps must be 0..n without gaps")
        grid = np.array([v[0] for _, v in items])
        states = np.array([v[1:] for _, v in items])
        records.append(TrajectoryRecord(grid=grid, states=states))
    return records


# ---------------------------------------------------------------------------
# configurable-bend trajectory family
# ---------------------------------------------------------------------------


def _ramp_mix(t, t_star: float, width: float, ramp: str):
    """Mixing level a(t): normalized logistic ramp, or a(t) = t for 'linear'."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ContractError("time out of [0, 1]")
    if ramp == "linear":
        out = t
    else:
        from scipy.special import expit

        lo = expit((0.0 - t_star) / width)
        hi = expit((1.0 - t_star) / width)
        out = (expit((t - t_star) / width) - lo) / (hi - lo)
    out = np.asarray(out)
    return out if out.ndim else float(out)


@dataclass
class BendFamily:
    """Gaussian data under a logistic-ramp noise schedule: a tunable bend.

    Data is N(data_mean, data_scale^2 I). The mixing level at time t is
    a(t), a normalized logistic ramp centered at t_star with width `width`
    (ramp="bend"), or a(t) = t (ramp="linear", the straight-chord control).
    Marginal states are x_t = (1 - a) mu + rho(a) z with z the standardized
    noise coordinate and rho(s)^2 = (1-s)^2 data_scale^2 + s^2, so exact
    trajectories, endpoints (x0 = mu + data_scale * z) and the flow velocity
    field are all closed form. Finite-difference curvature of these paths
    concentrates near t_star because that is where a(t) moves.
    """

    dim: int = 2
    data_mean: np.ndarray | None = None
    data_scale: float = 0.25
    t_star: float = 0.9
    width: float = 0.012
    ramp: str = "bend"

    def __post_init__(self):
        if self.data_mean is None:
            self.data_mean = 1.5 * np.ones(self.dim)
        self.data_mean = np.asarray(self.data_mean, dtype=np.float64)
        if self.data_mean.shape != (self.dim,):
            raise ContractError("data_mean must be (dim,)")
        if self.ramp not in ("bend", "linear"):
            raise ContractError(f"ramp must be 'bend' or 'linear', got {self.ramp!r}")
        if not (0.0 < self.t_star < 1.0):
            raise ContractError("t_star must be inside (0, 1)")
        if self.width <= 0.0:
            raise ContractError("width must be positive")
        if self.data_scale < 0.0:
            raise ContractError("data_scale must be non-negative")

    # -- schedule -------------------------------------------------------------

    def mix(self, t):
        """Noise mixing level a(t) in [0, 1], with a(0)=0 and a(1)=1 exactly."""
        return _ramp_mix(t, self.t_star, self.width, self.ramp)

    def rho(self, s):
        s = np.asarray(s, dtype=np.float64)
        out = np.sqrt((1.0 - s) ** 2 * self.data_scale**2 + s**2)
        return out if out.ndim else float(out)

    # -- exact family geometry -------------------------------------------------

    def state(self, z: np.ndarray, t) -> np.ndarray:
        """Exact flow state at time t for standardized coordinate z (= x at t=1)."""
        z = np.asarray(z, dtype=np.float64)
        s = self.mix(t)
        return (1.0 - s) * self.data_mean + self.rho(s) * z

    def endpoint(self, z: np.ndarray) -> np.ndarray:
        """Exact flow endpoint at t=0: mu + data_scale * z."""
        return self.data_mean + self.data_scale * np.asarray(z, dtype=np.float64)

    def trajectory(self, z: np.ndarray, grid) -> TrajectoryRecord:
        grid = np.asarray(grid, dtype=np.float64)
        states = np.stack([self.state(z, t) for t in grid])
        return TrajectoryRecord(grid=grid, states=states)

    def corrupt(self, x0, eps, t):
        """Marginal sample (1 - a(t)) x0 + a(t) eps; works on Tensors too."""
        s = self.mix(t)
        if np.ndim(s) > 0:
            nd = x0.ndim if hasattr(x0, "ndim") else np.ndim(x0)
            s = np.reshape(s, (-1,) + (1,) * (nd - 1))
        return (1.0 - s) * x0 + s * eps

    def sigma_velocity(self, x: np.ndarray, s) -> np.ndarray:
        """Flow velocity dx/ds at mixing level s (valid at s=0 and s=1).

        Derived from the quantile-map solution: with z = (x - (1-s) mu) /
        rho(s), dx/ds = -mu + rho'(s) z where rho rho' = s - (1-s) ds^2.
        """
        x = np.asarray(x, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        if np.ndim(s) > 0:
            s = s.reshape((-1,) + (1,) * (x.ndim - 1))
        r = np.sqrt((1.0 - s) ** 2 * self.data_scale**2 + s**2)
        rp = (s - (1.0 - s) * self.data_scale**2) / r
        z = (x - (1.0 - s) * self.data_mean) / r
        return -self.data_mean + rp * z

    def teacher_step(self, x: np.ndarray, t, dt: float) -> np.ndarray:
        """One schedule-aware Euler step of the flow from t down to t - dt.

        Moves by the mixing increment: x - (a(t) - a(t-dt)) * v(x, a(t)).
        Coarse dt relative to the ramp width therefore crosses the bend in a
        single chord, which is exactly the teacher error a consistency
        student inherits. t may be scalar or per-sample (B,).
        """
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        if np.any(t - dt < -1e-12):
            raise ContractError("teacher step would leave [0, 1]")
        s_hi = np.asarray(self.mix(t))
        s_lo = np.asarray(self.mix(np.maximum(t - dt, 0.0)))
        v = self.sigma_velocity(x, s_hi)
        if s_hi.ndim > 0:
            s_hi = s_hi.reshape((-1,) + (1,) * (x.ndim - 1))
            s_lo = s_lo.reshape((-1,) + (1,) * (x.ndim - 1))
        return x - (s_hi - s_lo) * v


def integrate_bend(family: BendFamily, x1: np.ndarray, n_steps: int = 4000) -> np.ndarray:
    """Brute-force fine-grid Euler endpoint, independent of the closed form."""
    x = np.asarray(x1, dtype=np.float64).copy()
    ts = np.linspace(1.0, 0.0, n_steps + 1)
    for i in range(n_steps):
        s_hi = family.mix(ts[i])
        s_lo = family.mix(ts[i + 1])
        x = x - (s_hi - s_lo) * family.sigma_velocity(x, s_hi)
    return x


def sample_bend_trajectories(family: BendFamily, n: int, grid, rng) -> list[TrajectoryRecord]:
    rng = _as_rng(rng)
    return [family.trajectory(rng.standard_normal(family.dim), grid) for _ in range(n)]


@dataclass
class BendMixture:
    """Two symmetric data modes under the logistic-ramp mixing.

    Same ramp a(t) as BendFamily, but the data law is a balanced Gaussian
    mixture with modes at +/- separation/2 along the diagonal, so flow paths
    commit to a mode while the ramp moves. The endpoint map from t=1 is
    contractive around each mode, which a second sampling hop can exploit.
    Trajectories have no closed form here; endpoints come from fine-grid
    integration (integrate_bend works unchanged on this class).
    """

    dim: int = 2
    separation: float = 3.0
    data_scale: float = 0.1
    t_star: float = 0.9
    width: float = 0.012
    ramp: str = "bend"

    def __post_init__(self):
        if self.ramp not in ("bend", "linear"):
            raise ContractError(f"ramp must be 'bend' or 'linear', got {self.ramp!r}")
        if not (0.0 < self.t_star < 1.0):
            raise ContractError("t_star must be inside (0, 1)")
        if self.width <= 0.0:
            raise ContractError("width must be positive")
        if self.data_scale <= 0.0:
            raise ContractError("data_scale must be positive for mixture modes")
        if self.separation <= 0.0:
            raise ContractError("separation must be positive")
        half = 0.5 * self.separation / np.sqrt(self.dim)
        self.modes = np.stack([half * np.ones(self.dim), -half * np.ones(self.dim)])

    def mix(self, t):
        return _ramp_mix(t, self.t_star, self.width, self.ramp)

    def alpha(self, t):
        return 1.0 - self.mix(t)

    def beta(self, t):
        return self.mix(t)

    def anchor_coeffs(self, t) -> tuple:
        """(clean, noise) coefficients of the deterministic re-anchoring line."""
        return self.alpha(t), self.beta(t)

    def corrupt(self, x0, eps, t):
        s = self.mix(t)
        if np.ndim(s) > 0:
            nd = x0.ndim if hasattr(x0, "ndim") else np.ndim(x0)
            s = np.reshape(s, (-1,) + (1,) * (nd - 1))
        return (1.0 - s) * x0 + s * eps

    def sample_states(self, n: int, t, rng) -> tuple[np.ndarray, np.ndarray]:
        """(x_t, x0) marginal draws; t scalar or per-sample (n,)."""
        rng = _as_rng(rng)
        idx = rng.integers(0, 2, size=n)
        x0 = self.modes[idx] + self.data_scale * rng.standard_normal((n, self.dim))
        eps = rng.standard_normal((n, self.dim))
        return self.corrupt(x0, eps, t), x0

    def sigma_velocity(self, x: np.ndarray, s) -> np.ndarray:
        """Flow velocity dx/ds at mixing level s: E[eps - x0 | x_s = x].

        Per mode j the posterior is Gaussian with residual D_j = x - (1-s) mu_j
        and shared variance c = (1-s)^2 d0^2 + s^2; responsibilities are a
        softmax of -|D_j|^2 / (2c).
        """
        x = np.asarray(x, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        if np.ndim(s) > 0:
            s = s.reshape((-1,) + (1,) * (x.ndim - 1))
        d0 = self.data_scale
        c = (1.0 - s) ** 2 * d0**2 + s**2
        # stack a mode axis in front: shapes (2, ...) broadcasting over x
        mu = self.modes.reshape((2,) + (1,) * (x.ndim - 1) + (self.dim,))
        delta = x[None] - (1.0 - s) * mu
        logr = -np.sum(delta**2, axis=-1, keepdims=True) / (2.0 * c)
        logr = logr - logr.max(axis=0, keepdims=True)
        r = np.exp(logr)
        r = r / r.sum(axis=0, keepdims=True)
        per_mode = (s - (1.0 - s) * d0**2) * delta / c - mu
        return np.sum(r * per_mode, axis=0)

    def teacher_step(self, x: np.ndarray, t, dt: float) -> np.ndarray:
        """Schedule-aware Euler hop t -> t - dt by the mixing increment."""
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        if np.any(t - dt < -1e-12):
            raise ContractError("teacher step would leave [0, 1]")
        s_hi = np.asarray(self.mix(t))
        s_lo = np.asarray(self.mix(np.maximum(t - dt, 0.0)))
        v = self.sigma_velocity(x, s_hi)
        if s_hi.ndim > 0:
            s_hi = s_hi.reshape((-1,) + (1,) * (x.ndim - 1))
            s_lo = s_lo.reshape((-1,) + (1,) * (x.ndim - 1))
        return x - (s_hi - s_lo) * v


@dataclass
class ChordFamily:
    """Single Gaussian whose flow paths are straight constant-speed chords.

    States are x(t) = (1-t) mu + ell(t) z with ell(t) = (1-t) d0 + t, which
    is affine in t, so every trajectory is the straight segment from
    mu + d0 z to z and one Euler teacher step of any size is exact. The
    matching corruption has alpha = 1-t and beta^2 = t^2 + 2 t (1-t) d0.
    """

    dim: int = 2
    data_mean: np.ndarray | None = None
    data_scale: float = 0.25

    def __post_init__(self):
        if self.data_mean is None:
            self.data_mean = 1.5 * np.ones(self.dim)
        self.data_mean = np.asarray(self.data_mean, dtype=np.float64)
        if self.data_mean.shape != (self.dim,):
            raise ContractError("data_mean must be (dim,)")
        if not (0.0 < self.data_scale < 1.0):
            raise ContractError("data_scale must be in (0, 1)")

    def mix(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise ContractError("time out of [0, 1]")
        return t if t.ndim else float(t)

    def ell(self, t):
        t = np.asarray(t, dtype=np.float64)
        return (1.0 - t) * self.data_scale + t

    def alpha(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = 1.0 - t
        return out if out.ndim else float(out)

    def beta(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.sqrt(t**2 + 2.0 * t * (1.0 - t) * self.data_scale)
        return out if out.ndim else float(out)

    def anchor_coeffs(self, t) -> tuple:
        """(clean, noise) coefficients of the straight path x = (1-t) x0 + t z.

        Note the noise coefficient is t, not beta(t): beta matches marginals
        of independent corruption, while the trajectory family couples data
        and noise through the same coordinate.
        """
        return self.alpha(t), self.mix(t)

    def state(self, z: np.ndarray, t) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        return (1.0 - t) * self.data_mean + self.ell(t) * z

    def endpoint(self, z: np.ndarray) -> np.ndarray:
        return self.data_mean + self.data_scale * np.asarray(z, dtype=np.float64)

    def trajectory(self, z: np.ndarray, grid) -> TrajectoryRecord:
        grid = np.asarray(grid, dtype=np.float64)
        states = np.stack([self.state(z, t) for t in grid])
        return TrajectoryRecord(grid=grid, states=states)

    def corrupt(self, x0, eps, t):
        a = self.alpha(t)
        b = self.beta(t)
        if np.ndim(a) > 0:
            nd = x0.ndim if hasattr(x0, "ndim") else np.ndim(x0)
            a = np.reshape(a, (-1,) + (1,) * (nd - 1))
            b = np.reshape(b, (-1,) + (1,) * (nd - 1))
        return a * x0 + b * eps

    def sample_states(self, n: int, t, rng) -> tuple[np.ndarray, np.ndarray]:
        rng = _as_rng(rng)
        x0 = self.data_mean + self.data_scale * rng.standard_normal((n, self.dim))
        eps = rng.standard_normal((n, self.dim))
        return self.corrupt(x0, eps, t), x0

    def sigma_velocity(self, x: np.ndarray, s) -> np.ndarray:
        """dx/dt along the chord: -mu + (1 - d0) (x - (1-t) mu) / ell(t)."""
        x = np.asarray(x, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        if np.ndim(s) > 0:
            s = s.reshape((-1,) + (1,) * (x.ndim - 1))
        z = (x - (1.0 - s) * self.data_mean) / self.ell(s)
        return -self.data_mean + (1.0 - self.data_scale) * z

    def teacher_step(self, x: np.ndarray, t, dt: float) -> np.ndarray:
        """One Euler hop t -> t - dt; exact at any dt on this family."""
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        if np.any(t - dt < -1e-12):
            raise ContractError("teacher step would leave [0, 1]")
        v = self.sigma_velocity(x, t)
        step = np.asarray(t - np.maximum(t - dt, 0.0))
        if step.ndim > 0:
            step = step.reshape((-1,) + (1,) * (x.ndim - 1))
        return x - step * v
