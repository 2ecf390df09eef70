"""Tiny transformer generator/critic pair and the block-causal KV cache.

The generator denoises one block of frames at a time, attending to a cache
of already-generated context. Cache discipline, fixed by contract:

  * a velocity-producing denoise pass never extends the cache (so warm-up
    steps on one block can repeat without growing it), and each such pass
    increments the net's NFE counter;
  * after a block's final denoise step, its clean estimate is re-encoded at
    t = 0 in a separate pass that extends the cache and is NOT counted as a
    function evaluation (its velocity output is discarded).

Context frames therefore always enter attention as clean estimates embedded
at t = 0, which is also what the full-sequence reference forward does, so
cached and uncached paths agree up to float round-off.

The critic shares the backbone architecture (independently parameterized,
bidirectional by default) and adds a discriminator branch: learned register
vectors, L2-normalized at use, attend over tapped intermediate layers; the
concatenated readouts feed a small MLP that emits one logit. Velocity head
and logit come from the same backbone pass.
"""

from __future__ import annotations

import dataclasses
import functools
import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError
from .fileio import atomic_write_bytes
from .schedule import NoiseSchedule, x0_from_velocity

CKPT_FORMAT = "ardistill-ckpt-v1"


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 4
    width: int = 64
    layers: int = 4
    heads: int = 4
    max_frames: int = 8
    block_size: int = 1
    n_cond: int = 1
    registers: int = 2
    tap_layers: tuple = (1, 3)
    causal_critic: bool = False
    num_timesteps: int = 1000
    shift: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "tap_layers", tuple(int(t) for t in self.tap_layers))
        if self.width % self.heads != 0:
            raise ContractError("width must be divisible by heads")
        if self.width % 2 != 0:
            raise ContractError("width must be even (sin/cos time features)")
        if self.block_size < 1 or self.max_frames % self.block_size != 0:
            raise ContractError("max_frames must be a positive multiple of block_size")
        if len(self.tap_layers) != self.registers:
            raise ContractError("one register per tapped layer: lengths must match")
        for t in self.tap_layers:
            if not (1 <= t <= self.layers):
                raise ContractError(f"tap layer {t} outside 1..{self.layers}")

    @property
    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule(self.num_timesteps, self.shift)


# ---------------------------------------------------------------------------
# parameter initialization
# ---------------------------------------------------------------------------


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _init_core(cfg: ModelConfig, rng: np.random.Generator) -> dict:
    w = cfg.width

    def lin(fan_in, fan_out):
        return Tensor(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in),
                      requires_grad=True)

    def bias(n):
        return Tensor(np.zeros(n), requires_grad=True)

    p = {}
    p["in.w"] = lin(cfg.dim, w)
    p["in.b"] = bias(w)
    p["time.w"] = lin(w, w)
    p["time.b"] = bias(w)
    p["cond.emb"] = Tensor(0.02 * rng.standard_normal((cfg.n_cond, w)), requires_grad=True)
    p["pos.emb"] = Tensor(0.02 * rng.standard_normal((cfg.max_frames, w)), requires_grad=True)
    for l in range(cfg.layers):
        p[f"l{l}.ln1.g"] = Tensor(np.ones(w), requires_grad=True)
        p[f"l{l}.ln1.b"] = bias(w)
        p[f"l{l}.q.w"] = lin(w, w)
        p[f"l{l}.q.b"] = bias(w)
        p[f"l{l}.k.w"] = lin(w, w)
        p[f"l{l}.k.b"] = bias(w)
        p[f"l{l}.v.w"] = lin(w, w)
        p[f"l{l}.v.b"] = bias(w)
        p[f"l{l}.o.w"] = lin(w, w)
        p[f"l{l}.o.b"] = bias(w)
        p[f"l{l}.ln2.g"] = Tensor(np.ones(w), requires_grad=True)
        p[f"l{l}.ln2.b"] = bias(w)
        p[f"l{l}.m1.w"] = lin(w, 4 * w)
        p[f"l{l}.m1.b"] = bias(4 * w)
        p[f"l{l}.m2.w"] = lin(4 * w, w)
        p[f"l{l}.m2.b"] = bias(w)
    p["lnf.g"] = Tensor(np.ones(w), requires_grad=True)
    p["lnf.b"] = bias(w)
    # zero-initialized output head: the untrained net predicts zero velocity
    p["out.w"] = Tensor(np.zeros((w, cfg.dim)), requires_grad=True)
    p["out.b"] = bias(cfg.dim)
    return p


def _init_disc(cfg: ModelConfig, rng: np.random.Generator) -> dict:
    w = cfg.width
    p = {}
    p["disc.reg"] = Tensor(rng.standard_normal((cfg.registers, w)), requires_grad=True)
    for i in range(cfg.registers):
        for nm in ("q", "k", "v"):
            p[f"disc.r{i}.{nm}.w"] = Tensor(
                rng.standard_normal((w, w)) / np.sqrt(w), requires_grad=True
            )
    p["disc.m1.w"] = Tensor(
        rng.standard_normal((cfg.registers * w, w)) / np.sqrt(cfg.registers * w),
        requires_grad=True,
    )
    p["disc.m1.b"] = Tensor(np.zeros(w), requires_grad=True)
    # zero final layer: untrained critic emits logit 0 for any input
    p["disc.m2.w"] = Tensor(np.zeros((w, 1)), requires_grad=True)
    p["disc.m2.b"] = Tensor(np.zeros(1), requires_grad=True)
    return p


# ---------------------------------------------------------------------------
# shared forward pieces
# ---------------------------------------------------------------------------


def _time_features(cfg: ModelConfig, t, batch: int, n_frames: int) -> np.ndarray:
    """Sinusoidal features of t / num_timesteps, shaped (B, N, width).

    t may be a scalar, a (B,) per-sample array, or a (B, N) per-frame array.
    """
    tt = np.asarray(t, dtype=np.float64)
    if np.any(tt < 0) or np.any(tt > cfg.num_timesteps):
        raise ContractError(f"timestep out of [0, {cfg.num_timesteps}]")
    if tt.ndim == 0:
        tt = np.full((batch, n_frames), float(tt))
    elif tt.ndim == 1:
        if tt.shape[0] != batch:
            raise ContractError(f"per-sample t has length {tt.shape[0]}, batch is {batch}")
        tt = np.repeat(tt[:, None], n_frames, axis=1)
    elif tt.shape != (batch, n_frames):
        raise ContractError(f"per-frame t must be ({batch}, {n_frames}), got {tt.shape}")
    tau = tt / cfg.num_timesteps
    half = cfg.width // 2
    freqs = 2.0 * np.pi * np.geomspace(1.0, cfg.num_timesteps / 2.0, half)
    ang = tau[..., None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def _cond_rows(p: dict, cond, batch: int):
    ids = np.asarray(cond, dtype=np.int64)
    if ids.ndim == 0:
        ids = np.full(batch, int(ids))
    if ids.shape != (batch,):
        raise ContractError(f"cond must be scalar or ({batch},), got {ids.shape}")
    n_cond = p["cond.emb"].data.shape[0]
    if np.any(ids < 0) or np.any(ids >= n_cond):
        raise ContractError(f"cond id out of range [0, {n_cond})")
    return ad.embedding(p["cond.emb"], ids)


@functools.lru_cache(maxsize=32)
def _block_causal_bias(n_frames: int, block_size: int) -> np.ndarray:
    """0 where frame i may see frame j (same or earlier block), -inf elsewhere."""
    blk = np.arange(n_frames) // block_size
    vis = blk[None, :] <= blk[:, None]
    return np.where(vis, 0.0, -np.inf)


def _split_heads(x, batch: int, n: int, heads: int, dh: int):
    return ad.transpose(ad.reshape(x, (batch, n, heads, dh)), (0, 2, 1, 3))


def _merge_heads(x, batch: int, n: int, width: int):
    return ad.reshape(ad.transpose(x, (0, 2, 1, 3)), (batch, n, width))


def _embed_tokens(p: dict, cfg: ModelConfig, x, t, cond, frame_offset: int):
    x = ad.ensure_tensor(x)
    if x.ndim != 3 or x.shape[2] != cfg.dim:
        raise ContractError(f"tokens must be (B, N, {cfg.dim}), got {x.shape}")
    b, n, _ = x.shape
    if frame_offset + n > cfg.max_frames:
        raise ContractError(
            f"frames {frame_offset}+{n} exceed max_frames {cfg.max_frames}"
        )
    tok = ad.matmul(x, p["in.w"]) + p["in.b"]
    tfeat = Tensor(_time_features(cfg, t, b, n))
    tok = tok + (ad.matmul(tfeat, p["time.w"]) + p["time.b"])
    tok = tok + p["pos.emb"][frame_offset:frame_offset + n]
    cond_rows = _cond_rows(p, cond, b)
    tok = tok + ad.reshape(cond_rows, (b, 1, cfg.width))
    return tok


def _attention(p, cfg, layer, h, batch, n, past_k=None, past_v=None, mask_bias=None):
    heads, dh = cfg.heads, cfg.width // cfg.heads
    q = _split_heads(ad.matmul(h, p[f"l{layer}.q.w"]) + p[f"l{layer}.q.b"], batch, n, heads, dh)
    k = _split_heads(ad.matmul(h, p[f"l{layer}.k.w"]) + p[f"l{layer}.k.b"], batch, n, heads, dh)
    v = _split_heads(ad.matmul(h, p[f"l{layer}.v.w"]) + p[f"l{layer}.v.b"], batch, n, heads, dh)
    if past_k is not None:
        k = ad.concat([past_k, k], axis=2)
        v = ad.concat([past_v, v], axis=2)
    scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dh))
    if mask_bias is not None:
        scores = scores + mask_bias
    att = ad.softmax(scores, axis=-1)
    out = _merge_heads(ad.matmul(att, v), batch, n, cfg.width)
    out = ad.matmul(out, p[f"l{layer}.o.w"]) + p[f"l{layer}.o.b"]
    return out, k, v


def _mlp(p, layer, h):
    h = ad.matmul(h, p[f"l{layer}.m1.w"]) + p[f"l{layer}.m1.b"]
    return ad.matmul(ad.silu(h), p[f"l{layer}.m2.w"]) + p[f"l{layer}.m2.b"]


def _velocity_head(p, tok):
    return ad.matmul(ad.layernorm(tok, p["lnf.g"], p["lnf.b"]), p["out.w"]) + p["out.b"]


# ---------------------------------------------------------------------------
# KV cache
# ---------------------------------------------------------------------------


class KVCache:
    """Per-layer keys/values of completed context blocks.

    Grows only through extend(); gradients flow through the stored Tensors
    back into the blocks that produced them.
    """

    def __init__(self, layers: int, batch: int, heads: int, head_dim: int):
        shape = (batch, heads, 0, head_dim)
        self.keys = [Tensor(np.zeros(shape)) for _ in range(layers)]
        self.values = [Tensor(np.zeros(shape)) for _ in range(layers)]
        self.frames = 0
        self.batch = batch

    def extend(self, new_keys, new_values, n_frames: int):
        self.keys = new_keys
        self.values = new_values
        self.frames += n_frames


# ---------------------------------------------------------------------------
# nets
# ---------------------------------------------------------------------------


class _NetBase:
    def __init__(self, config: ModelConfig):
        self.config = config
        self.params: dict[str, Tensor] = {}

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_param_arrays(self, arrays: dict[str, np.ndarray]):
        if set(arrays) != set(self.params):
            raise ContractError("parameter name sets differ")
        for k, v in self.params.items():
            a = np.asarray(arrays[k], dtype=np.float64)
            if a.shape != v.data.shape:
                raise ContractError(f"shape mismatch for {k}: {a.shape} vs {v.data.shape}")
            v.data = a.copy()

    @property
    def schedule(self) -> NoiseSchedule:
        return self.config.schedule


class GeneratorNet(_NetBase):
    """Block-causal one-step denoiser with KV-cache rollout support."""

    def __init__(self, config: ModelConfig, rng=0):
        super().__init__(config)
        self.params = _init_core(config, _as_rng(rng))
        self.nfe_count = 0

    def reset_nfe(self):
        self.nfe_count = 0

    def init_cache(self, batch: int) -> KVCache:
        cfg = self.config
        return KVCache(cfg.layers, batch, cfg.heads, cfg.width // cfg.heads)

    def forward_block(self, x_block, t, cond, cache: KVCache, extend: bool = False,
                      want_velocity: bool = True):
        """One pass over a block given cached context.

        extend=False is a denoise pass: counted as one NFE, cache untouched.
        extend=True is a context-encode pass: cache gains this block's
        keys/values, not counted, and the velocity head is skipped.
        """
        cfg, p = self.config, self.params
        x_block = ad.ensure_tensor(x_block)
        if x_block.ndim != 3 or x_block.shape[1] != cfg.block_size:
            raise ContractError(
                f"block must be (B, {cfg.block_size}, {cfg.dim}), got {x_block.shape}"
            )
        if x_block.shape[0] != cache.batch:
            raise ContractError("batch size does not match the cache")
        b, n = x_block.shape[0], x_block.shape[1]
        if not extend:
            self.nfe_count += 1
        tok = _embed_tokens(p, cfg, x_block, t, cond, frame_offset=cache.frames)
        new_k, new_v = [], []
        for l in range(cfg.layers):
            h = ad.layernorm(tok, p[f"l{l}.ln1.g"], p[f"l{l}.ln1.b"])
            out, k, v = _attention(p, cfg, l, h, b, n,
                                   past_k=cache.keys[l], past_v=cache.values[l])
            tok = tok + out
            tok = tok + _mlp(p, l, ad.layernorm(tok, p[f"l{l}.ln2.g"], p[f"l{l}.ln2.b"]))
            new_k.append(k)
            new_v.append(v)
        if extend:
            cache.extend(new_k, new_v, n)
            return None
        if not want_velocity:
            return None
        return _velocity_head(p, tok)

    def forward_full(self, x, t, cond):
        """Reference forward over a whole sequence with the block-causal mask.

        t may be per-frame (B, N), which is how the cached path is checked:
        context frames at t = 0, the block under denoising at its own t.
        """
        cfg, p = self.config, self.params
        x = ad.ensure_tensor(x)
        if x.ndim != 3:
            raise ContractError(f"expected (B, N, d), got {x.shape}")
        b, n = x.shape[0], x.shape[1]
        if n % cfg.block_size != 0:
            raise ContractError("sequence length must be a multiple of block_size")
        tok = _embed_tokens(p, cfg, x, t, cond, frame_offset=0)
        bias = _block_causal_bias(n, cfg.block_size)
        for l in range(cfg.layers):
            h = ad.layernorm(tok, p[f"l{l}.ln1.g"], p[f"l{l}.ln1.b"])
            out, _, _ = _attention(p, cfg, l, h, b, n, mask_bias=bias)
            tok = tok + out
            tok = tok + _mlp(p, l, ad.layernorm(tok, p[f"l{l}.ln2.g"], p[f"l{l}.ln2.b"]))
        return _velocity_head(p, tok)


class CriticNet(_NetBase):
    """Velocity regressor plus register-attention discriminator.

    Bidirectional over the full sequence by default; config.causal_critic
    switches the backbone to the generator's block-causal mask.
    """

    def __init__(self, config: ModelConfig, rng=0):
        super().__init__(config)
        r = _as_rng(rng)
        self.params = _init_core(config, r)
        self.params.update(_init_disc(config, r))

    def forward(self, x, t, cond):
        """One backbone pass; returns (velocity (B,N,d), logits (B,))."""
        cfg, p = self.config, self.params
        x = ad.ensure_tensor(x)
        if x.ndim != 3 or x.shape[2] != cfg.dim:
            raise ContractError(f"expected (B, N, {cfg.dim}), got {x.shape}")
        b, n = x.shape[0], x.shape[1]
        tok = _embed_tokens(p, cfg, x, t, cond, frame_offset=0)
        bias = _block_causal_bias(n, cfg.block_size) if cfg.causal_critic else None
        taps = {}
        for l in range(cfg.layers):
            h = ad.layernorm(tok, p[f"l{l}.ln1.g"], p[f"l{l}.ln1.b"])
            out, _, _ = _attention(p, cfg, l, h, b, n, mask_bias=bias)
            tok = tok + out
            tok = tok + _mlp(p, l, ad.layernorm(tok, p[f"l{l}.ln2.g"], p[f"l{l}.ln2.b"]))
            if (l + 1) in cfg.tap_layers:
                taps[l + 1] = tok
        velocity = _velocity_head(p, tok)
        logits = self._discriminate(taps, b, n)
        return velocity, logits

    def _discriminate(self, taps: dict, b: int, n: int):
        cfg, p = self.config, self.params
        w = cfg.width
        feats = []
        for i, layer in enumerate(cfg.tap_layers):
            h = taps[layer]
            reg = ad.l2_normalize(p["disc.reg"][i:i + 1], axis=-1)       # (1, W), unit norm
            q = ad.reshape(ad.matmul(reg, p[f"disc.r{i}.q.w"]), (1, 1, w))
            k = ad.matmul(h, p[f"disc.r{i}.k.w"])                        # (B, N, W)
            v = ad.matmul(h, p[f"disc.r{i}.v.w"])
            scores = ad.tsum(k * q, axis=-1) * (1.0 / np.sqrt(w))        # (B, N)
            att = ad.softmax(scores, axis=-1)
            feats.append(ad.tsum(ad.reshape(att, (b, n, 1)) * v, axis=1))  # (B, W)
        cat = ad.concat(feats, axis=1)
        hdn = ad.silu(ad.matmul(cat, p["disc.m1.w"]) + p["disc.m1.b"])
        return ad.reshape(ad.matmul(hdn, p["disc.m2.w"]) + p["disc.m2.b"], (b,))

    def velocity_fn(self, cond):
        """Adapter matching the score-function protocol used by the losses."""
        def fn(x_t: np.ndarray, t):
            with ad.no_grad():
                v, _ = self.forward(x_t, t, cond)
            return v.data

        return fn


# ---------------------------------------------------------------------------
# rollout
# ---------------------------------------------------------------------------


def generator_forward(net: GeneratorNet, x_t_block, t, cond, cache: KVCache):
    """Denoise one block against the cache, then bank its clean estimate.

    Returns the predicted velocity. The cache is extended in place with the
    keys/values of the clean estimate re-encoded at t = 0 (an uncounted
    pass), so subsequent blocks condition on clean context.
    """
    v = net.forward_block(x_t_block, t, cond, cache, extend=False)
    x0 = x0_from_velocity(ad.ensure_tensor(x_t_block), v, t, net.schedule)
    net.forward_block(x0, 0, cond, cache, extend=True, want_velocity=False)
    return v


def rollout_one_step(net: GeneratorNet, noise, cond, schedule: NoiseSchedule | None = None):
    """One-step generation: every block denoised in a single jump from t = N.

    noise is (n_blocks, block_size, dim) for one sequence or (B, n_blocks,
    block_size, dim) for a batch. Returns a Tensor of shape (B, F, d) (the
    batch axis is added if absent); differentiable end to end.
    """
    cfg = net.config
    schedule = schedule or net.schedule
    if schedule.num_timesteps != cfg.num_timesteps:
        raise ContractError("schedule grid does not match the model's")
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim == 3:
        noise = noise[None]
    if noise.ndim != 4 or noise.shape[2] != cfg.block_size or noise.shape[3] != cfg.dim:
        raise ContractError(
            f"noise must be (B, n_blocks, {cfg.block_size}, {cfg.dim}), got {noise.shape}"
        )
    b, n_blocks = noise.shape[0], noise.shape[1]
    if n_blocks * cfg.block_size > cfg.max_frames:
        raise ContractError("rollout longer than max_frames")
    t_top = schedule.num_timesteps
    cache = net.init_cache(b)
    blocks = []
    for j in range(n_blocks):
        eps = Tensor(noise[:, j])
        v = generator_forward(net, eps, t_top, cond, cache)
        blocks.append(x0_from_velocity(eps, v, t_top, schedule))
    return ad.concat(blocks, axis=1)


# ---------------------------------------------------------------------------
# consistency-student MLP
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EndpointConfig:
    dim: int = 2
    width: int = 64
    t_freqs: int = 8


class EndpointNet(_NetBase):
    """Endpoint map f(x, t) = x - t * g(x, t); f(x, 0) = x by construction."""

    def __init__(self, config: EndpointConfig, rng=0):
        self.config = config
        r = _as_rng(rng)
        d, w, nf = config.dim, config.width, config.t_freqs
        fan = d + 2 * nf

        self.params = {
            "w1": Tensor(r.standard_normal((fan, w)) / np.sqrt(fan), requires_grad=True),
            "b1": Tensor(np.zeros(w), requires_grad=True),
            "w2": Tensor(r.standard_normal((w, w)) / np.sqrt(w), requires_grad=True),
            "b2": Tensor(np.zeros(w), requires_grad=True),
            "w3": Tensor(np.zeros((w, d)), requires_grad=True),
            "b3": Tensor(np.zeros(d), requires_grad=True),
        }

    def forward(self, x, t):
        p, cfg = self.params, self.config
        x = ad.ensure_tensor(x)
        if x.ndim != 2 or x.shape[1] != cfg.dim:
            raise ContractError(f"expected (B, {cfg.dim}), got {x.shape}")
        b = x.shape[0]
        tt = np.asarray(t, dtype=np.float64)
        if tt.ndim == 0:
            tt = np.full(b, float(tt))
        if tt.shape != (b,):
            raise ContractError(f"t must be scalar or ({b},)")
        freqs = 2.0 * np.pi * np.geomspace(1.0, 64.0, cfg.t_freqs)
        ang = tt[:, None] * freqs
        feats = np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
        h = ad.concat([x, Tensor(feats)], axis=1)
        h = ad.silu(ad.matmul(h, p["w1"]) + p["b1"])
        h = ad.silu(ad.matmul(h, p["w2"]) + p["b2"])
        g = ad.matmul(h, p["w3"]) + p["b3"]
        return x - Tensor(tt[:, None]) * g


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


_KIND_CONFIG = {
    "generator": ModelConfig,
    "critic": ModelConfig,
    "endpoint": EndpointConfig,
}


def save_checkpoint(path: str, net: _NetBase, kind: str,
                    params_override: dict[str, np.ndarray] | None = None) -> None:
    """UTF-8 JSON header line, then flat little-endian float32 parameter data.

    The header records the format tag, net kind, architecture config and the
    name/shape of every tensor in write order; the binary section is the
    concatenation of those tensors, C order, no padding.
    """
    if kind not in _KIND_CONFIG:
        raise ContractError(f"unknown checkpoint kind {kind!r}")
    arrays = params_override if params_override is not None else net.param_arrays()
    names = list(net.params.keys())
    if set(arrays) != set(names):
        raise ContractError("override parameter names do not match the net")
    header = {
        "format": CKPT_FORMAT,
        "kind": kind,
        "dtype": "<f4",
        "config": dataclasses.asdict(net.config),
        "params": [[n, list(net.params[n].data.shape)] for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8") + b"\n"
    blob += b"".join(
        np.ascontiguousarray(arrays[n], dtype="<f4").tobytes() for n in names
    )
    atomic_write_bytes(path, blob)


def read_checkpoint(path: str) -> tuple[str, dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        raw = f.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ContractError(f"{path}: missing checkpoint header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ContractError(f"{path}: bad checkpoint header: {e}") from e
    if header.get("format") != CKPT_FORMAT or header.get("dtype") != "<f4":
        raise ContractError(f"{path}: unsupported checkpoint format")
    body = raw[nl + 1:]
    params = {}
    offset = 0
    for name, shape in header["params"]:
        n = int(np.prod(shape)) if shape else 1
        end = offset + 4 * n
        if end > len(body):
            raise ContractError(f"{path}: truncated parameter data at {name}")
        params[name] = np.frombuffer(body[offset:end], dtype="<f4").astype(
            np.float64
        ).reshape(shape)
        offset = end
    if offset != len(body):
        raise ContractError(f"{path}: trailing bytes after parameter data")
    return header["kind"], header["config"], params


def load_net(path: str, expect_kind: str | None = None):
    kind, cfg_dict, params = read_checkpoint(path)
    if expect_kind is not None and kind != expect_kind:
        raise ContractError(f"{path}: checkpoint kind {kind!r}, expected {expect_kind!r}")
    cfg_cls = _KIND_CONFIG.get(kind)
    if cfg_cls is None:
        raise ContractError(f"{path}: unknown net kind {kind!r}")
    if cfg_cls is ModelConfig and "tap_layers" in cfg_dict:
        cfg_dict = dict(cfg_dict, tap_layers=tuple(cfg_dict["tap_layers"]))
    cfg = cfg_cls(**cfg_dict)
    net = {"generator": GeneratorNet, "critic": CriticNet, "endpoint": EndpointNet}[kind](cfg)
    net.load_param_arrays(params)
    return net
