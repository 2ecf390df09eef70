"""Flat `section.key = value` experiment configuration files.

Plain UTF-8 text: one assignment per line, `#` starts a comment, blank
lines ignored. Every key is validated against the schema below before any
object is built; unknown or duplicate keys and type errors are rejected
with the offending key named. World defaults depend on world.kind, so only
keys actually present override the factory defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError, ContractError
from .model import ModelConfig
from .sampler import SampleConfig
from .synthworld import WorldConfig, bimodal_ssm_world, gauss_ssm_world
from .trainer import TrainConfig

WORLD_KINDS = ("gauss-ssm", "bimodal-ssm")

# key -> (type tag, default-or-None). "int-list" parses comma-separated ints.
SCHEMA: dict[str, tuple[str, object]] = {
    "run.seed": ("int", 0),
    "world.kind": ("choice:gauss-ssm,bimodal-ssm", "gauss-ssm"),
    "world.dim": ("int", 4),
    "world.frames": ("int", 8),
    "world.init_scale": ("float", None),
    "world.process_noise": ("float", None),
    "world.separation": ("float", None),
    "world.contraction": ("float", None),
    "world.angle": ("float", None),
    "world.drift": ("float", None),
    "model.width": ("int", 64),
    "model.layers": ("int", 4),
    "model.heads": ("int", 4),
    "model.block_size": ("int", 1),
    "model.registers": ("int", 2),
    "model.tap_layers": ("int-list", (1, 3)),
    "model.causal_critic": ("bool", False),
    "model.n_cond": ("int", 1),
    "model.num_timesteps": ("int", 1000),
    "model.shift": ("float", 5.0),
    "train.iterations": ("int", 300),
    "train.batch_size": ("int", 16),
    "train.k_interval": ("int", 5),
    "train.lambda_g": ("float", 0.03),
    "train.lambda_d": ("float", 0.03),
    "train.lambda_fkl": ("float", 0.0),
    "train.lr_generator": ("float", 1e-3),
    "train.lr_critic": ("float", 1e-3),
    "train.beta1": ("float", 0.0),
    "train.beta2": ("float", 0.999),
    "train.weight_decay": ("float", 0.01),
    "train.ema_decay": ("float", 0.99),
    "train.ema_start": ("int", 50),
    "train.t_min": ("int", 20),
    "train.t_max": ("int", 980),
    "train.discriminator_target": ("choice:real-data,self-distilled", "real-data"),
    "train.init_steps": ("int", 200),
    "train.init_pairs": ("int", 256),
    "train.checkpoint_every": ("int", 0),
    "sample.first_block_steps": ("int", 4),
    "sample.later_block_steps": ("int", 1),
    "sample.num_sequences": ("int", 64),
    "sample.warmup_timesteps": ("int-list", None),
    "paths.out_dir": ("str", "."),
    "paths.log": ("str", "train_log.csv"),
    "paths.checkpoint": ("str", "generator.ckpt"),
    "paths.checkpoint_ema": ("str", "generator_ema.ckpt"),
    "paths.samples": ("str", "samples.csv"),
}

_WORLD_FACTORY_KEYS = {
    "world.init_scale": "init_scale",
    "world.process_noise": "process_noise",
    "world.contraction": "contraction",
    "world.angle": "angle",
    "world.drift": "drift",
}


def _parse_value(key: str, tag: str, raw: str):
    if tag == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if tag == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if tag == "bool":
        low = raw.lower()
        if low not in ("true", "false"):
            raise ConfigError(f"{key}: expected true or false, got {raw!r}")
        return low == "true"
    if tag == "str":
        return raw
    if tag == "int-list":
        try:
            return tuple(int(p.strip()) for p in raw.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"{key}: expected comma-separated integers, got {raw!r}") from None
    if tag.startswith("choice:"):
        options = tag.split(":", 1)[1].split(",")
        if raw not in options:
            raise ConfigError(f"{key}: must be one of {options}, got {raw!r}")
        return raw
    raise AssertionError(f"unhandled schema tag {tag}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse and type-check; returns {key: value} for keys present in the file."""
    out: dict = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'section.key = value'")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
        out[key] = _parse_value(key, SCHEMA[key][0], raw)
    return out


@dataclass
class ExperimentConfig:
    seed: int
    world: WorldConfig
    model: ModelConfig
    train: TrainConfig
    sample: SampleConfig
    paths: dict[str, str] = field(default_factory=dict)

    def path(self, name: str) -> str:
        import os

        p = self.paths[name]
        out_dir = self.paths.get("out_dir", ".")
        return p if os.path.isabs(p) else os.path.join(out_dir, p)


def build_experiment(values: dict) -> ExperimentConfig:
    """Assemble validated dataclasses from parsed key/values."""

    def get(key):
        return values.get(key, SCHEMA[key][1])

    kind = get("world.kind")
    world_kwargs = {"dim": get("world.dim"), "frames": get("world.frames")}
    for key, arg in _WORLD_FACTORY_KEYS.items():
        if key in values:
            world_kwargs[arg] = values[key]
    if kind == "bimodal-ssm":
        if "world.separation" in values:
            world_kwargs["separation"] = values["world.separation"]
        factory = bimodal_ssm_world
    else:
        if "world.separation" in values:
            raise ConfigError("world.separation only applies to world.kind = bimodal-ssm")
        factory = gauss_ssm_world
    try:
        world = factory(**world_kwargs)
        model = ModelConfig(
            dim=world.dim,
            width=get("model.width"),
            layers=get("model.layers"),
            heads=get("model.heads"),
            max_frames=world.frames,
            block_size=get("model.block_size"),
            n_cond=get("model.n_cond"),
            registers=get("model.registers"),
            tap_layers=get("model.tap_layers"),
            causal_critic=get("model.causal_critic"),
            num_timesteps=get("model.num_timesteps"),
            shift=get("model.shift"),
        )
        train = TrainConfig(
            iterations=get("train.iterations"),
            batch_size=get("train.batch_size"),
            k_interval=get("train.k_interval"),
            lambda_g=get("train.lambda_g"),
            lambda_d=get("train.lambda_d"),
            lambda_fkl=get("train.lambda_fkl"),
            lr_generator=get("train.lr_generator"),
            lr_critic=get("train.lr_critic"),
            beta1=get("train.beta1"),
            beta2=get("train.beta2"),
            weight_decay=get("train.weight_decay"),
            ema_decay=get("train.ema_decay"),
            ema_start=get("train.ema_start"),
            t_min=get("train.t_min"),
            t_max=get("train.t_max"),
            discriminator_target=get("train.discriminator_target"),
            init_steps=get("train.init_steps"),
            init_pairs=get("train.init_pairs"),
            checkpoint_every=get("train.checkpoint_every"),
        )
        warm = get("sample.warmup_timesteps")
        sample = SampleConfig(
            first_block_steps=get("sample.first_block_steps"),
            later_block_steps=get("sample.later_block_steps"),
            num_sequences=get("sample.num_sequences"),
            warmup_timesteps=tuple(warm) if warm else None,
        )
    except ContractError as e:
        raise ConfigError(str(e)) from e
    paths = {
        "out_dir": get("paths.out_dir"),
        "log": get("paths.log"),
        "checkpoint": get("paths.checkpoint"),
        "checkpoint_ema": get("paths.checkpoint_ema"),
        "samples": get("paths.samples"),
    }
    return ExperimentConfig(seed=get("run.seed"), world=world, model=model,
                            train=train, sample=sample, paths=paths)


def load_experiment(path: str, seed_override: int | None = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    values = parse_config_text(text, source=path)
    if seed_override is not None:
        values["run.seed"] = int(seed_override)
    return build_experiment(values)
