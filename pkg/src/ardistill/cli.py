"""Command-line entry point.

Subcommands: train, sample, curvature, eval, ablate. Every output file is
a deterministic function of (config file, flags, seed): timing is never
written unless --timing is passed, files go through temp-then-rename, and
all randomness flows from the root seed through named substreams.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .config import load_experiment
from .curvature import curvature_stats, temporal_difference_record, write_stats_json
from .errors import ConfigError, ContractError, TrainingDiverged
from .fileio import atomic_write_text
from .metrics import flatten_sequences, logit_gap_stats, motion_proxy, sliced_wasserstein
from .model import load_net
from .sampler import SampleConfig, sample_batch_ffe, read_sequences_csv, write_sequences_csv
from .seeding import stream_rng
from .synthworld import read_trajectories_csv, sample_batch
from .trainer import Trainer, paper_hparams


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(obj, out_path: str | None) -> None:
    text = _dump_json(obj)
    if out_path:
        atomic_write_text(out_path, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_train(args) -> int:
    exp = load_experiment(args.config, seed_override=args.seed)
    train_cfg = paper_hparams(exp.train) if args.paper_hparams else exp.train
    out_dir = exp.paths["out_dir"]
    if out_dir and out_dir != ".":
        os.makedirs(out_dir, exist_ok=True)
    trainer = Trainer(exp.world, exp.model, train_cfg, exp.seed)
    log = trainer.run(
        log_path=exp.path("log"),
        ckpt_path=exp.path("checkpoint"),
        ckpt_ema_path=exp.path("checkpoint_ema"),
        timing=args.timing,
    )
    n_gen = len(log.generator_iterations())
    print(f"train: {train_cfg.iterations} iterations ({n_gen} generator updates), "
          f"seed {exp.seed}")
    print(f"train: log -> {exp.path('log')}")
    print(f"train: checkpoint -> {exp.path('checkpoint')}")
    print(f"train: ema checkpoint -> {exp.path('checkpoint_ema')}")
    return 0


def _cmd_sample(args) -> int:
    net = load_net(args.ckpt, expect_kind="generator")
    if args.config:
        exp = load_experiment(args.config)
        sample_cfg = exp.sample
    else:
        sample_cfg = SampleConfig()
    if args.num is not None:
        sample_cfg = dataclasses.replace(sample_cfg, num_sequences=args.num)
    n = sample_cfg.num_sequences
    cond = np.zeros(n, dtype=np.int64)
    seqs = sample_batch_ffe(net, n, cond, sample_cfg, args.seed)
    write_sequences_csv(args.out, seqs)
    print(f"sample: wrote {n} sequences ({seqs.shape[1]} frames, dim {seqs.shape[2]}) "
          f"to {args.out}")
    print(f"sample: denoising forward passes {net.nfe_count}")
    return 0


def _cmd_curvature(args) -> int:
    records = read_trajectories_csv(args.infile)
    if args.temporal_diff:
        records = [temporal_difference_record(r, frames=args.frames) for r in records]
    rng = stream_rng(args.seed, "bootstrap")
    stats = curvature_stats(records, threshold=args.threshold, n_boot=args.boot,
                            rng=rng, dt_weighted=args.dt_weighted)
    if args.out:
        write_stats_json(args.out, stats)
        print(f"curvature: {stats['n_trajectories']} trajectories -> {args.out}")
    else:
        sys.stdout.write(_dump_json(stats))
    return 0


def _cmd_eval(args) -> int:
    exp = load_experiment(args.config, seed_override=args.seed)
    seqs = read_sequences_csv(args.samples)
    n, frames, dim = seqs.shape
    if dim != exp.world.dim or frames != exp.world.frames:
        raise ContractError(
            f"sample file is ({frames} frames, dim {dim}), "
            f"world is ({exp.world.frames} frames, dim {exp.world.dim})")
    n_ref = 4 * n
    ref = sample_batch(exp.world, n_ref, stream_rng(exp.seed, "world"))
    sw = sliced_wasserstein(flatten_sequences(seqs), flatten_sequences(ref),
                            rng=stream_rng(exp.seed, "projections"))
    report = {
        "sliced_wasserstein": sw,
        "motion_proxy_samples": motion_proxy(seqs),
        "motion_proxy_reference": motion_proxy(ref),
        "n_samples": n,
        "n_reference": n_ref,
        "seed": exp.seed,
    }
    _emit(report, args.out)
    if args.out:
        print(f"eval: report -> {args.out}")
    return 0


def _ablate_train(exp, train_cfg, seed: int):
    trainer = Trainer(exp.world, exp.model, train_cfg, seed)
    trainer.ode_init()
    for i in range(train_cfg.iterations):
        trainer.log.append(trainer.train_step(i))
    return trainer


def _ema_samples(trainer, exp, seed: int) -> np.ndarray:
    from .model import GeneratorNet

    net = GeneratorNet(trainer.model_config, np.random.default_rng(0))
    net.load_param_arrays(trainer.ema)
    n = exp.sample.num_sequences
    cond = np.zeros(n, dtype=np.int64)
    return sample_batch_ffe(net, n, cond, exp.sample, seed)


def _cmd_ablate(args) -> int:
    exp = load_experiment(args.config, seed_override=args.seed)
    seeds = [exp.seed + i for i in range(args.seeds)]
    rows = []
    if args.which == "fkl":
        for s in seeds:
            per_seed = {"seed": s}
            for tag, lam in (("base", 0.0), ("fkl", 1.0)):
                cfg = dataclasses.replace(exp.train, lambda_fkl=lam)
                trainer = _ablate_train(exp, cfg, s)
                per_seed[f"motion_proxy_{tag}"] = motion_proxy(_ema_samples(trainer, exp, s))
            per_seed["fkl_lower"] = per_seed["motion_proxy_fkl"] < per_seed["motion_proxy_base"]
            rows.append(per_seed)
        wins = sum(r["fkl_lower"] for r in rows)
        report = {"ablation": "fkl", "iterations": exp.train.iterations,
                  "rows": rows, "fkl_lower_count": wins, "n_seeds": len(seeds)}
    else:
        window = min(100, exp.train.iterations)
        for s in seeds:
            per_seed = {"seed": s}
            for tag, target in (("real", "real-data"), ("self", "self-distilled")):
                cfg = dataclasses.replace(exp.train, discriminator_target=target)
                trainer = _ablate_train(exp, cfg, s)
                mean, std = logit_gap_stats(trainer.log, window)
                per_seed[f"gap_mean_{tag}"] = mean
                per_seed[f"gap_std_{tag}"] = std
            per_seed["real_larger"] = per_seed["gap_mean_real"] > per_seed["gap_mean_self"]
            rows.append(per_seed)
        wins = sum(r["real_larger"] for r in rows)
        report = {"ablation": "discriminator", "iterations": exp.train.iterations,
                  "gap_window": window, "rows": rows,
                  "real_larger_count": wins, "n_seeds": len(seeds)}
    _emit(report, args.out)
    if args.out:
        print(f"ablate: report -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ardistill",
                                description="one-step sequence distillation workbench")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run distillation training from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=None, help="override run.seed")
    t.add_argument("--paper-hparams", action="store_true",
                   help="use published full-scale optimizer settings")
    t.add_argument("--timing", action="store_true",
                   help="record wall_ms in the log (breaks byte-identity across runs)")
    t.set_defaults(func=_cmd_train)

    s = sub.add_parser("sample", help="draw sequences from a trained checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config", default=None, help="read the sample.* section from this file")
    s.add_argument("--num", type=int, default=None, help="override sample.num_sequences")
    s.set_defaults(func=_cmd_sample)

    c = sub.add_parser("curvature", help="trajectory curvature statistics from a CSV")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--out", default=None, help="stats JSON path (default: stdout)")
    c.add_argument("--threshold", type=float, default=0.9)
    c.add_argument("--boot", type=int, default=10000, help="bootstrap resamples")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--temporal-diff", action="store_true",
                   help="analyze frame-to-frame differences instead of raw states")
    c.add_argument("--frames", type=int, default=None,
                   help="frame count for --temporal-diff on flattened states")
    c.add_argument("--dt-weighted", action="store_true",
                   help="weight curvature mass by grid spacing")
    c.set_defaults(func=_cmd_curvature)

    e = sub.add_parser("eval", help="compare a sample file against fresh world draws")
    e.add_argument("--samples", required=True)
    e.add_argument("--config", required=True)
    e.add_argument("--seed", type=int, default=None, help="override run.seed")
    e.add_argument("--out", default=None, help="report JSON path (default: stdout)")
    e.set_defaults(func=_cmd_eval)

    a = sub.add_parser("ablate", help="paired single-flag comparison runs")
    a.add_argument("which", choices=("fkl", "discriminator"))
    a.add_argument("--config", required=True)
    a.add_argument("--seed", type=int, default=None, help="override run.seed")
    a.add_argument("--seeds", type=int, default=3, help="number of paired seeds")
    a.add_argument("--out", default=None, help="report JSON path (default: stdout)")
    a.set_defaults(func=_cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ContractError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TrainingDiverged as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
