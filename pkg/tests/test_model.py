"""Networks: config validation, cache semantics, NFE counting, checkpoints."""

import numpy as np
import pytest

from ardistill import (
    CriticNet,
    EndpointConfig,
    EndpointNet,
    GeneratorNet,
    ModelConfig,
    NoiseSchedule,
    load_net,
    read_checkpoint,
    rollout_one_step,
    save_checkpoint,
)
from ardistill import autodiff as ad
from ardistill.errors import ContractError
from ardistill.model import generator_forward


def tiny_config(**kw):
    base = dict(dim=2, width=16, layers=2, heads=2, max_frames=4, block_size=1,
                registers=2, tap_layers=(1, 2))
    base.update(kw)
    return ModelConfig(**base)


def test_model_config_validation():
    tiny_config()  # baseline is fine
    with pytest.raises(ContractError):
        tiny_config(width=15)  # odd width
    with pytest.raises(ContractError):
        tiny_config(heads=3)  # width not divisible
    with pytest.raises(ContractError):
        tiny_config(max_frames=5, block_size=2)
    with pytest.raises(ContractError):
        tiny_config(tap_layers=(1,))  # one tap for two registers
    with pytest.raises(ContractError):
        tiny_config(tap_layers=(0, 1))  # taps are 1-based
    with pytest.raises(ContractError):
        tiny_config(tap_layers=(1, 3))  # beyond the last layer


def test_schedule_property_reflects_config():
    sch = tiny_config(num_timesteps=500, shift=3.0).schedule
    assert isinstance(sch, NoiseSchedule)
    assert sch.num_timesteps == 500 and sch.shift == 3.0


def test_identical_rng_gives_identical_parameters():
    a = GeneratorNet(tiny_config(), rng=7)
    b = GeneratorNet(tiny_config(), rng=7)
    for k in a.params:
        assert np.array_equal(a.params[k].data, b.params[k].data)
    c = GeneratorNet(tiny_config(), rng=8)
    assert any(not np.array_equal(a.params[k].data, c.params[k].data) for k in a.params)


def test_param_arrays_returns_detached_copies():
    net = GeneratorNet(tiny_config(), rng=0)
    arrays = net.param_arrays()
    key = next(iter(arrays))
    arrays[key] += 100.0
    assert not np.array_equal(arrays[key], net.params[key].data)


def test_load_param_arrays_validates_names_and_shapes():
    net = GeneratorNet(tiny_config(), rng=0)
    good = net.param_arrays()
    net.load_param_arrays(good)
    bad = dict(good)
    bad.pop(next(iter(bad)))
    with pytest.raises(ContractError):
        net.load_param_arrays(bad)
    wrong = dict(good)
    key = next(iter(wrong))
    wrong[key] = np.zeros((1, 1, 1))
    with pytest.raises(ContractError):
        net.load_param_arrays(wrong)


def test_forward_full_shapes_and_per_frame_timesteps():
    net = GeneratorNet(tiny_config(), rng=1)
    rng = np.random.default_rng(0)
    # the velocity head starts at zero; jitter all params to get nonzero output
    noisy = {k: a + 0.05 * rng.standard_normal(a.shape)
             for k, a in net.param_arrays().items()}
    net.load_param_arrays(noisy)
    x = rng.standard_normal((3, 4, 2))
    cond = np.zeros(3, dtype=np.int64)
    v = net.forward_full(x, 500, cond)
    assert v.shape == (3, 4, 2)
    t_frames = np.zeros((3, 4), dtype=np.int64)
    t_frames[:, -1] = 1000
    v2 = net.forward_full(x, t_frames, cond)
    assert v2.shape == (3, 4, 2)
    assert not np.array_equal(v.data, v2.data)


def test_denoise_passes_count_and_context_passes_do_not():
    net = GeneratorNet(tiny_config(), rng=2)
    cond = np.zeros(2, dtype=np.int64)
    cache = net.init_cache(2)
    block = np.random.default_rng(1).standard_normal((2, 1, 2))
    assert net.nfe_count == 0
    net.forward_block(block, 1000, cond, cache, extend=False)
    assert net.nfe_count == 1
    assert cache.frames == 0  # denoise pass leaves the cache alone
    net.forward_block(block, 0, cond, cache, extend=True, want_velocity=False)
    assert net.nfe_count == 1
    assert cache.frames == 1
    net.reset_nfe()
    assert net.nfe_count == 0


def test_generator_forward_banks_context_and_counts_once():
    net = GeneratorNet(tiny_config(), rng=3)
    cond = np.zeros(2, dtype=np.int64)
    cache = net.init_cache(2)
    block = ad.Tensor(np.random.default_rng(2).standard_normal((2, 1, 2)))
    v = generator_forward(net, block, 1000, cond, cache)
    assert v.shape == (2, 1, 2)
    assert net.nfe_count == 1
    assert cache.frames == 1


def test_rollout_one_step_shapes_and_gradient_flow():
    net = GeneratorNet(tiny_config(), rng=4)
    rng = np.random.default_rng(3)
    cond = np.zeros(2, dtype=np.int64)
    noise = rng.standard_normal((2, 4, 1, 2))
    out = rollout_one_step(net, noise, cond)
    assert out.shape == (2, 4, 2)
    assert net.nfe_count == 4
    loss = (out * out).mean()
    loss.backward()
    assert any(p.grad is not None and np.any(p.grad != 0)
               for p in net.params.values())
    single = rollout_one_step(net, noise[0], np.zeros(1, dtype=np.int64))
    assert single.shape == (1, 4, 2)


def test_rollout_one_step_rejects_bad_inputs():
    net = GeneratorNet(tiny_config(), rng=5)
    cond = np.zeros(1, dtype=np.int64)
    with pytest.raises(ContractError):
        rollout_one_step(net, np.zeros((1, 4, 2, 2)), cond)  # wrong block size
    with pytest.raises(ContractError):
        rollout_one_step(net, np.zeros((1, 5, 1, 2)), cond)  # longer than max_frames
    with pytest.raises(ContractError):
        rollout_one_step(net, np.zeros((1, 4, 1, 2)), cond,
                         schedule=NoiseSchedule(num_timesteps=500))


def test_critic_outputs_velocity_and_one_logit_per_sample():
    net = CriticNet(tiny_config(), rng=6)
    x = np.random.default_rng(4).standard_normal((3, 4, 2))
    cond = np.zeros(3, dtype=np.int64)
    v, logits = net.forward(x, 700, cond)
    assert v.shape == (3, 4, 2)
    assert logits.shape == (3,)
    fn = net.velocity_fn(cond)
    out = fn(x, 700)
    assert isinstance(out, np.ndarray)
    assert np.allclose(out, v.data, atol=1e-15)


def test_endpoint_net_is_identity_at_time_zero():
    net = EndpointNet(EndpointConfig(dim=2), rng=7)
    x = np.random.default_rng(5).standard_normal((6, 2))
    assert np.array_equal(net.forward(x, 0.0).data, x)
    moved = net.forward(x, 1.0)
    assert moved.shape == (6, 2)


def test_checkpoint_round_trip_preserves_float32_parameters(tmp_path):
    net = GeneratorNet(tiny_config(), rng=8)
    path = str(tmp_path / "gen.ckpt")
    save_checkpoint(path, net, "generator")
    kind, cfg, params = read_checkpoint(path)
    assert kind == "generator"
    assert cfg["width"] == 16 and tuple(cfg["tap_layers"]) == (1, 2)
    for k, p in net.params.items():
        assert np.array_equal(params[k], p.data.astype("<f4").astype(np.float64))


def test_checkpoint_write_is_byte_stable(tmp_path):
    net = CriticNet(tiny_config(), rng=9)
    p1, p2 = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
    save_checkpoint(p1, net, "critic")
    save_checkpoint(p2, net, "critic")
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_loaded_net_reproduces_saved_behavior(tmp_path):
    net = GeneratorNet(tiny_config(), rng=10)
    path = str(tmp_path / "gen.ckpt")
    save_checkpoint(path, net, "generator")
    back = load_net(path, expect_kind="generator")
    x = np.random.default_rng(6).standard_normal((2, 4, 2))
    cond = np.zeros(2, dtype=np.int64)
    net.load_param_arrays(back.param_arrays())  # quantize the original too
    a = net.forward_full(x, 800, cond)
    b = back.forward_full(x, 800, cond)
    assert np.array_equal(a.data, b.data)


def test_corrupt_checkpoints_are_rejected(tmp_path):
    net = EndpointNet(EndpointConfig(dim=2), rng=11)
    path = str(tmp_path / "e.ckpt")
    save_checkpoint(path, net, "endpoint")
    blob = open(path, "rb").read()
    trunc = str(tmp_path / "trunc.ckpt")
    open(trunc, "wb").write(blob[:-8])
    with pytest.raises(ContractError):
        read_checkpoint(trunc)
    padded = str(tmp_path / "pad.ckpt")
    open(padded, "wb").write(blob + b"\x00" * 4)
    with pytest.raises(ContractError):
        read_checkpoint(padded)
    with pytest.raises(ContractError):
        load_net(path, expect_kind="generator")


def test_kind_must_be_known(tmp_path):
    net = GeneratorNet(tiny_config(), rng=12)
    with pytest.raises(ContractError):
        save_checkpoint(str(tmp_path / "x.ckpt"), net, "policy")
