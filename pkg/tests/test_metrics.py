"""Distribution metrics: sliced distance, motion proxy, logit gap summary."""

import numpy as np
import pytest

from ardistill import (
    TrainLog,
    flatten_sequences,
    logit_gap_stats,
    motion_proxy,
    sliced_wasserstein,
)
from ardistill.errors import ContractError
from ardistill.trainer import TrainLogRow


def test_identical_sets_have_zero_distance():
    x = np.random.default_rng(0).standard_normal((50, 3))
    assert sliced_wasserstein(x, x.copy(), rng=np.random.default_rng(1)) == 0.0
    # multiset equality: row order must not matter (up to summation dust)
    assert sliced_wasserstein(x, x[::-1], rng=np.random.default_rng(1)) < 1e-12


def test_translation_shows_up_as_distance():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2000, 2))
    shift = np.array([3.0, 0.0])
    d = sliced_wasserstein(x, x + shift, n_projections=256,
                           rng=np.random.default_rng(3))
    # E|<u, shift>| for uniform unit u in 2-D is 2*|shift|/pi
    assert d == pytest.approx(2.0 * 3.0 / np.pi, rel=0.1)


def test_sliced_distance_is_symmetric_and_seeded():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((40, 3))
    b = rng.standard_normal((60, 3)) + 0.5
    d1 = sliced_wasserstein(a, b, rng=np.random.default_rng(5))
    d2 = sliced_wasserstein(b, a, rng=np.random.default_rng(5))
    d3 = sliced_wasserstein(a, b, rng=np.random.default_rng(5))
    assert d1 == d2 == d3
    assert d1 > 0.0


def test_sliced_distance_validates_inputs():
    with pytest.raises(ContractError):
        sliced_wasserstein(np.zeros((3, 2)), np.zeros((3, 3)))
    with pytest.raises(ContractError):
        sliced_wasserstein(np.zeros((0, 2)), np.zeros((3, 2)))
    with pytest.raises(ContractError):
        sliced_wasserstein(np.zeros((3, 2)), np.zeros((3, 2)), n_projections=0)
    with pytest.raises(ContractError):
        sliced_wasserstein(np.zeros(3), np.zeros(3))


def test_flatten_sequences_shapes():
    seqs = np.arange(24.0).reshape(2, 3, 4)
    flat = flatten_sequences(seqs)
    assert flat.shape == (2, 12)
    assert np.array_equal(flat[0], np.arange(12.0))
    with pytest.raises(ContractError):
        flatten_sequences(np.zeros((2, 3)))


def test_motion_proxy_hand_value():
    seqs = np.array([[[0.0, 0.0], [3.0, 4.0]]])  # one step of norm 5, dim 2
    assert motion_proxy(seqs) == pytest.approx(5.0 / np.sqrt(2.0), abs=1e-12)
    static = np.ones((4, 6, 3))
    assert motion_proxy(static) == 0.0
    with pytest.raises(ContractError):
        motion_proxy(np.ones((2, 1, 3)))


def test_logit_gap_stats_on_plain_arrays():
    gaps = np.array([0.0, 1.0, 2.0, 3.0])
    mean, std = logit_gap_stats(gaps, window=2)
    assert mean == pytest.approx(2.5)
    assert std == pytest.approx(0.5)  # population std over the window
    with pytest.raises(ContractError):
        logit_gap_stats(gaps, window=0)
    with pytest.raises(ContractError):
        logit_gap_stats(gaps, window=5)


def test_logit_gap_stats_reads_training_logs():
    log = TrainLog()
    for i, g in enumerate((0.5, 1.5, 2.5)):
        log.append(TrainLogRow(iter=i, gap=g))
    mean, std = logit_gap_stats(log, window=3)
    assert mean == pytest.approx(1.5)
    assert std == pytest.approx(np.std([0.5, 1.5, 2.5]))
