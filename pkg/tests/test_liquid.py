"""Liquid runtime tests against a naive shifting-queue reference."""

import numpy as np
import pytest

from lsmkit import LayerState, LifParams, ValidationError, run_spike_train
from lsmkit.encoding import EncoderConfig, encode
from lsmkit.lif import parallel_step
from lsmkit.liquid import Liquid
from lsmkit.topology import BuildConfig, build

PARAMS = LifParams()


def _small_topology(seed=0, dims=(3, 3, 3), input_size=12, **kw):
    return build(BuildConfig(dims=dims, input_size=input_size, seed=seed, **kw))


class ShiftingQueueReference:
    """Literal implementation: a 3-D queue physically shifted every step.

    Keeps the full (t_max, L, L) buffer of broadcast output matrices and
    a static (L, L, t_max) binary mask selecting, per connection, the
    slot whose age equals its delay. O(L^2 * t_max) per step.
    """

    def __init__(self, topo, params):
        self.params = params
        self.w_l = topo.w_l.toarray()
        self.w_li = topo.w_li.toarray()
        n = topo.n_neurons
        self.t_max = max(topo.t_max, 1)
        delays = topo.delay.toarray()
        self.mask = np.zeros((n, n, self.t_max))
        for age in range(1, self.t_max + 1):
            self.mask[:, :, age - 1] = delays == age
        self.queue = np.zeros((self.t_max, n, n))  # queue[a] = pushed a+1 steps ago
        self.state = LayerState.resting(n, params)
        self.n = n

    def step(self, x):
        popped = np.zeros((self.n, self.n))
        for age in range(self.t_max):
            popped += self.mask[:, :, age] * self.queue[age]
        recurrent = (self.w_l * popped).sum(axis=1)  # row sums of W ⊙ pE
        self.state, n_t = parallel_step(self.state, self.params, recurrent + self.w_li @ x)
        self.queue[1:] = self.queue[:-1]  # shift one place along time
        self.queue[0] = np.tile(n_t, (self.n, 1))  # broadcast across rows
        return n_t


def test_zero_input_zero_forever():
    liq = Liquid(_small_topology(), PARAMS)
    raster = liq.run_sequence(np.zeros((12, 40)))
    assert not raster.any()


def test_strong_input_spike_fires_target_immediately():
    topo = _small_topology(seed=4)
    target = int(np.flatnonzero(topo.is_primary)[0])
    # one input spike through a synapse just above the one-step threshold
    # current tau_m * v_th / (r_m * dt) = 0.05
    w_li = topo.w_li.tolil()
    w_li[:, :] = 0.0
    w_li[target, 0] = 0.06
    topo.w_li = w_li.tocsr()
    liq = Liquid(topo, PARAMS)
    x = np.zeros(12)
    x[0] = 1.0
    out = liq.step(x)
    assert out[target] == PARAMS.v_spike
    assert out.sum() == PARAMS.v_spike


def test_matches_shifting_queue_reference():
    rng = np.random.default_rng(8)
    topo = _small_topology(seed=9, dims=(3, 3, 2), input_size=10)
    liq = Liquid(topo, PARAMS)
    ref = ShiftingQueueReference(topo, PARAMS)
    inputs = (rng.random((10, 50)) < 0.4).astype(float)
    raster = liq.run_sequence(inputs)
    for t in range(50):
        expected = ref.step(inputs[:, t])
        assert np.array_equal(raster[:, t], expected), f"diverged at step {t}"


def test_reference_match_with_strong_recurrence():
    # crank the weight scale so recurrent spikes actually propagate
    rng = np.random.default_rng(10)
    topo = _small_topology(seed=12, dims=(3, 3, 3), input_size=8, w_scale=0.05)
    liq = Liquid(topo, PARAMS)
    ref = ShiftingQueueReference(topo, PARAMS)
    inputs = (rng.random((8, 60)) < 0.5).astype(float)
    raster = liq.run_sequence(inputs)
    assert raster.sum() > 0
    for t in range(60):
        assert np.array_equal(raster[:, t], ref.step(inputs[:, t]))


def test_determinism_and_reset():
    topo = _small_topology(seed=5)
    rng = np.random.default_rng(2)
    inputs = (rng.random((12, 30)) < 0.5).astype(float)
    liq = Liquid(topo, PARAMS)
    a = liq.run_sequence(inputs)
    liq.reset()
    assert liq.steps_run == 0
    assert not liq.state.v.any() if PARAMS.v_rest == 0 else True
    b = liq.run_sequence(inputs)
    assert np.array_equal(a, b)


def test_reset_then_zero_input_is_silent():
    liq = Liquid(_small_topology(seed=5), PARAMS)
    rng = np.random.default_rng(3)
    liq.run_sequence((rng.random((12, 20)) < 0.8).astype(float))
    liq.reset()
    assert not liq.run_sequence(np.zeros((12, 10))).any()


def test_split_run_equivalence():
    topo = _small_topology(seed=6, w_scale=0.05)
    rng = np.random.default_rng(4)
    inputs = (rng.random((12, 40)) < 0.5).astype(float)
    one = Liquid(topo, PARAMS)
    full = one.run_sequence(inputs)
    two = Liquid(topo, PARAMS)
    first = two.run_sequence(inputs[:, :17])
    second = two.run_sequence(inputs[:, 17:])
    assert np.array_equal(full, np.concatenate([first, second], axis=1))
    assert np.array_equal(two.activation_log, full)


def test_reset_breaks_continuation():
    # A then B (continued) differs from A, reset, B when A excited the liquid.
    topo = _small_topology(seed=7, w_scale=0.08)
    rng = np.random.default_rng(6)
    a = (rng.random((12, 25)) < 0.7).astype(float)
    b = (rng.random((12, 25)) < 0.2).astype(float)
    cont = Liquid(topo, PARAMS)
    raster_a = cont.run_sequence(a)
    assert raster_a.any(), "stimulus A must excite the liquid for this test"
    continued = cont.run_sequence(b)
    fresh = Liquid(topo, PARAMS)
    fresh.run_sequence(a)
    fresh.reset()
    isolated = fresh.run_sequence(b)
    assert not np.array_equal(continued, isolated)


def test_feedforward_reduction_matches_lif_oracle():
    # Zeroing the liquid weights reduces the runtime to a pure
    # feedforward LIF layer on W_LI @ inputs.
    topo = _small_topology(seed=13)
    topo.w_l = topo.w_l.multiply(0.0).tocsr()
    rng = np.random.default_rng(14)
    inputs = (rng.random((12, 35)) < 0.6).astype(float)
    liq = Liquid(topo, PARAMS)
    raster = liq.run_sequence(inputs)
    currents = topo.w_li.toarray() @ inputs
    state = LayerState.resting(topo.n_neurons, PARAMS)
    _, expected = run_spike_train(state, PARAMS, currents)
    assert np.array_equal(raster, expected)


def test_inhibitory_contributions_never_positive():
    topo = _small_topology(seed=15, w_scale=0.08)
    liq = Liquid(topo, PARAMS)
    rng = np.random.default_rng(16)
    w_dense = topo.w_l.toarray()
    inh = ~topo.is_excitatory
    for t in range(60):
        p_e = liq.buffer.pop()
        contributions = (w_dense[:, inh] * p_e[:, inh]).sum(axis=1)
        assert (contributions <= 0).all()
        liq.step((rng.random(12) < 0.6).astype(float))


def test_activity_bounded_with_default_parameters():
    # Stock build + Poisson input at rate 0.1: the liquid neither dies
    # nor saturates over 500 steps.
    topo = build(BuildConfig(seed=1))
    liq = Liquid(topo, PARAMS)
    cfg = EncoderConfig(window=500, seed=99)
    inputs = encode(np.full(512, 0.1), cfg)
    raster = liq.run_sequence(inputs)
    mean_rate = raster.mean() / PARAMS.v_spike
    assert 0.0 < mean_rate < 0.5


def test_input_shape_validation():
    liq = Liquid(_small_topology(), PARAMS)
    with pytest.raises(ValidationError):
        liq.step(np.zeros(5))
    with pytest.raises(ValidationError):
        liq.run_sequence(np.zeros((12, 0)))
