"""The recurrent liquid runtime: delayed synapses around a LIF layer.

Each step, in order: collect the recurrent signals arriving through the
delay buffer, weight them, add the input-layer drive, advance the LIF
layer, enqueue its fresh output, and log it. Spikes therefore influence
other neurons no earlier than one step after emission (minimum delay 1).

The per-step recurrent current is computed through a delay-indexed
gather: the liquid weight matrix is pre-split by connection delay, and
each split multiplies the layer output of the matching age. This is
equivalent to masking the full queue and row-summing, without building
the L x L arrival matrix every step.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .delays import DelayBuffer
from .errors import ValidationError
from .lif import LayerState, LifParams, parallel_step
from .topology import ReservoirTopology

__all__ = ["Liquid"]


class Liquid:
    """One reservoir instance: layer state + delay buffer + activation log.

    Not thread-shareable; clone one ``Liquid`` per worker (the topology
    itself is read-only and can be shared).
    """

    def __init__(self, topology: ReservoirTopology, params: LifParams | None = None):
        self.topology = topology
        self.params = params if params is not None else LifParams()
        self.n_neurons = topology.n_neurons
        self.input_size = topology.w_li.shape[1]
        self._w_li = topology.w_li.tocsr()
        self._w_by_delay = self._split_weights_by_delay(topology)
        self.buffer = DelayBuffer(topology.delay)
        self.state = LayerState.resting(self.n_neurons, self.params)
        self._log: list[np.ndarray] = []

    @staticmethod
    def _split_weights_by_delay(topology: ReservoirTopology):
        coo = topology.w_l.tocoo()
        delays = topology.delay.toarray()[coo.row, coo.col] if coo.nnz else np.array([])
        splits = []
        n = topology.n_neurons
        for d in np.unique(delays).astype(int):
            at_d = delays == d
            m = sp.csr_matrix(
                (coo.data[at_d], (coo.row[at_d], coo.col[at_d])), shape=(n, n)
            )
            splits.append((int(d), m))
        return splits

    def recurrent_current(self) -> np.ndarray:
        """Weighted sum of signals arriving through the buffer this step."""
        current = np.zeros(self.n_neurons)
        for d, w_d in self._w_by_delay:
            current += w_d @ self.buffer.slot_at_age(d)
        return current

    def step(self, input_spikes) -> np.ndarray:
        """Advance one timestep; returns the layer output vector."""
        x = np.asarray(input_spikes, dtype=np.float64)
        if x.shape != (self.input_size,):
            raise ValidationError(
                f"input vector shape {x.shape} != ({self.input_size},)"
            )
        i_total = self.recurrent_current() + self._w_li @ x
        self.state, n_t = parallel_step(self.state, self.params, i_total)
        self.buffer.push(n_t)
        self._log.append(n_t)
        return n_t

    def run_sequence(self, inputs) -> np.ndarray:
        """Fold ``step`` over an ``(input_size, T)`` spike train.

        Returns the ``(L, T)`` raster of this call; the full log since
        the last reset stays available as ``activation_log``.
        """
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[0] != self.input_size:
            raise ValidationError(
                f"inputs must be ({self.input_size}, T), got {inputs.shape}"
            )
        if inputs.shape[1] < 1:
            raise ValidationError("input sequence must have at least one step")
        outs = [self.step(inputs[:, t]) for t in range(inputs.shape[1])]
        return np.stack(outs, axis=1)

    @property
    def activation_log(self) -> np.ndarray:
        """All layer outputs since the last reset, shaped (L, steps)."""
        if not self._log:
            return np.zeros((self.n_neurons, 0))
        return np.stack(self._log, axis=1)

    @property
    def steps_run(self) -> int:
        return len(self._log)

    def reset(self) -> None:
        """Voltages to rest, counters and buffer to zero, log cleared."""
        self.state = LayerState.resting(self.n_neurons, self.params)
        self.buffer.reset()
        self._log.clear()
