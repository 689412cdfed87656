"""Per-connection synaptic delay lines.

Conceptually the buffer is a time-indexed queue of L x L signal matrices:
pushing the layer output broadcasts it across target rows, and a static
binary mask (one slot per connection, at depth equal to its delay) picks
each synapse's arrival out of the right slot. A spike emitted by source
``j`` at step ``t`` therefore surfaces at target ``i`` exactly at
``t + delay[i, j]``.

The realization is cheaper than the picture: since every row of a pushed
matrix repeats the same layer-output vector, one vector per slot is
stored in a circular array and the mask collapses to per-delay index
lists. ``pop`` reproduces the full masked L x L arrival matrix;
``slot_at_age`` exposes the raw delayed vectors so callers can fold their
own weights into the gather without materializing L x L intermediates.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError

__all__ = ["DelayBuffer"]


class DelayBuffer:
    """Circular buffer of past layer outputs with mask-based delayed pop.

    Parameters
    ----------
    delay:
        ``(L, L)`` integer delay matrix (scipy sparse or dense); entry
        ``[i, j] = d >= 1`` means source ``j`` reaches target ``i`` after
        ``d`` steps, ``0`` means no connection.
    batch:
        Optional batch width; slots then hold ``(L, B)`` lanes.
    """

    def __init__(self, delay, batch: int | None = None):
        delay = sp.csr_matrix(delay)
        if delay.shape[0] != delay.shape[1]:
            raise ValidationError(f"delay matrix must be square, got {delay.shape}")
        data = delay.tocoo()
        if data.nnz and data.data.min() < 1:
            raise ValidationError("delays of existing connections must be >= 1")
        self.n_neurons = delay.shape[0]
        self.batch = batch
        self.t_max = int(data.data.max()) if data.nnz else 1
        # mask, folded by delay: row/col indices of connections at each age
        self._rows_at = {}
        self._cols_at = {}
        for d in range(1, self.t_max + 1):
            at_d = data.data == d
            if at_d.any():
                self._rows_at[d] = data.row[at_d]
                self._cols_at[d] = data.col[at_d]
        shape = (self.t_max, self.n_neurons)
        if batch is not None:
            shape += (batch,)
        self._slots = np.zeros(shape)
        self._cursor = 0  # number of pushes so far

    @property
    def cursor(self) -> int:
        return self._cursor

    @property
    def delays_present(self):
        return sorted(self._rows_at)

    def push(self, n_t) -> None:
        """Enqueue the layer output for the current step."""
        n_t = np.asarray(n_t, dtype=np.float64)
        if n_t.shape != self._slots.shape[1:]:
            raise ValidationError(
                f"pushed vector shape {n_t.shape} != expected {self._slots.shape[1:]}"
            )
        self._slots[self._cursor % self.t_max] = n_t
        self._cursor += 1

    def slot_at_age(self, age: int) -> np.ndarray:
        """Layer output pushed ``age`` steps ago (zeros before history starts)."""
        if not 1 <= age <= self.t_max:
            raise ValidationError(f"age must be in [1, {self.t_max}], got {age}")
        if age > self._cursor:
            return np.zeros(self._slots.shape[1:])
        return self._slots[(self._cursor - age) % self.t_max]

    def pop(self) -> np.ndarray:
        """Masked arrival matrix for the current step.

        ``pop()[i, j]`` is the signal source ``j`` emitted
        ``delay[i, j]`` steps ago, for existing connections; zero
        everywhere else. Call before ``push`` each step.
        """
        out_shape = (self.n_neurons, self.n_neurons)
        if self.batch is not None:
            out_shape += (self.batch,)
        p_e = np.zeros(out_shape)
        for d, rows in self._rows_at.items():
            slot = self.slot_at_age(d)
            p_e[rows, self._cols_at[d]] = slot[self._cols_at[d]]
        return p_e

    def reset(self) -> None:
        self._slots[:] = 0.0
        self._cursor = 0
