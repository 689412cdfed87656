"""Leaky integrate-and-fire layer kernels.

Two interchangeable implementations of the same neuron dynamics:

* ``scalar_step`` — the generic one-neuron-at-a-time update, written with
  plain Python floats and branches. Slow, obviously correct, and used as
  the reference everywhere (tests, benchmark baseline).
* ``parallel_step`` — the whole-layer update expressed purely as vector
  arithmetic, comparisons and selects on numpy arrays (optionally with a
  trailing batch axis). No per-element branching anywhere.

Both paths evaluate the membrane update in the identical association
order, so their outputs and states are bit-for-bit equal (``==``), not
merely close. Threshold crossing is strict: a membrane landing exactly on
``v_th`` does not fire. This keeps the vector path's
``max(0, v - v_th) -> nonzero`` spike detection and the scalar branch in
exact agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "LifParams",
    "ScalarState",
    "LayerState",
    "scalar_step",
    "parallel_step",
    "run_spike_train",
    "run_spike_train_scalar",
]


@dataclass(frozen=True)
class LifParams:
    """Scalar constants of a LIF neuron.

    ``tau_ref`` is an integer number of timesteps; ``dt`` and ``tau_m``
    are in timestep units so the defaults integrate one step at a time.
    """

    v_th: float = 0.1
    v_rest: float = 0.0
    v_spike: float = 1.0
    tau_m: float = 5.0
    r_m: float = 10.0
    tau_ref: int = 1
    dt: float = 1.0

    def __post_init__(self):
        if not all(
            math.isfinite(x)
            for x in (self.v_th, self.v_rest, self.v_spike, self.tau_m, self.r_m, self.dt)
        ):
            raise ValidationError("LifParams fields must be finite")
        if self.v_th <= self.v_rest:
            raise ValidationError(
                f"v_th ({self.v_th}) must be greater than v_rest ({self.v_rest})"
            )
        if self.tau_m <= 0 or self.r_m <= 0 or self.dt <= 0:
            raise ValidationError("tau_m, r_m and dt must be positive")
        if int(self.tau_ref) != self.tau_ref or self.tau_ref < 0:
            raise ValidationError(f"tau_ref must be a non-negative integer, got {self.tau_ref}")
        object.__setattr__(self, "tau_ref", int(self.tau_ref))


@dataclass
class ScalarState:
    """State of one neuron: membrane voltage and refraction countdown."""

    v: float = 0.0
    r_c: int = 0

    @classmethod
    def resting(cls, params: LifParams) -> "ScalarState":
        return cls(v=params.v_rest, r_c=0)


def scalar_step(state: ScalarState, params: LifParams, i_t: float):
    """Advance a single neuron by one timestep.

    Returns ``(new_state, out)`` where ``out`` is ``v_spike`` on a spike
    step and ``0.0`` otherwise.

    A refracting neuron (``r_c > 0``) is held at ``v_rest`` for the step
    and its counter ticks down; the counter itself carries the refractory
    flag, so ``tau_ref = 0`` cleanly means "no refractory period".
    """
    if not (math.isfinite(state.v) and math.isfinite(i_t)):
        raise ValidationError("scalar_step requires finite state and input current")
    if state.r_c > 0:
        return ScalarState(v=params.v_rest, r_c=state.r_c - 1), 0.0
    dv = (-state.v + params.v_rest + i_t * params.r_m) / params.tau_m
    v = state.v + dv * params.dt
    if max(0.0, v - params.v_th) > 0.0:
        return ScalarState(v=params.v_spike, r_c=params.tau_ref), params.v_spike
    return ScalarState(v=v, r_c=0), 0.0


@dataclass
class LayerState:
    """Per-neuron voltages and refraction counters for a layer.

    ``v`` and ``r_c`` are shaped ``(L,)`` or ``(L, B)`` for batched
    operation; ``r_c`` is integer-typed.
    """

    v: np.ndarray
    r_c: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.float64)
        self.r_c = np.asarray(self.r_c, dtype=np.int64)
        if self.v.shape != self.r_c.shape:
            raise ValidationError(
                f"v shape {self.v.shape} != r_c shape {self.r_c.shape}"
            )
        if self.v.ndim not in (1, 2):
            raise ValidationError("layer state must be (L,) or (L, B)")

    @property
    def l(self) -> int:
        return self.v.shape[0]

    @property
    def b(self) -> int:
        return 1 if self.v.ndim == 1 else self.v.shape[1]

    @classmethod
    def resting(cls, n_neurons: int, params: LifParams, batch: int | None = None) -> "LayerState":
        shape = (n_neurons,) if batch is None else (n_neurons, batch)
        return cls(v=np.full(shape, params.v_rest), r_c=np.zeros(shape, dtype=np.int64))

    def copy(self) -> "LayerState":
        return LayerState(v=self.v.copy(), r_c=self.r_c.copy())


def parallel_step(state: LayerState, params: LifParams, i_t) -> tuple[LayerState, np.ndarray]:
    """Advance a whole layer by one timestep with vector operations only.

    Returns ``(new_state, n_t)`` where every element of ``n_t`` is either
    ``0`` or ``v_spike``. Matches ``scalar_step`` applied neuron by neuron
    exactly (same association order, same strict threshold).
    """
    i_t = np.asarray(i_t, dtype=np.float64)
    if i_t.shape != state.v.shape:
        raise ValidationError(
            f"input current shape {i_t.shape} does not match state shape {state.v.shape}"
        )

    v = state.v
    r_c = state.r_c

    dv = (-v + params.v_rest + i_t * params.r_m) / params.tau_m
    v_int = v + dv * params.dt

    refracting = r_c != 0
    r_f = refracting.astype(np.float64)
    v_bar = (1.0 - r_f) * v_int + r_f * params.v_rest

    spiking = np.maximum(0.0, v_bar - params.v_th) > 0.0
    s = spiking.astype(np.float64)
    n_t = s * params.v_spike

    r_c_dec = r_c - refracting
    v_next = (1.0 - s) * v_bar + n_t
    r_c_next = spiking * params.tau_ref + r_c_dec

    return LayerState(v=v_next, r_c=r_c_next), n_t


def run_spike_train(state: LayerState, params: LifParams, currents) -> tuple[LayerState, np.ndarray]:
    """Fold ``parallel_step`` over the time axis of an input sequence.

    ``currents`` is ``(L, T)`` or ``(L, T, B)``; the returned raster has
    the same shape, with entries in ``{0, v_spike}``. The input state is
    not mutated; the advanced state is returned alongside the raster.
    """
    currents = np.asarray(currents, dtype=np.float64)
    if currents.ndim not in (2, 3):
        raise ValidationError("currents must be (L, T) or (L, T, B)")
    if currents.shape[0] != state.l:
        raise ValidationError(
            f"currents have {currents.shape[0]} neurons, state has {state.l}"
        )
    n_steps = currents.shape[1]
    if n_steps < 1:
        raise ValidationError("input sequence must have at least one timestep")
    batched = currents.ndim == 3
    if batched != (state.v.ndim == 2) or (batched and currents.shape[2] != state.b):
        raise ValidationError("batch axis of currents does not match state")
    if not np.isfinite(currents).all():
        raise ValidationError("currents must be finite")

    raster = np.empty_like(currents)
    for t in range(n_steps):
        state, out = parallel_step(state, params, currents[:, t] if not batched else currents[:, t, :])
        if batched:
            raster[:, t, :] = out
        else:
            raster[:, t] = out
    return state, raster


def run_spike_train_scalar(state: LayerState, params: LifParams, currents) -> np.ndarray:
    """Generic per-neuron reference: the same fold done with ``scalar_step``.

    Iterates every neuron (and batch lane) with plain Python branches.
    Deliberately unvectorized — this is the baseline the parallel kernel
    is benchmarked and verified against.
    """
    currents = np.asarray(currents, dtype=np.float64)
    if currents.ndim not in (2, 3):
        raise ValidationError("currents must be (L, T) or (L, T, B)")
    if currents.shape[0] != state.l:
        raise ValidationError(
            f"currents have {currents.shape[0]} neurons, state has {state.l}"
        )
    if not np.isfinite(currents).all():
        raise ValidationError("currents must be finite")

    batched = currents.ndim == 3
    if batched != (state.v.ndim == 2):
        raise ValidationError("batch axis of currents does not match state")

    raster = np.zeros_like(currents)
    n_steps = currents.shape[1]
    if batched:
        lanes = [
            (i, b, ScalarState(v=float(state.v[i, b]), r_c=int(state.r_c[i, b])))
            for i in range(state.l)
            for b in range(state.b)
        ]
        for i, b, neuron in lanes:
            for t in range(n_steps):
                neuron, out = scalar_step(neuron, params, float(currents[i, t, b]))
                raster[i, t, b] = out
    else:
        for i in range(state.l):
            neuron = ScalarState(v=float(state.v[i]), r_c=int(state.r_c[i]))
            for t in range(n_steps):
                neuron, out = scalar_step(neuron, params, float(currents[i, t]))
                raster[i, t] = out
    return raster
