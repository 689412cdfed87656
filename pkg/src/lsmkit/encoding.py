"""Rate coding of feature vectors into spike rasters, plus raster I/O.

The encoder is the Bernoulli-per-step discretization of a Poisson
process: neuron ``d`` fires at each of ``window`` timesteps independently
with probability ``rate_scale(features[d])``. Rasters are ``(D, window)``
float arrays over ``{0, 1}``.

Raster files come in two documented flavours:

* binary — the standard ``.npy`` layout (dense, row = neuron,
  column = timestep);
* CSV — one row per neuron, comma-separated ``%.17g`` values, with a
  ``# raster rows=<L> cols=<T>`` comment header.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ValidationError

__all__ = [
    "EncoderConfig",
    "encode",
    "rate_summary",
    "save_raster",
    "load_raster",
    "raster_to_csv",
    "raster_from_csv",
]


@dataclass(frozen=True)
class EncoderConfig:
    """Encoding window length, rate mapping and RNG seed.

    ``rate_scale`` maps a normalized feature in [0, 1] to a per-step
    spike probability; ``None`` means identity. Probabilities are clamped
    to [0, 1] after mapping.
    """

    window: int = 50
    rate_scale: Callable[[np.ndarray], np.ndarray] | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 1:
            raise ValidationError(f"window must be a positive integer, got {self.window}")
        object.__setattr__(self, "window", int(self.window))


def encode(features, cfg: EncoderConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Encode one feature vector into a ``(D, window)`` binary raster.

    Deterministic for a fixed seed; pass an explicit ``rng`` to stream
    several windows from one generator (callers own the seeding).
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 1:
        raise ValidationError(f"features must be a 1-D vector, got shape {features.shape}")
    if not np.isfinite(features).all() or (features < 0).any() or (features > 1).any():
        raise ValidationError("features must lie in [0, 1]")
    p = features if cfg.rate_scale is None else np.asarray(cfg.rate_scale(features), dtype=np.float64)
    p = np.clip(p, 0.0, 1.0)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    return (rng.random((features.size, cfg.window)) < p[:, None]).astype(np.float64)


def rate_summary(train) -> np.ndarray:
    """Mean spike count per neuron over the time axis of a raster."""
    train = np.asarray(train, dtype=np.float64)
    if train.ndim < 2 or train.shape[1] == 0:
        raise ValidationError("raster must be (neurons, timesteps[, batch]) and non-empty")
    return train.mean(axis=1)


def save_raster(path, raster) -> None:
    """Write a raster to the dense binary (.npy) layout."""
    np.save(path, np.asarray(raster, dtype=np.float64))


def load_raster(path) -> np.ndarray:
    return np.load(path)


def raster_to_csv(path, raster) -> None:
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim != 2:
        raise ValidationError("CSV export handles 2-D rasters only")
    header = f"raster rows={raster.shape[0]} cols={raster.shape[1]}"
    np.savetxt(path, raster, fmt="%.17g", delimiter=",", header=header)


def raster_from_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#"))
