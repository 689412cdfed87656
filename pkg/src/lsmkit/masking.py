"""Monotone class-sequence constraint on per-step predictions.

For the three-stage labelling problem (before / during / after), the
predicted label of a sequence may never move backwards. A deterministic
mask derived from the previous prediction zeroes out the disallowed
classes before the argmax:

    last = 0 -> classes {0, 1} stay, last = 1 -> {1, 2}, last = 2 -> {2};
    before any prediction, all three classes are admissible.

No renormalization happens (it cannot change an argmax); ties break
toward the lower class index.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

__all__ = ["N_CLASSES", "mask_for", "SemanticMask", "decode_sequence"]

N_CLASSES = 3

_MASKS = {
    None: np.array([1.0, 1.0, 1.0]),
    0: np.array([1.0, 1.0, 0.0]),
    1: np.array([0.0, 1.0, 1.0]),
    2: np.array([0.0, 0.0, 1.0]),
}


def mask_for(last) -> np.ndarray:
    """Binary admissibility vector given the previous prediction (or None)."""
    if last is not None and last not in (0, 1, 2):
        raise ValidationError(f"last prediction must be None or in {{0, 1, 2}}, got {last!r}")
    return _MASKS[last].copy()


class SemanticMask:
    """Per-sequence state: remembers the last emitted class."""

    def __init__(self):
        self.last: int | None = None

    def apply(self, p_cnn) -> int:
        """Masked argmax of a class-probability vector; updates the state."""
        p = np.asarray(p_cnn, dtype=np.float64)
        if p.shape != (N_CLASSES,):
            raise ValidationError(f"expected a {N_CLASSES}-class probability vector, got {p.shape}")
        if not np.isfinite(p).all() or (p < 0).any():
            raise ValidationError("probabilities must be finite and non-negative")
        masked = mask_for(self.last) * p
        cls = int(masked.argmax())
        self.last = cls
        return cls

    def reset(self) -> None:
        self.last = None


def decode_sequence(probs, enabled: bool = True) -> np.ndarray:
    """Labels for a (T, 3) probability sequence, masked or plain argmax."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] != N_CLASSES:
        raise ValidationError(f"expected (T, {N_CLASSES}) probabilities, got {probs.shape}")
    if not enabled:
        return probs.argmax(axis=1)
    state = SemanticMask()
    return np.array([state.apply(p) for p in probs], dtype=np.int64)
