"""Trainable spatio-temporal readout.

The liquid raster is first condensed into a "cube": per-neuron mean
firing rates over consecutive windows of ``w`` steps, reshaped onto the
reservoir's 3-D grid. Window index maps to the channel axis, so a raster
of ``T`` steps yields ``T/w`` input channels over an ``X*Y*Z`` volume.

The classifier head is deliberately small: one valid 3-D convolution,
rectifier, (inverted) dropout, global per-channel max pooling, and a
dense softmax layer. Only this head ever trains; gradients are computed
analytically here and checked against finite differences in the tests.
Training is plain mini-batch gradient descent with a step-decay learning
rate, fully deterministic for a fixed seed.
"""

from __future__ import annotations

import numpy as np

from .errors import TrainingDiverged, ValidationError
from .serialize import pack_meta, read_npz, unpack_meta, write_npz

__all__ = ["windowed_cube", "ReadoutModel", "cross_entropy", "save_model", "load_model"]

MODEL_FORMAT_VERSION = 1

_LOG_FLOOR = 1e-12


def windowed_cube(raster, dims, w: int, v_spike: float = 1.0) -> np.ndarray:
    """Window-averaged activation cube of shape ``(T/w, X, Y, Z)``.

    Entries are mean spike counts normalized by ``v_spike``, so they lie
    in [0, 1]. ``raster`` is ``(L, T)`` with ``L = X*Y*Z`` and ``w`` must
    divide ``T``.
    """
    raster = np.asarray(raster, dtype=np.float64)
    dims = tuple(int(d) for d in dims)
    if raster.ndim != 2:
        raise ValidationError(f"raster must be 2-D, got shape {raster.shape}")
    n, t = raster.shape
    if n != int(np.prod(dims)):
        raise ValidationError(f"raster has {n} neurons but dims {dims} imply {np.prod(dims)}")
    if w < 1 or t % w != 0:
        raise ValidationError(f"window {w} must divide the raster length {t}")
    means = raster.reshape(n, t // w, w).sum(axis=2) / (w * v_spike)
    return means.T.reshape(t // w, *dims)


def cross_entropy(p, y) -> float:
    """Categorical cross-entropy of probabilities against a one-hot target."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ValidationError("probability and target shapes differ")
    return float(-(y * np.log(np.clip(p, _LOG_FLOOR, 1.0))).sum(axis=-1).mean())


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _conv_windows(x, k):
    """Sliding (k, k, k) windows over the three trailing spatial axes."""
    return np.lib.stride_tricks.sliding_window_view(x, (k, k, k), axis=(-3, -2, -1))


class ReadoutModel:
    """Single 3-D conv + dropout + global max pool + dense softmax head."""

    def __init__(
        self,
        input_shape,
        n_classes: int = 3,
        c_out: int = 64,
        kernel: int = 3,
        dropout: float = 0.5,
        seed: int = 0,
    ):
        c_in, x, y, z = (int(v) for v in input_shape)
        if min(x, y, z) < kernel:
            raise ValidationError(
                f"kernel {kernel} does not fit into spatial dims {(x, y, z)}"
            )
        if not 0.0 <= dropout < 1.0:
            raise ValidationError("dropout rate must lie in [0, 1)")
        if n_classes < 2 or c_out < 1:
            raise ValidationError("need at least 2 classes and 1 conv channel")
        self.input_shape = (c_in, x, y, z)
        self.n_classes = n_classes
        self.c_out = c_out
        self.kernel = kernel
        self.dropout = dropout
        self.seed = seed
        # fixed input standardization (set from training statistics)
        self.input_offset = np.zeros(self.input_shape)
        self.input_gain = 1.0
        rng = np.random.default_rng(seed)
        fan_in = c_in * kernel**3
        self.conv_w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(c_out, c_in, kernel, kernel, kernel))
        self.conv_b = np.zeros(c_out)
        self.dense_w = rng.normal(0.0, np.sqrt(1.0 / c_out), size=(n_classes, c_out))
        self.dense_b = np.zeros(n_classes)

    # -- parameter access (used by the optimizer and gradient checks) --

    def parameters(self) -> dict:
        return {
            "conv_w": self.conv_w,
            "conv_b": self.conv_b,
            "dense_w": self.dense_w,
            "dense_b": self.dense_b,
        }

    def set_input_normalization(self, offset, gain: float) -> None:
        """Fix the (non-trainable) input standardization transform.

        ``forward`` computes ``(cube - offset) * gain`` before the conv;
        train-set mean and inverse standard deviation are the intended
        values. Conditioning the input this way is what makes plain
        gradient descent converge on low-contrast activation cubes.
        """
        offset = np.asarray(offset, dtype=np.float64)
        if offset.shape != self.input_shape:
            raise ValidationError(
                f"offset shape {offset.shape} != input shape {self.input_shape}"
            )
        if not np.isfinite(gain) or gain <= 0:
            raise ValidationError("gain must be a positive finite scalar")
        self.input_offset = offset
        self.input_gain = float(gain)

    # -- forward / backward --

    def _check_input(self, cubes) -> np.ndarray:
        cubes = np.asarray(cubes, dtype=np.float64)
        single = cubes.ndim == 4
        if single:
            cubes = cubes[None]
        if cubes.ndim != 5 or cubes.shape[1:] != self.input_shape:
            raise ValidationError(
                f"cube shape {cubes.shape} incompatible with model input {self.input_shape}"
            )
        return cubes, single

    def _forward_cached(self, cubes, train_mode=False, rng=None):
        cubes = (cubes - self.input_offset) * self.input_gain
        windows = _conv_windows(cubes, self.kernel)  # (n, c_in, x', y', z', k, k, k)
        pre = np.einsum("ncxyzijk,ocijk->noxyz", windows, self.conv_w, optimize=True)
        pre += self.conv_b[None, :, None, None, None]
        act = np.maximum(0.0, pre)
        if train_mode and self.dropout > 0.0:
            if rng is None:
                raise ValidationError("training-mode forward needs an RNG for dropout")
            keep = (rng.random(act.shape) >= self.dropout) / (1.0 - self.dropout)
            act = act * keep
        else:
            keep = None
        n = act.shape[0]
        flat = act.reshape(n, self.c_out, -1)
        arg = flat.argmax(axis=2)
        pooled = np.take_along_axis(flat, arg[:, :, None], axis=2)[:, :, 0]
        logits = pooled @ self.dense_w.T + self.dense_b
        probs = _softmax(logits)
        cache = {"windows": windows, "pre": pre, "keep": keep, "arg": arg, "pooled": pooled,
                 "act_shape": act.shape}
        return probs, cache

    def forward(self, cubes, train_mode: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        """Class probabilities for one cube ``(C, X, Y, Z)`` or a batch.

        Dropout is applied only when ``train_mode`` is set; inference is
        deterministic.
        """
        cubes, single = self._check_input(cubes)
        probs, _ = self._forward_cached(cubes, train_mode=train_mode, rng=rng)
        return probs[0] if single else probs

    def gradients(self, cubes, labels_onehot, train_mode: bool = False, rng=None):
        """Mean cross-entropy loss and its gradients for a mini-batch."""
        cubes, _ = self._check_input(cubes)
        y = np.asarray(labels_onehot, dtype=np.float64)
        probs, cache = self._forward_cached(cubes, train_mode=train_mode, rng=rng)
        n = cubes.shape[0]
        loss = cross_entropy(probs, y)

        dlogits = (probs - y) / n
        d_dense_w = dlogits.T @ cache["pooled"]
        d_dense_b = dlogits.sum(axis=0)
        dpooled = dlogits @ self.dense_w  # (n, c_out)

        dact_flat = np.zeros((n, self.c_out, np.prod(cache["act_shape"][2:])))
        np.put_along_axis(dact_flat, cache["arg"][:, :, None], dpooled[:, :, None], axis=2)
        dact = dact_flat.reshape(cache["act_shape"])
        if cache["keep"] is not None:
            dact = dact * cache["keep"]
        dpre = dact * (cache["pre"] > 0.0)

        d_conv_w = np.einsum("noxyz,ncxyzijk->ocijk", dpre, cache["windows"], optimize=True)
        d_conv_b = dpre.sum(axis=(0, 2, 3, 4))
        grads = {
            "conv_w": d_conv_w,
            "conv_b": d_conv_b,
            "dense_w": d_dense_w,
            "dense_b": d_dense_b,
        }
        return loss, grads

    # -- training --

    def fit(
        self,
        cubes,
        labels,
        epochs: int,
        lr: float = 0.1,
        batch_size: int = 32,
        halve_every: int = 100,
        seed: int = 0,
    ) -> list[float]:
        """Mini-batch gradient descent; returns the per-epoch loss curve.

        The learning rate halves every ``halve_every`` epochs. Raises
        :class:`TrainingDiverged` the moment a loss goes non-finite.
        """
        cubes = np.asarray(cubes, dtype=np.float64)
        labels = np.asarray(labels)
        if cubes.ndim != 5 or cubes.shape[0] == 0:
            raise ValidationError("fit expects a non-empty batch of cubes")
        if labels.shape != (cubes.shape[0],):
            raise ValidationError("labels must be one class index per cube")
        if (labels < 0).any() or (labels >= self.n_classes).any():
            raise ValidationError("label out of range")
        if epochs < 0 or halve_every < 1 or batch_size < 1:
            raise ValidationError("bad training schedule")
        y = np.eye(self.n_classes)[labels]
        rng = np.random.default_rng(seed)
        n = cubes.shape[0]
        losses = []
        params = self.parameters()
        for epoch in range(epochs):
            lr_t = lr * 0.5 ** (epoch // halve_every)
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                loss, grads = self.gradients(
                    cubes[idx], y[idx], train_mode=self.dropout > 0.0, rng=rng
                )
                if not np.isfinite(loss):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, batch offset {start}, lr {lr_t:g}"
                    )
                for name, g in grads.items():
                    params[name] -= lr_t * g
                epoch_loss += loss * idx.size
            losses.append(epoch_loss / n)
        return losses

    def predict(self, cubes) -> np.ndarray:
        """Argmax class indices (dropout off)."""
        probs = self.forward(cubes)
        return np.atleast_2d(probs).argmax(axis=-1) if probs.ndim > 1 else int(probs.argmax())


def save_model(path, model: ReadoutModel) -> None:
    """Persist a readout checkpoint (versioned .npz; see ``serialize``)."""
    meta = {
        "kind": "readout",
        "input_shape": list(model.input_shape),
        "n_classes": model.n_classes,
        "c_out": model.c_out,
        "kernel": model.kernel,
        "dropout": model.dropout,
        "seed": model.seed,
        "input_gain": model.input_gain,
    }
    arrays = {
        "format_version": np.asarray(MODEL_FORMAT_VERSION, dtype=np.int64),
        "meta": pack_meta(meta),
        "conv_w": model.conv_w,
        "conv_b": model.conv_b,
        "dense_w": model.dense_w,
        "dense_b": model.dense_b,
        "input_offset": model.input_offset,
    }
    write_npz(path, arrays)


def load_model(path) -> ReadoutModel:
    arrays = read_npz(path)
    version = int(arrays["format_version"])
    if version != MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported model format version {version}")
    meta = unpack_meta(arrays["meta"])
    model = ReadoutModel(
        input_shape=tuple(meta["input_shape"]),
        n_classes=meta["n_classes"],
        c_out=meta["c_out"],
        kernel=meta["kernel"],
        dropout=meta["dropout"],
        seed=meta["seed"],
    )
    model.conv_w = arrays["conv_w"]
    model.conv_b = arrays["conv_b"]
    model.dense_w = arrays["dense_w"]
    model.dense_b = arrays["dense_b"]
    model.input_offset = arrays["input_offset"]
    model.input_gain = float(meta["input_gain"])
    return model
