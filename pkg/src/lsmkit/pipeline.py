"""End-to-end glue: encode -> liquid -> windowed cubes -> readout.

A sequence of feature vectors becomes one encoding window per vector,
streamed through a single liquid run (state reset only between
sequences). Each window's raster slice turns into one activation cube,
so a sequence of V vectors yields V (cube, label) pairs and V per-window
predictions. The cube datasets are computed once per experiment; readout
training then never touches the liquid again.
"""

from __future__ import annotations

import numpy as np

from .config import ExperimentConfig
from .datasets import SequenceDataset
from .encoding import EncoderConfig, encode
from .errors import ValidationError
from .lif import LifParams
from .liquid import Liquid
from .masking import SemanticMask
from .readout import ReadoutModel, windowed_cube
from .topology import ReservoirTopology

__all__ = ["CubeDataset", "build_cubes", "evaluate", "confusion_matrix"]


class CubeDataset:
    """Per-window cubes plus labels, grouped by originating sequence."""

    def __init__(self, cubes, labels, seq_ids):
        self.cubes = np.asarray(cubes)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.seq_ids = np.asarray(seq_ids, dtype=np.int64)
        if not (len(self.cubes) == len(self.labels) == len(self.seq_ids)):
            raise ValidationError("cubes, labels and seq_ids must align")

    def __len__(self):
        return len(self.cubes)

    def sequences(self):
        """Yield (sequence id, index array) in first-appearance order."""
        for sid in np.unique(self.seq_ids):
            yield int(sid), np.flatnonzero(self.seq_ids == sid)


def build_cubes(
    topology: ReservoirTopology,
    params: LifParams,
    encoder: EncoderConfig,
    readout_w: int,
    dataset: SequenceDataset,
    mean_rates: bool = False,
) -> CubeDataset:
    """Run every sequence through the liquid and window the rasters.

    The liquid resets between sequences; the encoder streams from one
    generator seeded by (encoder seed, dataset seed), so the result is a
    pure function of its inputs. With ``mean_rates`` the per-window mean
    spike counts (flat, per neuron) are attached as ``.rates`` — handy
    for linear baselines.
    """
    if dataset.n_features != topology.w_li.shape[1]:
        raise ValidationError(
            f"dataset features ({dataset.n_features}) != reservoir input size "
            f"({topology.w_li.shape[1]})"
        )
    if encoder.window % readout_w != 0:
        raise ValidationError("readout window must divide the encoder window")
    liquid = Liquid(topology, params)
    rng = np.random.default_rng([encoder.seed, dataset.seed])
    dims = topology.config.dims
    cubes, labels, seq_ids, rates = [], [], [], []
    for s in range(dataset.n_sequences):
        liquid.reset()
        for v in range(dataset.n_steps):
            window_spikes = encode(dataset.features[s, v], encoder, rng=rng)
            raster = liquid.run_sequence(window_spikes)
            cubes.append(windowed_cube(raster, dims, readout_w, v_spike=params.v_spike))
            labels.append(dataset.labels[s, v])
            seq_ids.append(s)
            if mean_rates:
                rates.append(raster.mean(axis=1) / params.v_spike)
    out = CubeDataset(np.array(cubes), np.array(labels), np.array(seq_ids))
    if mean_rates:
        out.rates = np.array(rates)
    return out


def confusion_matrix(true_labels, predictions, n_classes: int) -> np.ndarray:
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(true_labels, predictions):
        m[int(t), int(p)] += 1
    return m


def evaluate(model: ReadoutModel, cube_data: CubeDataset, mask_enabled: bool) -> dict:
    """Per-window predictions and summary metrics.

    With the mask enabled, predictions within each sequence are decoded
    left to right under the monotone-class constraint.
    """
    probs = model.forward(cube_data.cubes)
    predictions = np.empty(len(cube_data), dtype=np.int64)
    if mask_enabled:
        for _, idx in cube_data.sequences():
            state = SemanticMask()
            for i in idx:
                predictions[i] = state.apply(probs[i])
    else:
        predictions = probs.argmax(axis=1)
    accuracy = float((predictions == cube_data.labels).mean())
    return {
        "accuracy": accuracy,
        "n_windows": int(len(cube_data)),
        "mask": bool(mask_enabled),
        "confusion": confusion_matrix(cube_data.labels, predictions, model.n_classes),
        "predictions": predictions,
    }


def experiment_cubes(config: ExperimentConfig, topology, dataset, mean_rates=False) -> CubeDataset:
    return build_cubes(
        topology, config.neuron, config.encoder, config.readout.w, dataset,
        mean_rates=mean_rates,
    )


def new_readout(config: ExperimentConfig) -> ReadoutModel:
    dims = config.reservoir.dims
    return ReadoutModel(
        input_shape=(config.cube_channels, *dims),
        n_classes=config.dataset.n_classes,
        c_out=config.readout.c_out,
        kernel=config.readout.kernel,
        dropout=config.readout.dropout,
        seed=config.readout.seed,
    )


def fit_readout(config: ExperimentConfig, cube_data: CubeDataset) -> tuple[ReadoutModel, list]:
    """Standardize on train statistics, then train; returns (model, losses)."""
    model = new_readout(config)
    offset = cube_data.cubes.mean(axis=0)
    sigma = float((cube_data.cubes - offset).std())
    model.set_input_normalization(offset, 1.0 / max(sigma, 1e-9))
    losses = model.fit(
        cube_data.cubes, cube_data.labels,
        epochs=config.readout.epochs, lr=config.readout.lr,
        batch_size=config.readout.batch_size,
        halve_every=config.readout.halve_every,
        seed=config.readout.seed,
    )
    return model, losses
