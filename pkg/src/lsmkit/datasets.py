"""Synthetic sequence-classification tasks.

Both tasks emit sequences of normalized feature vectors (one vector per
step, values in [0, 1], ready for rate encoding) with one label per
step:

* ``patterns`` — every sequence belongs to one of K classes; all of its
  steps carry the class label and fluctuate around a class-specific rate
  template. Plain classification, constructed to be separable.
* ``staged`` — three shared phase templates; each sequence starts in
  phase 0 and switches to 1 and then 2 at random change points, so the
  label track is non-decreasing and covers all three stages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .serialize import pack_meta, read_npz, unpack_meta, write_npz

__all__ = ["SequenceDataset", "make_patterns", "make_staged", "make_dataset",
           "save_dataset", "load_dataset", "TASKS"]

DATASET_FORMAT_VERSION = 1

TASKS = ("patterns", "staged")


@dataclass
class SequenceDataset:
    """``features``: (N, V, D) in [0, 1]; ``labels``: (N, V) int."""

    features: np.ndarray
    labels: np.ndarray
    task: str
    n_classes: int
    seed: int

    @property
    def n_sequences(self) -> int:
        return self.features.shape[0]

    @property
    def n_steps(self) -> int:
        return self.features.shape[1]

    @property
    def n_features(self) -> int:
        return self.features.shape[2]

    def split(self, n_first: int):
        """Deterministic prefix/suffix split (sequences are pre-shuffled)."""
        if not 0 < n_first < self.n_sequences:
            raise ValidationError("split point must fall inside the dataset")
        head = SequenceDataset(self.features[:n_first], self.labels[:n_first],
                               self.task, self.n_classes, self.seed)
        tail = SequenceDataset(self.features[n_first:], self.labels[n_first:],
                               self.task, self.n_classes, self.seed)
        return head, tail


def _templates(rng, n_classes, n_features, lo=0.05, hi=0.45):
    """Class rate templates, redrawn until every pair is well separated."""
    while True:
        t = rng.uniform(lo, hi, size=(n_classes, n_features))
        gaps = [
            np.abs(t[a] - t[b]).mean()
            for a in range(n_classes)
            for b in range(a + 1, n_classes)
        ]
        if min(gaps) > (hi - lo) / 6:
            return t


def make_patterns(
    n_sequences: int,
    n_steps: int,
    n_features: int,
    n_classes: int = 3,
    noise: float = 0.03,
    seed: int = 0,
) -> SequenceDataset:
    """Balanced K-class rate patterns (class counts differ by at most 1)."""
    if n_sequences < n_classes:
        raise ValidationError("need at least one sequence per class")
    rng = np.random.default_rng(seed)
    templates = _templates(rng, n_classes, n_features)
    classes = np.arange(n_sequences) % n_classes
    rng.shuffle(classes)
    features = np.empty((n_sequences, n_steps, n_features))
    for i, k in enumerate(classes):
        jitter = rng.normal(0.0, noise, size=(n_steps, n_features))
        features[i] = np.clip(templates[k] + jitter, 0.0, 1.0)
    labels = np.repeat(classes[:, None], n_steps, axis=1).astype(np.int64)
    return SequenceDataset(features, labels, "patterns", n_classes, seed)


def make_staged(
    n_sequences: int,
    n_steps: int,
    n_features: int,
    noise: float = 0.03,
    seed: int = 0,
) -> SequenceDataset:
    """Three-phase sequences with random change points and monotone labels."""
    if n_steps < 3:
        raise ValidationError("staged sequences need at least 3 steps")
    rng = np.random.default_rng(seed)
    templates = _templates(rng, 3, n_features)
    features = np.empty((n_sequences, n_steps, n_features))
    labels = np.empty((n_sequences, n_steps), dtype=np.int64)
    for i in range(n_sequences):
        c1, c2 = np.sort(rng.choice(np.arange(1, n_steps), size=2, replace=False))
        phase = np.zeros(n_steps, dtype=np.int64)
        phase[c1:] = 1
        phase[c2:] = 2
        jitter = rng.normal(0.0, noise, size=(n_steps, n_features))
        features[i] = np.clip(templates[phase] + jitter, 0.0, 1.0)
        labels[i] = phase
    return SequenceDataset(features, labels, "staged", 3, seed)


def make_dataset(task: str, n_sequences, n_steps, n_features, n_classes=3,
                 noise=0.03, seed=0) -> SequenceDataset:
    if task == "patterns":
        return make_patterns(n_sequences, n_steps, n_features, n_classes, noise, seed)
    if task == "staged":
        if n_classes != 3:
            raise ValidationError("the staged task is a fixed 3-class problem")
        return make_staged(n_sequences, n_steps, n_features, noise, seed)
    raise ValidationError(f"unknown task {task!r}; known tasks: {TASKS}")


def save_dataset(path, ds: SequenceDataset) -> None:
    write_npz(path, {
        "format_version": np.asarray(DATASET_FORMAT_VERSION, dtype=np.int64),
        "meta": pack_meta({"kind": "dataset", "task": ds.task,
                           "n_classes": ds.n_classes, "seed": ds.seed}),
        "features": ds.features,
        "labels": ds.labels,
    })


def load_dataset(path) -> SequenceDataset:
    arrays = read_npz(path)
    version = int(arrays["format_version"])
    if version != DATASET_FORMAT_VERSION:
        raise ValidationError(f"unsupported dataset format version {version}")
    meta = unpack_meta(arrays["meta"])
    return SequenceDataset(
        features=arrays["features"],
        labels=arrays["labels"],
        task=meta["task"],
        n_classes=int(meta["n_classes"]),
        seed=int(meta["seed"]),
    )
