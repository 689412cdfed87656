"""Scalar-vs-vectorized LIF layer benchmark.

Two measurement families, mirroring how the kernel is used: layer size
sweeps at batch 1 (generic per-neuron loop against the vector path), and
batch-size sweeps at a fixed layer width. Before any configuration is
timed, both implementations run the identical random input and their
rasters must match exactly; a mismatch aborts the whole run with a diff
report. Reported times are medians (with interquartile range) of
monotonic wall-clock repetitions taken after warmup.
"""

from __future__ import annotations

import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BenchMismatchError, ValidationError
from .lif import LayerState, LifParams, run_spike_train, run_spike_train_scalar

__all__ = ["BenchSpec", "BenchResult", "run_bench", "write_csv", "CSV_FIELDS"]

CSV_FIELDS = ("impl", "L", "B", "T", "median_ns", "iqr_ns", "reps")


@dataclass(frozen=True)
class BenchSpec:
    """What to measure.

    ``neuron_counts`` are timed at batch 1; ``batch_sizes`` are timed at
    ``batch_layer_size`` neurons. ``scalar_limit`` skips the per-neuron
    baseline above a given L*B*T work product so the default spec stays
    tractable; the vectorized path is always timed.
    """

    neuron_counts: tuple = (10, 50, 200, 500, 1000, 2000, 5000)
    batch_sizes: tuple = (1, 8, 32, 128)
    batch_layer_size: int = 500
    train_length: int = 100
    repetitions: int = 5
    warmup: int = 1
    seed: int = 0
    scalar_limit: int = 20_000_000

    def __post_init__(self):
        if any(l < 1 for l in self.neuron_counts) or any(b < 1 for b in self.batch_sizes):
            raise ValidationError("neuron counts and batch sizes must be >= 1")
        if self.repetitions < 3:
            raise ValidationError("need at least 3 repetitions")
        if self.train_length < 1 or self.warmup < 0 or self.batch_layer_size < 1:
            raise ValidationError("bad train length / warmup / batch layer size")


@dataclass
class BenchResult:
    impl: str
    n_neurons: int
    batch: int
    train_length: int
    median_ns: int
    iqr_ns: int
    reps: int

    def as_row(self) -> tuple:
        return (self.impl, self.n_neurons, self.batch, self.train_length,
                self.median_ns, self.iqr_ns, self.reps)


def _random_currents(rng, params: LifParams, l, t, b=None):
    # spread around the one-step spiking threshold so both regimes occur
    pivot = params.tau_m * params.v_th / (params.r_m * params.dt)
    shape = (l, t) if b is None else (l, t, b)
    return rng.uniform(-pivot, 3 * pivot, size=shape)


def _fresh_state(params, l, b=None):
    return LayerState.resting(l, params, batch=b)


def _diff_report(vec, ref, limit=10) -> str:
    bad = np.argwhere(vec != ref)
    lines = [f"rasters differ at {bad.shape[0]} positions"]
    for pos in bad[:limit]:
        idx = tuple(int(v) for v in pos)
        lines.append(f"  at {idx}: vectorized={vec[idx]!r} scalar={ref[idx]!r}")
    return "\n".join(lines)


def _verify(params, l, t, b, currents) -> None:
    _, vec = run_spike_train(_fresh_state(params, l, b), params, currents)
    ref = run_spike_train_scalar(_fresh_state(params, l, b), params, currents)
    if not np.array_equal(vec, ref):
        raise BenchMismatchError(
            f"correctness gate failed for L={l} B={b or 1} T={t}:\n" + _diff_report(vec, ref)
        )


def _time_ns(fn, reps, warmup) -> tuple[int, int]:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(reps):
        start = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - start)
    q25, q50, q75 = np.percentile(samples, [25, 50, 75])
    return int(q50), int(q75 - q25)


def run_bench(spec: BenchSpec, params: LifParams | None = None, progress=None) -> list[BenchResult]:
    """Measure every configuration of the spec; returns result rows.

    ``progress`` may be a callable taking a status string.
    """
    params = params if params is not None else LifParams()
    rng = np.random.default_rng(spec.seed)
    results: list[BenchResult] = []
    t = spec.train_length

    def note(msg):
        if progress is not None:
            progress(msg)

    def measure(l, b):
        batch = None if b == 1 else b
        currents = _random_currents(rng, params, l, t, batch)
        _verify(params, l, t, batch, currents)
        median, iqr = _time_ns(
            lambda: run_spike_train(_fresh_state(params, l, batch), params, currents),
            spec.repetitions, spec.warmup,
        )
        results.append(BenchResult("vectorized", l, b, t, median, iqr, spec.repetitions))
        if l * b * t <= spec.scalar_limit:
            median, iqr = _time_ns(
                lambda: run_spike_train_scalar(_fresh_state(params, l, batch), params, currents),
                spec.repetitions, spec.warmup,
            )
            results.append(BenchResult("scalar", l, b, t, median, iqr, spec.repetitions))
        note(f"done L={l} B={b}")

    for l in spec.neuron_counts:
        measure(l, 1)
    for b in spec.batch_sizes:
        measure(spec.batch_layer_size, b)
    return results


def write_csv(path, results: list[BenchResult], spec: BenchSpec) -> None:
    """CSV with a '#'-prefixed metadata header, then one row per result."""
    lines = [
        f"# lsmkit bench v1",
        f"# hardware: {platform.machine()} {platform.processor() or 'unknown-cpu'}",
        f"# platform: {platform.platform()}",
        f"# python: {platform.python_version()} numpy: {np.__version__}",
        f"# threads: {len(os.sched_getaffinity(0)) if hasattr(os, 'sched_getaffinity') else os.cpu_count()}",
        f"# seed: {spec.seed}",
        f"# repetitions: {spec.repetitions} warmup: {spec.warmup}",
        ",".join(CSV_FIELDS),
    ]
    for r in results:
        lines.append(",".join(str(v) for v in r.as_row()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
