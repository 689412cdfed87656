"""lsmkit — a vectorized spiking-reservoir (liquid state machine) toolkit.

Building blocks:

* :mod:`lsmkit.lif` — LIF layer kernels (scalar reference + vector path).
* :mod:`lsmkit.encoding` — Poisson/Bernoulli rate coding and raster I/O.
* :mod:`lsmkit.topology` — 3-D reservoir construction with distance-based
  wiring and integer synaptic delays.
* :mod:`lsmkit.delays` — circular delay buffer with mask-based pop.
* :mod:`lsmkit.liquid` — the recurrent liquid runtime.
* :mod:`lsmkit.readout` — windowed activation cubes and the trainable
  3-D convolutional classifier head.
* :mod:`lsmkit.masking` — monotone class-sequence output masking.
* :mod:`lsmkit.bench` — scalar-vs-vectorized benchmark harness.
* :mod:`lsmkit.datasets` — synthetic sequence-classification tasks.
* :mod:`lsmkit.pipeline` — encode → liquid → cube → readout glue.
* :mod:`lsmkit.cli` — build / gen-data / train / eval / bench commands.
"""

from .errors import BenchMismatchError, ConfigError, TrainingDiverged, ValidationError
from .lif import (
    LayerState,
    LifParams,
    ScalarState,
    parallel_step,
    run_spike_train,
    run_spike_train_scalar,
    scalar_step,
)

__version__ = "0.1.0"

__all__ = [
    "BenchMismatchError",
    "ConfigError",
    "TrainingDiverged",
    "ValidationError",
    "LifParams",
    "ScalarState",
    "LayerState",
    "scalar_step",
    "parallel_step",
    "run_spike_train",
    "run_spike_train_scalar",
    "__version__",
]
