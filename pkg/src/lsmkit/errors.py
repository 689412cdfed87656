"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so keep the split between
configuration problems (bad file / bad combination of settings) and
validation problems (bad values handed to an operation).
"""


class ValidationError(ValueError):
    """An operation received arguments violating its contract."""


class ConfigError(ValueError):
    """An experiment/build configuration is malformed or inconsistent."""


class TrainingDiverged(RuntimeError):
    """Readout training produced a non-finite loss."""


class BenchMismatchError(RuntimeError):
    """Benchmark correctness gate failed: implementations disagree."""
