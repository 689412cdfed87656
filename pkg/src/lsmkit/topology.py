"""Reservoir construction: 3-D grid, E/I split, distance wiring, delays.

Neurons sit on an integer grid (C-order indexing: neuron ``i`` is at
``np.unravel_index(i, dims)``). A fraction ``ei_ratio`` of them, chosen
uniformly at random, is excitatory; a fraction ``primary_ratio`` of the
excitatory ones is "primary" and receives direct input-layer synapses.

Recurrent wiring is sampled per ordered (source, target) pair: the
connection exists with probability ``C * exp(-(d / lam)**2)`` where ``C``
and the synaptic weight depend on the source/target types (order EE, EI,
II, IE; first letter = source). Excitatory sources project positive
weights, inhibitory ones negative. Each existing connection carries an
integer delay of one timestep per unit Euclidean distance, rounded, with
a minimum of one step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .serialize import pack_meta, read_npz, unpack_meta, write_npz

__all__ = [
    "PAIR_ORDER",
    "BuildConfig",
    "ReservoirTopology",
    "connection_probability",
    "distance_matrix",
    "build",
    "save_topology",
    "load_topology",
]

PAIR_ORDER = ("EE", "EI", "II", "IE")

TOPOLOGY_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BuildConfig:
    """All knobs of the reservoir generator.

    ``c_table`` and ``w_table`` are ordered as ``PAIR_ORDER``; weights
    are multiplied by the global ``w_scale``. ``input_density`` is the
    fraction of input-layer neurons wired into each primary neuron.
    """

    dims: tuple[int, int, int] = (10, 10, 10)
    c_table: tuple[float, float, float, float] = (0.6, 1.0, 0.2, 0.8)
    lam: float = 6.0
    w_table: tuple[float, float, float, float] = (3.0, 2.0, -1.0, -4.0)
    w_scale: float = 0.01
    input_size: int = 512
    ei_ratio: float = 0.8
    input_density: float = 0.1
    primary_ratio: float = 0.5
    seed: int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValidationError(f"dims must be three positive integers, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        if len(self.c_table) != len(PAIR_ORDER) or any(not 0 <= c <= 1 for c in self.c_table):
            raise ValidationError("c_table must hold four probabilities in [0, 1]")
        if len(self.w_table) != len(PAIR_ORDER):
            raise ValidationError("w_table must hold four weights (EE, EI, II, IE)")
        if self.w_table[0] < 0 or self.w_table[1] < 0 or self.w_table[2] > 0 or self.w_table[3] > 0:
            raise ValidationError("excitatory-source weights must be >= 0, inhibitory <= 0")
        if self.lam <= 0:
            raise ValidationError("lam must be positive")
        if self.input_size < 1:
            raise ValidationError("input_size must be >= 1")
        for name in ("ei_ratio", "input_density", "primary_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")

    @property
    def n_neurons(self) -> int:
        x, y, z = self.dims
        return x * y * z

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "c_table": list(self.c_table),
            "lam": self.lam,
            "w_table": list(self.w_table),
            "w_scale": self.w_scale,
            "input_size": self.input_size,
            "ei_ratio": self.ei_ratio,
            "input_density": self.input_density,
            "primary_ratio": self.primary_ratio,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BuildConfig":
        d = dict(d)
        for key in ("dims", "c_table", "w_table"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class ReservoirTopology:
    """Immutable wiring of one reservoir instance.

    ``w_l[i, j]`` is the weight of the connection from source ``j`` to
    target ``i`` (zero if absent); ``delay`` shares its sparsity pattern
    and holds integer latencies >= 1. ``w_li`` wires input-layer neurons
    into primary excitatory rows only.
    """

    positions: np.ndarray
    is_excitatory: np.ndarray
    is_primary: np.ndarray
    w_l: sp.csr_matrix
    w_li: sp.csr_matrix
    delay: sp.csr_matrix
    t_max: int
    config: BuildConfig

    @property
    def n_neurons(self) -> int:
        return self.positions.shape[0]

    def w_l_dense(self) -> np.ndarray:
        return self.w_l.toarray()

    def w_li_dense(self) -> np.ndarray:
        return self.w_li.toarray()

    def delay_dense(self) -> np.ndarray:
        return self.delay.toarray()

    def connection_counts(self) -> dict:
        """Number of existing liquid connections per type pair."""
        coo = self.w_l.tocoo()
        src_e = self.is_excitatory[coo.col]
        tgt_e = self.is_excitatory[coo.row]
        return {
            "EE": int((src_e & tgt_e).sum()),
            "EI": int((src_e & ~tgt_e).sum()),
            "II": int((~src_e & ~tgt_e).sum()),
            "IE": int((~src_e & tgt_e).sum()),
        }

    def delay_histogram(self) -> dict:
        values, counts = np.unique(self.delay.tocoo().data, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}


def connection_probability(type_pair: str, distance, cfg: BuildConfig):
    """Probability that a connection of the given type spans ``distance``."""
    if type_pair not in PAIR_ORDER:
        raise ValidationError(f"unknown type pair {type_pair!r}; expected one of {PAIR_ORDER}")
    distance = np.asarray(distance, dtype=np.float64)
    if (distance < 0).any():
        raise ValidationError("distance must be non-negative")
    c = cfg.c_table[PAIR_ORDER.index(type_pair)]
    p = c * np.exp(-((distance / cfg.lam) ** 2))
    return float(np.clip(p, 0.0, 1.0)) if p.ndim == 0 else np.clip(p, 0.0, 1.0)


def distance_matrix(positions) -> np.ndarray:
    """Pairwise Euclidean distances between 3-D positions."""
    positions = np.asarray(positions, dtype=np.float64)
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def _grid_positions(dims) -> np.ndarray:
    return np.indices(dims).reshape(3, -1).T.astype(np.int64)


def build(cfg: BuildConfig) -> ReservoirTopology:
    """Sample a reservoir. Deterministic for a fixed ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_neurons
    positions = _grid_positions(cfg.dims)

    n_exc = int(round(cfg.ei_ratio * n))
    is_excitatory = np.zeros(n, dtype=bool)
    is_excitatory[rng.permutation(n)[:n_exc]] = True

    exc_idx = np.flatnonzero(is_excitatory)
    n_primary = int(round(cfg.primary_ratio * n_exc))
    is_primary = np.zeros(n, dtype=bool)
    if n_primary:
        is_primary[rng.choice(exc_idx, size=n_primary, replace=False)] = True

    # Ceiling/weight lookups indexed by (source is E, target is E).
    c_lut = np.empty((2, 2))
    w_lut = np.empty((2, 2))
    for pair, c, w in zip(PAIR_ORDER, cfg.c_table, cfg.w_table):
        src, tgt = (pair[0] == "E"), (pair[1] == "E")
        c_lut[int(src), int(tgt)] = c
        w_lut[int(src), int(tgt)] = w * cfg.w_scale

    dist = distance_matrix(positions)
    src_e = is_excitatory.astype(int)[None, :]  # column index = source
    tgt_e = is_excitatory.astype(int)[:, None]  # row index = target
    prob = c_lut[src_e, tgt_e] * np.exp(-((dist / cfg.lam) ** 2))
    np.fill_diagonal(prob, 0.0)  # no self-connections

    exists = rng.random((n, n)) < prob
    weights = np.where(exists, w_lut[src_e, tgt_e], 0.0)
    delays = np.where(exists, np.maximum(1, np.rint(dist)).astype(np.int64), 0)
    t_max = int(delays.max()) if exists.any() else 0

    w_li = np.zeros((n, cfg.input_size))
    fan_in = int(round(cfg.input_density * cfg.input_size))
    input_weight = cfg.w_table[0] * cfg.w_scale  # reuse the EE magnitude
    for i in np.flatnonzero(is_primary):
        cols = rng.choice(cfg.input_size, size=fan_in, replace=False)
        w_li[i, cols] = input_weight

    return ReservoirTopology(
        positions=positions,
        is_excitatory=is_excitatory,
        is_primary=is_primary,
        w_l=sp.csr_matrix(weights),
        w_li=sp.csr_matrix(w_li),
        delay=sp.csr_matrix(delays),
        t_max=t_max,
        config=cfg,
    )


def _csr_arrays(prefix: str, m: sp.csr_matrix) -> dict:
    return {
        f"{prefix}_data": m.data,
        f"{prefix}_indices": m.indices,
        f"{prefix}_indptr": m.indptr,
        f"{prefix}_shape": np.asarray(m.shape, dtype=np.int64),
    }


def _csr_from(arrays: dict, prefix: str) -> sp.csr_matrix:
    return sp.csr_matrix(
        (arrays[f"{prefix}_data"], arrays[f"{prefix}_indices"], arrays[f"{prefix}_indptr"]),
        shape=tuple(arrays[f"{prefix}_shape"]),
    )


def save_topology(path, topo: ReservoirTopology) -> None:
    """Persist a topology (versioned .npz; see ``serialize``)."""
    arrays = {
        "format_version": np.asarray(TOPOLOGY_FORMAT_VERSION, dtype=np.int64),
        "meta": pack_meta({"kind": "topology", "config": topo.config.to_dict()}),
        "positions": topo.positions,
        "is_excitatory": topo.is_excitatory,
        "is_primary": topo.is_primary,
        "t_max": np.asarray(topo.t_max, dtype=np.int64),
    }
    arrays.update(_csr_arrays("w_l", topo.w_l))
    arrays.update(_csr_arrays("w_li", topo.w_li))
    arrays.update(_csr_arrays("delay", topo.delay))
    write_npz(path, arrays)


def load_topology(path) -> ReservoirTopology:
    arrays = read_npz(path)
    version = int(arrays["format_version"])
    if version != TOPOLOGY_FORMAT_VERSION:
        raise ValidationError(f"unsupported topology format version {version}")
    meta = unpack_meta(arrays["meta"])
    return ReservoirTopology(
        positions=arrays["positions"],
        is_excitatory=arrays["is_excitatory"],
        is_primary=arrays["is_primary"],
        w_l=_csr_from(arrays, "w_l"),
        w_li=_csr_from(arrays, "w_li"),
        delay=_csr_from(arrays, "delay"),
        t_max=int(arrays["t_max"]),
        config=BuildConfig.from_dict(meta["config"]),
    )
