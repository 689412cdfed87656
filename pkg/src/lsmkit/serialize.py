"""Byte-stable artifact files.

Artifacts (topologies, model checkpoints, datasets) are written as
ordinary ``.npz`` archives that ``np.load`` reads back directly — but
through :func:`write_npz` instead of ``np.savez``, which stamps zip
entries with the current time and so breaks the save-twice-byte-identical
contract. Entries here carry a fixed timestamp and are stored without
compression in insertion order, making file bytes a pure function of the
content.

Every archive includes a ``format_version`` array and a ``meta`` entry
holding a JSON string (config, seed, anything non-array).
"""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

__all__ = ["write_npz", "read_npz", "pack_meta", "unpack_meta"]

_EPOCH = (1980, 1, 1, 0, 0, 0)  # minimum zip timestamp


def write_npz(path, arrays: dict) -> None:
    """Write ``{name: ndarray}`` as a reproducible uncompressed .npz."""
    with zipfile.ZipFile(path, mode="w", compression=zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arr), allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=_EPOCH)
            zf.writestr(info, buf.getvalue())


def read_npz(path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        return {name: data[name] for name in data.files}


def pack_meta(meta: dict) -> np.ndarray:
    """JSON-encode a metadata dict into a 0-d string array."""
    return np.array(json.dumps(meta, sort_keys=True))


def unpack_meta(arr) -> dict:
    return json.loads(str(arr))
