"""Versioned model checkpoint container.

Layout: 8-byte magic, 2-byte little-endian format version, then an ``.npz``
archive holding the parameter arrays and a JSON ``meta`` entry (architecture,
model spec, optimizer state scalars, normalization stats).
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .layers import Sequential, from_architecture

MAGIC = b"CSATCKPT"
VERSION = 1


def save_checkpoint(path, model: Sequential, meta: dict | None = None,
                    optimizer_state: dict | None = None) -> None:
    arrays = {f"param/{k}": v for k, v in model.state().items()}
    opt_meta = None
    if optimizer_state is not None:
        opt_meta = {k: v for k, v in optimizer_state.items() if not isinstance(v, list)}
        for key, value in optimizer_state.items():
            if isinstance(value, list):
                opt_meta[key] = len(value)
                for i, arr in enumerate(value):
                    arrays[f"opt/{key}/{i}"] = arr
    header = {"architecture": model.architecture(), "name": model.name,
              "dtype": str(model.dtype), "meta": meta or {}, "optimizer": opt_meta}
    arrays["meta"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(MAGIC + struct.pack("<H", VERSION) + buf.getvalue())


def load_checkpoint(path) -> tuple[Sequential, dict, dict | None]:
    """Returns (model, meta, optimizer_state)."""
    raw = Path(path).read_bytes()
    if raw[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    (version,) = struct.unpack("<H", raw[len(MAGIC):len(MAGIC) + 2])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    with np.load(io.BytesIO(raw[len(MAGIC) + 2:])) as npz:
        arrays = {k: npz[k] for k in npz.files}
    header = json.loads(arrays.pop("meta").tobytes().decode())
    model = from_architecture(header["architecture"], dtype=np.dtype(header["dtype"]))
    model.name = header["name"]
    model.load_state({k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")})
    opt = header["optimizer"]
    if opt is not None:
        opt = dict(opt)
        for key in list(opt):
            prefix = f"opt/{key}/"
            if any(k.startswith(prefix) for k in arrays):
                opt[key] = [arrays[f"{prefix}{i}"] for i in range(opt[key])]
    return model, header["meta"], opt
