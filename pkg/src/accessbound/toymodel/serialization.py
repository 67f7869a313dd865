"""Binary model format.

Layout: magic ``b"ABTM"``, a little-endian uint32 header length, a UTF-8
JSON header, then every array as contiguous little-endian float64 in header
order. The header lists ``name``, ``shape`` and byte ``offset`` (relative to
the start of the data block) for each array, plus hyperparameters and seed.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import ToyTransformer

MAGIC = b"ABTM"
VERSION = 1


def dumps(model: ToyTransformer) -> bytes:
    arrays, blobs, offset = [], [], 0
    for name in sorted(model.params):
        a = np.ascontiguousarray(model.params[name], dtype="<f8")
        arrays.append({"name": name, "shape": list(a.shape), "offset": offset})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = {"version": VERSION, "hyperparams": model.hyperparams(), "seed": model.seed,
              "arrays": arrays}
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<I", len(hbytes)) + hbytes + b"".join(blobs)


def loads(data: bytes) -> ToyTransformer:
    if data[:4] != MAGIC:
        raise ValueError("not a model file (bad magic)")
    (hlen,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + hlen].decode("utf-8"))
    if header.get("version") != VERSION:
        raise ValueError(f"unsupported model file version {header.get('version')}")
    base = 8 + hlen
    params = {}
    for rec in header["arrays"]:
        count = int(np.prod(rec["shape"], dtype=np.int64))
        start = base + rec["offset"]
        if start + 8 * count > len(data):
            raise ValueError(f"truncated model file (array {rec['name']})")
        params[rec["name"]] = np.frombuffer(data, dtype="<f8", count=count,
                                            offset=start).reshape(rec["shape"]).astype(np.float64)
    hp = header["hyperparams"]
    return ToyTransformer(params, norm=hp["norm"], norm_bound=hp["norm_bound"], seed=header["seed"])


def save_model(model: ToyTransformer, path) -> None:
    Path(path).write_bytes(dumps(model))


def load_model(path) -> ToyTransformer:
    return loads(Path(path).read_bytes())
