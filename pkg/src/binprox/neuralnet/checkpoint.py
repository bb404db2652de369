"""Model checkpoint container.

Format ("BPCK"): a JSON header describing named parameter tensors, the
architecture fingerprint, optional JSON extras (e.g. feature statistics) and
optional optimizer moments, followed by the raw array payloads as
little-endian float64 in header order.

    magic       4s   b"BPCK"
    version     u32  1
    header_len  u64
    header      JSON (utf-8): {"fingerprint", "params": [[name, shape], ...],
                               "extra": {...}, "optimizer": null | {"step": n}}
    payload     params in order, then optimizer m then v buffers if present
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_MAGIC = b"BPCK"
_PREFIX = struct.Struct("<4sIQ")


class FingerprintMismatchError(RuntimeError):
    """Checkpoint was produced by a different architecture."""


@dataclass
class Checkpoint:
    fingerprint: str
    params: dict[str, np.ndarray]
    extra: dict = field(default_factory=dict)
    optimizer: dict | None = None  # {"step": int, "m": {...}, "v": {...}}

    def require(self, fingerprint: str) -> "Checkpoint":
        if fingerprint != self.fingerprint:
            raise FingerprintMismatchError(
                f"checkpoint built for {self.fingerprint!r}, asked for {fingerprint!r}"
            )
        return self


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    names = list(ckpt.params)
    header = {
        "fingerprint": ckpt.fingerprint,
        "params": [[n, list(ckpt.params[n].shape)] for n in names],
        "extra": ckpt.extra,
        "optimizer": None if ckpt.optimizer is None else {"step": int(ckpt.optimizer["step"])},
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(_MAGIC, 1, len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(ckpt.params[n], dtype="<f8").tobytes())
        if ckpt.optimizer is not None:
            for key in ("m", "v"):
                for n in names:
                    fh.write(np.ascontiguousarray(ckpt.optimizer[key][n], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        prefix = fh.read(_PREFIX.size)
        if len(prefix) < _PREFIX.size:
            raise ValueError(f"{path}: truncated checkpoint")
        magic, version, header_len = _PREFIX.unpack(prefix)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint (bad magic {magic!r})")
        if version != 1:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))

        def read_arrays():
            out = {}
            for name, shape in header["params"]:
                n_vals = int(np.prod(shape)) if shape else 1
                raw = np.frombuffer(fh.read(8 * n_vals), dtype="<f8")
                if raw.size != n_vals:
                    raise ValueError(f"{path}: truncated payload at {name}")
                out[name] = raw.reshape(shape).copy()
            return out

        params = read_arrays()
        optimizer = None
        if header.get("optimizer") is not None:
            optimizer = {
                "step": header["optimizer"]["step"],
                "m": read_arrays(),
                "v": read_arrays(),
            }
    return Checkpoint(header["fingerprint"], params, header.get("extra", {}), optimizer)
