"""Single-file binary checkpoints.

Layout: magic b"GLPC", u32 version, u64 header length, a canonical JSON
header (sorted keys, no whitespace), then each buffer's raw little-endian
bytes in exactly the order the header lists them. Canonical JSON plus
ordered buffers makes save -> load -> save byte-identical.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"GLPC"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: dict
    step: int
    arrays: dict[str, np.ndarray]
    rng_states: dict[str, dict] = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)  # scalars only (t, betas, eps, ...)
    extra: dict = field(default_factory=dict)


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> Path:
    path = Path(path)
    buffers = []
    manifest = []
    for name in sorted(ckpt.arrays):
        arr = np.ascontiguousarray(ckpt.arrays[name])
        dt = arr.dtype.newbyteorder("<")
        buffers.append(arr.astype(dt, copy=False).tobytes())
        manifest.append([name, dt.str, list(arr.shape)])
    header = _canonical({
        "arrays": manifest,
        "config": ckpt.config,
        "extra": ckpt.extra,
        "optimizer": ckpt.optimizer,
        "rng": ckpt.rng_states,
        "step": ckpt.step,
    })
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(header)))
        fh.write(header)
        for buf in buffers:
            fh.write(buf)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic {raw[:4]!r})")
    version, header_len = struct.unpack_from("<IQ", raw, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    body = 16 + header_len
    header = json.loads(raw[16:body].decode("utf-8"))
    arrays: dict[str, np.ndarray] = {}
    offset = body
    for name, dtype_str, shape in header["arrays"]:
        dt = np.dtype(dtype_str)
        n = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        if offset + n > len(raw):
            raise CheckpointError(f"{path}: truncated buffer for {name!r}")
        arrays[name] = np.frombuffer(raw, dtype=dt, count=int(np.prod(shape, dtype=np.int64)),
                                     offset=offset).reshape(shape).copy()
        offset += n
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return Checkpoint(
        config=header["config"],
        step=int(header["step"]),
        arrays=arrays,
        rng_states=header["rng"],
        optimizer=header["optimizer"],
        extra=header.get("extra", {}),
    )


def split_arrays(arrays: dict[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
    """Sub-dict of arrays under "<prefix>/", with the prefix stripped."""
    lead = prefix + "/"
    return {k[len(lead):]: v for k, v in arrays.items() if k.startswith(lead)}
