"""GWV: a trivially parseable raw-RGB video container.

Layout: 24-byte header of six little-endian u32 words — magic "GWV1",
width, height, frame_count, fps numerator, fps denominator — followed by
frame_count * height * width * 3 bytes of RGB8 data.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = int.from_bytes(b"GWV1", "little")
HEADER = struct.Struct("<6I")


class BadMagicError(ValueError):
    pass


class TruncatedPayloadError(ValueError):
    pass


@dataclass
class GwvVideo:
    frames: np.ndarray  # (T, H, W, 3) uint8
    fps_num: int = 12
    fps_den: int = 1

    def __post_init__(self):
        f = np.asarray(self.frames)
        if f.ndim != 4 or f.shape[-1] != 3 or f.dtype != np.uint8:
            raise ValueError(f"frames must be (T, H, W, 3) uint8, got {f.shape} {f.dtype}")
        self.frames = f

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def duration_s(self) -> float:
        return self.frame_count * self.fps_den / self.fps_num

    def to_float(self) -> np.ndarray:
        return self.frames.astype(np.float32) / np.float32(255.0)

    @classmethod
    def from_float(cls, frames: np.ndarray, fps_num: int = 12, fps_den: int = 1) -> "GwvVideo":
        data = np.clip(np.asarray(frames, dtype=np.float32), 0.0, 1.0)
        return cls((data * 255.0 + 0.5).astype(np.uint8), fps_num, fps_den)


def write_gwv(video: GwvVideo, path: str | Path) -> None:
    header = HEADER.pack(
        MAGIC, video.width, video.height, video.frame_count, video.fps_num, video.fps_den
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(video.frames).tobytes())


def read_gwv(path: str | Path) -> GwvVideo:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise TruncatedPayloadError(f"truncated payload: {len(raw)} bytes is shorter than the header")
    magic, width, height, count, fps_num, fps_den = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic: 0x{magic:08x}")
    expected = HEADER.size + width * height * 3 * count
    if len(raw) < expected:
        raise TruncatedPayloadError(f"truncated payload: expected {expected} bytes, got {len(raw)}")
    if len(raw) > expected:
        raise ValueError(f"size mismatch: expected {expected} bytes, got {len(raw)}")
    frames = np.frombuffer(raw, dtype=np.uint8, offset=HEADER.size).reshape(count, height, width, 3)
    return GwvVideo(frames.copy(), fps_num, fps_den)
