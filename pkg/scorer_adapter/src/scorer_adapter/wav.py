"""Minimal mono WAV reader (PCM16/24, float32). Kept local so the adapter
talks to the core through manifests only, never through imports."""

from __future__ import annotations

import struct

import numpy as np


def read_wav_mono(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise ValueError(f"{path}: not a RIFF/WAVE file")
        fmt = data = None
        while True:
            chunk = fh.read(8)
            if not chunk:
                break
            if len(chunk) < 8:
                raise ValueError(f"{path}: truncated chunk header")
            chunk_id, size = struct.unpack("<4sI", chunk)
            payload = fh.read(size)
            if len(payload) < size:
                raise ValueError(f"{path}: truncated {chunk_id!r} chunk")
            if size % 2:
                fh.read(1)
            if chunk_id == b"fmt ":
                fmt = payload
            elif chunk_id == b"data":
                data = payload
    if fmt is None or data is None:
        raise ValueError(f"{path}: missing fmt or data chunk")
    tag, channels, rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == 0xFFFE and len(fmt) >= 26:
        tag = struct.unpack("<H", fmt[24:26])[0]
    if tag == 1 and bits == 16:
        x = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif tag == 1 and bits == 24:
        raw = np.frombuffer(data, dtype=np.uint8)
        raw = raw[: (raw.size // 3) * 3].reshape(-1, 3).astype(np.int32)
        vals = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        vals -= (vals >= 1 << 23) << 24
        x = vals.astype(np.float64) / float(1 << 23)
    elif tag == 3 and bits == 32:
        x = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported codec (tag={tag}, bits={bits})")
    frames = x.size // channels
    if frames == 0:
        raise ValueError(f"{path}: empty data chunk")
    return x[: frames * channels].reshape(frames, channels).mean(axis=1), int(rate)
