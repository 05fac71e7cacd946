"""Minimal RIFF/WAVE reader and writer (16-bit PCM and 32-bit IEEE float)."""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import WavFormatError
from .frontend import AudioBuffer

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

ENCODINGS = ("pcm16", "float32")


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _chunks(blob: bytes):
    pos = 12
    while pos + 8 <= len(blob):
        cid, size = struct.unpack_from("<4sI", blob, pos)
        body = blob[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(f"chunk {cid!r} truncated: {len(body)} of {size} bytes")
        yield cid, body
        pos += 8 + size + (size & 1)


def parse_wav(blob: bytes) -> AudioBuffer:
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE file")
    fmt = data = None
    for cid, body in _chunks(blob):
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            data = body
    if fmt is None or len(fmt) < 16:
        raise WavFormatError("missing or short 'fmt ' chunk")
    if data is None:
        raise WavFormatError("missing 'data' chunk")
    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise WavFormatError("extensible 'fmt ' chunk too short")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if channels < 1:
        raise WavFormatError("channel count must be positive")
    if tag == WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise WavFormatError(f"unsupported encoding: format tag 0x{tag:04x} with {bits} bits per sample")
    frame = channels * dtype.itemsize
    n = len(data) // frame
    samples = np.frombuffer(data[:n * frame], dtype=dtype).reshape(n, channels)
    return AudioBuffer(samples.astype(np.float64) * scale, rate)


def read_wav(path: str | Path) -> AudioBuffer:
    return parse_wav(Path(path).read_bytes())


def encode_wav(audio: AudioBuffer, encoding: str = "pcm16") -> bytes:
    s = audio.samples
    T, M = s.shape
    if encoding == "pcm16":
        payload = np.clip(np.round(s * 32768.0), -32768, 32767).astype("<i2").tobytes()
        tag, bits = WAVE_FORMAT_PCM, 16
    elif encoding == "float32":
        payload = s.astype("<f4").tobytes()
        tag, bits = WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise WavFormatError(f"unsupported encoding {encoding!r}; expected one of {ENCODINGS}")
    block_align = M * bits // 8
    fmt = struct.pack("<HHIIHH", tag, M, int(audio.sample_rate), int(audio.sample_rate) * block_align,
                      block_align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def write_wav(path: str | Path, audio: AudioBuffer, encoding: str = "pcm16") -> None:
    atomic_write_bytes(path, encode_wav(audio, encoding))
