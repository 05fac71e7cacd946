"""Framing, learned encoder/decoder, masking and overlap-add."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputTooShortError, ShapeError
from .ops import matmul, pointwise_conv, relu
from .tensor import Tensor, mul


@dataclass(frozen=True)
class FrameSpec:
    K: int = 256
    hop: int = 128

    def __post_init__(self):
        if not 0 < self.hop <= self.K:
            raise ValueError(f"need 0 < hop <= K, got K={self.K}, hop={self.hop}")

    @classmethod
    def half_overlap(cls, K: int) -> "FrameSpec":
        return cls(K=K, hop=K // 2)

    def num_frames(self, T: int) -> int:
        if T < self.K:
            raise InputTooShortError(f"input has {T} samples, shorter than one window ({self.K})")
        return (T - self.K) // self.hop + 1

    def padded_length(self, T: int) -> int:
        """Smallest length >= T whose frames tile it without a remainder."""
        if T <= self.K:
            return self.K
        rem = (T - self.K) % self.hop
        return T if rem == 0 else T + self.hop - rem


@dataclass
class AudioBuffer:
    """``samples`` is a (T, M) float array; mono audio is stored as (T, 1)."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[1] < 1:
            raise ShapeError(f"audio must be (T, M) with M >= 1, got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("audio contains non-finite samples")
        self.samples = s

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def num_channels(self) -> int:
        return self.samples.shape[1]

    def channel(self, m: int) -> np.ndarray:
        return self.samples[:, m]


def segment(audio: AudioBuffer | np.ndarray, spec: FrameSpec) -> Tensor:
    """Cut a (T, M) signal into an (L, K, M) stack of overlapping windows."""
    samples = audio.samples if isinstance(audio, AudioBuffer) else np.asarray(audio, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    L = spec.num_frames(samples.shape[0])
    starts = np.arange(L) * spec.hop
    idx = starts[:, None] + np.arange(spec.K)[None, :]
    return Tensor(samples[idx])


def encode(segments: Tensor, U: Tensor) -> Tensor:
    """``ReLU(x U)`` for every microphone with one shared basis ``U`` (K x F)."""
    if segments.ndim != 3:
        raise ShapeError(f"encode expects (L, K, M) segments, got {segments.shape}")
    if U.ndim != 2 or U.shape[0] != segments.shape[1]:
        raise ShapeError(f"encode: basis {U.shape} does not match window length {segments.shape[1]}")
    return relu(pointwise_conv(segments, 1, U))


def apply_mask(w_ref: Tensor, m: Tensor) -> Tensor:
    if w_ref.shape != m.shape:
        raise ShapeError(f"apply_mask: encoder output {w_ref.shape} vs mask {m.shape}")
    return mul(w_ref, m)


def decode(d: Tensor, V: Tensor) -> Tensor:
    """Masked (L, F) representation to (L, K) waveform segments."""
    return matmul(d, V)


def overlap_add(segments: Tensor, spec: FrameSpec) -> Tensor:
    """Reassemble (L, K) segments into a waveform of ``(L-1)*hop + K`` samples.

    Each sample is the mean of the segment samples covering it, which makes
    ``overlap_add(segment(x))`` reproduce ``x``.
    """
    if segments.ndim != 2 or segments.shape[1] != spec.K:
        raise ShapeError(f"overlap_add expects (L, {spec.K}) segments, got {segments.shape}")
    L, K = segments.shape
    if L < 1:
        raise ShapeError("overlap_add needs at least one segment")
    T = (L - 1) * spec.hop + K
    count = np.zeros(T)
    total = np.zeros(T)
    for l in range(L):
        s = l * spec.hop
        total[s:s + K] += segments.data[l]
        count[s:s + K] += 1.0
    out = total / count

    def backward(g):
        gn = g / count
        gseg = np.empty((L, K))
        for l in range(L):
            s = l * spec.hop
            gseg[l] = gn[s:s + K]
        return (gseg,)

    return Tensor._from_op(out, (segments,), backward)
