"""Complete enhancement networks: encoder, bottleneck, TCN, mask head, decoder."""
from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .errors import ShapeError
from .frontend import AudioBuffer, FrameSpec, apply_mask, decode, encode, overlap_add, segment
from .layers import Module, Pointwise, PReLU, uniform_init
from .ops import sigmoid
from .tcn import CHANNEL_AXIS, FEATURE_AXIS, TCN, TCN3D, ScheduledTCN, downsized_schedule, upsized_schedule
from .tensor import Tensor, narrow, take, transpose


class Encoder(Module):
    def __init__(self, rng, K: int, F: int):
        self.U = uniform_init(rng, (K, F), K)

    def __call__(self, segments: Tensor) -> Tensor:
        return encode(segments, self.U)


class Decoder(Module):
    def __init__(self, rng, F: int, K: int):
        self.V = uniform_init(rng, (F, K), F)

    def __call__(self, d: Tensor) -> Tensor:
        return decode(d, self.V)


class MaskHeadA(Module):
    """PReLU, 1x1 (N -> F), sigmoid; for (L, N) skip totals."""

    def __init__(self, rng, N: int, F: int):
        self.prelu = PReLU()
        self.feature = Pointwise(rng, N, F, FEATURE_AXIS)

    def __call__(self, skip_total: Tensor) -> Tensor:
        if skip_total.ndim != 2:
            raise ShapeError(f"MaskHeadA expects (L, N), got {skip_total.shape}")
        return sigmoid(self.feature(self.prelu(skip_total)))


class MaskHeadB(Module):
    """PReLU, channel 1x1 (C -> 1), feature 1x1 (N -> F), sigmoid; for (L, N, C) maps.

    This is where channels of the 3-D variant meet for the first time.
    """

    def __init__(self, rng, N: int, C: int, F: int):
        self.prelu = PReLU()
        self.channel = Pointwise(rng, C, 1, CHANNEL_AXIS)
        self.feature = Pointwise(rng, N, F, FEATURE_AXIS)

    def __call__(self, skip_total: Tensor) -> Tensor:
        if skip_total.ndim != 3:
            raise ShapeError(f"MaskHeadB expects (L, N, C), got {skip_total.shape}")
        h = take(self.channel(self.prelu(skip_total)), CHANNEL_AXIS, 0)
        return sigmoid(self.feature(h))


class Bottleneck(Module):
    """Feature 1x1 and, for 3-D maps, a channel 1x1 ahead of the TCN."""

    def __init__(self, rng, n_in: int, N: int, m_in: int | None = None, C: int | None = None):
        self.feature = Pointwise(rng, n_in, N, FEATURE_AXIS)
        self.channel = Pointwise(rng, m_in, C, CHANNEL_AXIS) if m_in is not None else None

    def __call__(self, x: Tensor) -> Tensor:
        x = self.feature(x)
        if self.channel is not None:
            x = self.channel(x)
        return x


class Model(Module):
    """One configured network. Build with :func:`build_model`."""

    def __init__(self, config: ModelConfig, materialize: bool = True):
        self.config = config
        cfg = config
        rng = np.random.default_rng(cfg.seed) if materialize else _ShapeOnlyRng()
        self.encoder = Encoder(rng, cfg.K, cfg.F)
        v = cfg.variant
        if v in ("SC", "MC"):
            self.bottleneck = Bottleneck(rng, cfg.F, cfg.N)
            self.tcn = TCN(rng, cfg.S, cfg.D, "1d", cfg.N, cfg.H)
            self.head = MaskHeadA(rng, cfg.N, cfg.F)
        elif v == "TwoD":
            self.bottleneck = Bottleneck(rng, cfg.F * cfg.M, cfg.N)
            self.tcn = TCN(rng, cfg.S, cfg.D, "1d", cfg.N, cfg.H)
            self.head = MaskHeadA(rng, cfg.N, cfg.F)
        elif v == "ThreeD":
            self.bottleneck = Bottleneck(rng, cfg.F, cfg.N, cfg.M, cfg.C)
            self.tcn = TCN3D(rng, cfg.C, cfg.S, cfg.D, cfg.N, cfg.H)
            self.head = MaskHeadB(rng, cfg.N, cfg.C, cfg.F)
        elif v == "IC":
            self.bottleneck = Bottleneck(rng, cfg.F, cfg.N, cfg.M, cfg.C)
            self.tcn = TCN(rng, cfg.S, cfg.D, "ic", cfg.C, cfg.H)
            self.head = MaskHeadB(rng, cfg.N, cfg.C, cfg.F)
        else:
            make = downsized_schedule if v == "ICDownsized" else upsized_schedule
            schedule = make(cfg.N, cfg.C, cfg.S)
            n1, c1 = schedule[0]
            self.bottleneck = Bottleneck(rng, cfg.F, n1, cfg.M, c1)
            self.tcn = ScheduledTCN(rng, schedule, cfg.D, cfg.H // cfg.C)
            self.head = MaskHeadB(rng, self.tcn.n_out, self.tcn.c_out, cfg.F)
        self.decoder = Decoder(rng, cfg.F, cfg.K)

    @property
    def frame_spec(self) -> FrameSpec:
        return FrameSpec.half_overlap(self.config.K)

    @property
    def num_blocks(self) -> int:
        return self.tcn.num_blocks

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise ShapeError(f"state mismatch; missing {missing[:5]}, unexpected {extra[:5]}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ShapeError(f"parameter {name}: expected {p.shape}, got {arr.shape}")
            p.data[...] = arr

    # ------------------------------------------------------------------ forward
    def _encoded(self, samples: np.ndarray) -> tuple[Tensor, int]:
        cfg = self.config
        if samples.ndim == 1:
            samples = samples[:, None]
        T, M = samples.shape
        if M != cfg.M:
            raise ShapeError(f"model expects {cfg.M} channels, input has {M}")
        spec = self.frame_spec
        spec.num_frames(T)  # raises on inputs shorter than one window
        padded = spec.padded_length(T)
        if padded != T:
            samples = np.concatenate([samples, np.zeros((padded - T, M))], axis=0)
        return self.encoder(segment(samples, spec)), T

    def _mix(self, w: Tensor) -> tuple[Tensor, Tensor]:
        """Return (TCN input, encoder output the mask is applied to)."""
        cfg = self.config
        v = cfg.variant
        if v in ("SC", "MC"):
            mixed = w.sum(axis=CHANNEL_AXIS)
            return mixed, mixed
        w_ref = take(w, CHANNEL_AXIS, cfg.reference_index)
        if v == "TwoD":
            L, F, M = w.shape
            return transpose(w, (0, 2, 1)).reshape(L, M * F), w_ref
        return w, w_ref

    def mask(self, audio) -> Tensor:
        w, _ = self._encoded(_samples(audio))
        tcn_in, _ = self._mix(w)
        return self.head(self.tcn(self.bottleneck(tcn_in)))

    def forward(self, audio, mask_override: Tensor | np.ndarray | None = None) -> Tensor:
        """Enhanced mono waveform with the same number of samples as ``audio``.

        ``mask_override`` replaces the estimated mask (same (L, F) shape),
        e.g. all ones to run the plain encoder/decoder path.
        """
        w, T = self._encoded(_samples(audio))
        tcn_in, w_ref = self._mix(w)
        if mask_override is None:
            m = self.head(self.tcn(self.bottleneck(tcn_in)))
        else:
            m = mask_override if isinstance(mask_override, Tensor) else Tensor(mask_override)
        wave = overlap_add(self.decoder(apply_mask(w_ref, m)), self.frame_spec)
        return narrow(wave, 0, 0, T) if wave.shape[0] != T else wave

    __call__ = forward

    def enhance(self, audio) -> np.ndarray:
        return self.forward(audio).data.copy()


def _samples(audio) -> np.ndarray:
    if isinstance(audio, AudioBuffer):
        return audio.samples
    return np.asarray(audio, dtype=np.float64)


class _ShapeOnlyRng:
    """Stands in for a Generator when only parameter shapes are needed.

    ``np.empty`` leaves pages uncommitted, so even the 80M-parameter presets
    can be enumerated quickly.
    """

    def uniform(self, low, high, size):
        return np.empty(size)


def build_model(config: ModelConfig, materialize: bool = True) -> Model:
    """Instantiate ``config``; ``materialize=False`` skips initialization (counting only)."""
    return Model(config, materialize)
