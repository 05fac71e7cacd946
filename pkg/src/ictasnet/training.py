"""SDR objective, Adam, the training loop and a synthetic multichannel corpus."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import TrainConfig
from .errors import ShapeError
from .frontend import AudioBuffer
from .tensor import Tensor

logger = logging.getLogger(__name__)

SDR_CAP_DB = 240.0
_DB = 20.0 / math.log(10.0)


def sdr(s, s_hat) -> float:
    """``20 log10(||s|| / ||s - s_hat||)`` in dB, capped at +240 dB."""
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    s_hat = np.asarray(s_hat, dtype=np.float64).reshape(-1)
    if s.shape != s_hat.shape:
        raise ShapeError(f"sdr: length mismatch {s.shape[0]} vs {s_hat.shape[0]}")
    ref = np.linalg.norm(s)
    if ref == 0.0:
        raise ValueError("sdr is undefined for an all-zero reference")
    err = np.linalg.norm(s - s_hat)
    if err < 1e-12 * ref:
        return SDR_CAP_DB
    return _DB * math.log(ref / err)


def sdr_loss(s, s_hat: Tensor) -> Tensor:
    """Negative SDR as a differentiable scalar of ``s_hat``.

    Past the cap the loss is the constant -240 with zero gradient.
    """
    s = np.asarray(s, dtype=np.float64).reshape(s_hat.shape)
    value = -sdr(s, s_hat.data)
    diff = s_hat.data - s
    err2 = float(np.dot(diff.reshape(-1), diff.reshape(-1)))

    def backward(g):
        if value <= -SDR_CAP_DB:
            return (np.zeros_like(diff),)
        return (g * _DB * diff / err2,)

    return Tensor._from_op(np.asarray(value), (s_hat,), backward)


def batch_sdr_loss(pairs: Sequence[tuple[np.ndarray, Tensor]]) -> Tensor:
    """Mean of per-utterance SDR losses."""
    total = None
    for s, s_hat in pairs:
        loss = sdr_loss(s, s_hat)
        total = loss if total is None else total + loss
    return total * (1.0 / len(pairs))


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray | None], state: AdamState,
              config: TrainConfig) -> None:
    """One bias-corrected Adam update, in place. ``None`` gradients count as zero."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ShapeError("adam_step: parameter, gradient and state lists differ in length")
    state.step += 1
    t = state.step
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if m.shape != p.shape:
            raise ShapeError(f"adam_step: state {m.shape} does not match parameter {p.shape}")
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.shape:
            raise ShapeError(f"adam_step: gradient {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)


class Adam:
    def __init__(self, params: Sequence[Tensor], config: TrainConfig):
        self.params = list(params)
        self.config = config
        self.state = AdamState.for_params(self.params)

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state, self.config)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


@dataclass
class Pair:
    noisy: AudioBuffer
    clean: np.ndarray
    snr_db: float = float("nan")


@dataclass
class StepRecord:
    step: int
    loss: float
    sdr_db: float


@dataclass
class History:
    records: list[StepRecord] = field(default_factory=list)

    def append(self, step: int, loss: float) -> None:
        self.records.append(StepRecord(step, loss, -loss))

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.records]

    def to_csv(self) -> str:
        rows = ["step,loss,sdr_db"]
        rows += [f"{r.step},{r.loss!r},{r.sdr_db!r}" for r in self.records]
        return "\n".join(rows) + "\n"


def train(model, dataset: Sequence[Pair], config: TrainConfig, log_every: int = 0) -> History:
    """Minimize the batch-mean negative SDR with Adam.

    Batches are taken from ``dataset`` in order, wrapping around, so the
    run is fully determined by the model seed and the data.
    """
    if not dataset:
        raise ValueError("empty dataset")
    M = model.config.M
    for i, pair in enumerate(dataset):
        if pair.noisy.num_channels != M:
            raise ShapeError(f"pair {i} has {pair.noisy.num_channels} channels, model expects {M}")
    opt = Adam(model.parameters(), config)
    history = History()
    cursor = 0
    for step in range(config.steps):
        batch = []
        for _ in range(config.batch):
            batch.append(dataset[cursor % len(dataset)])
            cursor += 1
        loss = batch_sdr_loss([(p.clean, model.forward(p.noisy)) for p in batch])
        loss.backward()
        opt.step()
        opt.zero_grad()
        history.append(step, loss.item())
        if log_every and step % log_every == 0:
            logger.info("step %d  loss %.4f", step, loss.item())
    return history


def evaluate(model, dataset: Iterable[Pair]) -> float:
    """Mean SDR (dB) of the model's enhancement over ``dataset``."""
    scores = [sdr(p.clean, model.enhance(p.noisy)) for p in dataset]
    return float(np.mean(scores))


def _shift(x: np.ndarray, lag: int) -> np.ndarray:
    out = np.zeros_like(x)
    if lag > 0:
        out[lag:] = x[:-lag]
    elif lag < 0:
        out[:lag] = x[-lag:]
    else:
        out[:] = x
    return out


def synth_pair(rng: np.random.Generator, duration_s: float, M: int, sample_rate: int,
               reference_channel: int = 1) -> Pair:
    T = int(round(duration_s * sample_rate))
    t = np.arange(T) / sample_rate
    clean = np.zeros(T)
    for _ in range(rng.integers(2, 5)):
        freq = rng.uniform(100.0, min(2000.0, 0.4 * sample_rate))
        am_rate = rng.uniform(1.0, 8.0)
        depth = rng.uniform(0.2, 0.8)
        envelope = 1.0 + depth * np.sin(2 * np.pi * am_rate * t + rng.uniform(0, 2 * np.pi))
        clean += rng.uniform(0.2, 1.0) * envelope * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    delay = int(rng.integers(0, 5))
    snr_db = float(rng.uniform(0.0, 10.0))
    noisy = np.empty((T, M))
    for m in range(M):
        speech = _shift(clean, (m + 1 - reference_channel) * delay)
        noise = rng.standard_normal(T)
        noise *= np.linalg.norm(speech) / (np.linalg.norm(noise) * 10 ** (snr_db / 20))
        noisy[:, m] = speech + noise
    scale = 0.9 / max(np.max(np.abs(noisy)), np.max(np.abs(clean)))
    return Pair(AudioBuffer(noisy * scale, sample_rate), clean * scale, snr_db)


def synth_dataset(seed: int, count: int, duration_s: float = 0.5, M: int = 2,
                  sample_rate: int = 16000, reference_channel: int = 1) -> list[Pair]:
    """Noisy multichannel / clean reference pairs built from modulated tones.

    Channel m carries the clean signal shifted by ``(m - ref) * delay``
    samples plus white noise at the pair's SNR (measured per channel
    against that channel's speech component).
    """
    rng = np.random.default_rng(seed)
    return [synth_pair(rng, duration_s, M, sample_rate, reference_channel) for _ in range(count)]
