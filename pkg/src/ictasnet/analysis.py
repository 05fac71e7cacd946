"""Parameter counting, receptive fields and per-layer model summaries."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .config import ModelConfig
from .layers import Module
from .models import Model
from .tcn import TCN, TCN3D, ScheduledTCN, downsized_schedule, upsized_schedule


def count_parameters(model: Module) -> int:
    """Number of trainable scalars, found by walking the parameter set."""
    return sum(p.size for _, p in model.named_parameters())


def receptive_field(D: int, S: int, kernel: int = 3) -> int:
    """Frames seen by one output of S stacks of D blocks with dilations 1..2**(D-1)."""
    return 1 + S * (kernel - 1) * (2 ** D - 1)


def format_millions(count: int) -> str:
    """Three significant figures in millions, like ``1.67 M`` or ``0.360 M``."""
    m = count / 1e6
    if m >= 10:
        return f"{m:.1f} M"
    if m >= 1:
        return f"{m:.2f} M"
    return f"{m:.3f} M"


# Closed-form counts. Every 1x1 and depthwise conv carries a bias; each
# block has two PReLU slopes and two (gain, bias) norm pairs of size H.
def _pointwise(n_in: int, n_out: int) -> int:
    return n_in * n_out + n_out


def block_1d_parameters(N: int, H: int) -> int:
    return _pointwise(N, H) + 4 * H + 2 * _pointwise(H, N) + 2 + 4 * H


def block_ic_parameters(C: int, H: int) -> int:
    return _pointwise(C, H) + 10 * H + 2 * _pointwise(H, C) + 2 + 4 * H


def _resize_parameters(src: tuple[int, int], dst: tuple[int, int]) -> int:
    total = 0
    if src[0] != dst[0]:
        total += _pointwise(src[0], dst[0])
    if src[1] != dst[1]:
        total += _pointwise(src[1], dst[1])
    return total


def closed_form_parameters(cfg: ModelConfig) -> int:
    """Parameter total from the architecture formulas alone (no instantiation)."""
    frontend = 2 * cfg.K * cfg.F
    blocks = cfg.S * cfg.D
    head_a = 1 + _pointwise(cfg.N, cfg.F)
    if cfg.variant in ("SC", "MC"):
        return frontend + _pointwise(cfg.F, cfg.N) + blocks * block_1d_parameters(cfg.N, cfg.H) + head_a
    if cfg.variant == "TwoD":
        return frontend + _pointwise(cfg.F * cfg.M, cfg.N) + blocks * block_1d_parameters(cfg.N, cfg.H) + head_a
    if cfg.variant in ("ThreeD", "IC"):
        bottleneck = _pointwise(cfg.F, cfg.N) + _pointwise(cfg.M, cfg.C)
        head_b = 1 + _pointwise(cfg.C, 1) + _pointwise(cfg.N, cfg.F)
        if cfg.variant == "ThreeD":
            tcn = cfg.C * blocks * block_1d_parameters(cfg.N, cfg.H)
        else:
            tcn = blocks * block_ic_parameters(cfg.C, cfg.H)
        return frontend + bottleneck + tcn + head_b
    make = downsized_schedule if cfg.variant == "ICDownsized" else upsized_schedule
    schedule = make(cfg.N, cfg.C, cfg.S)
    ratio = cfg.H // cfg.C
    target = (max(n for n, _ in schedule), max(c for _, c in schedule))
    n1, c1 = schedule[0]
    total = frontend + _pointwise(cfg.F, n1) + _pointwise(cfg.M, c1)
    for s, (n, c) in enumerate(schedule):
        total += cfg.D * block_ic_parameters(c, ratio * c)
        total += _resize_parameters((n, c), target)
        if s + 1 < len(schedule):
            total += _resize_parameters((n, c), schedule[s + 1])
    return total + 1 + _pointwise(target[1], 1) + _pointwise(target[0], cfg.F)


@dataclass
class LayerRecord:
    name: str
    shape_in: str
    shape_out: str
    parameters: int


@dataclass
class ModelSummary:
    variant: str
    layers: list[LayerRecord]
    total: int
    receptive_field_frames: int
    receptive_field_seconds: float
    num_blocks: int
    closed_form: int
    extras: dict = field(default_factory=dict)

    @property
    def total_millions(self) -> str:
        return format_millions(self.total)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_millions"] = self.total_millions
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        width = max(len(r.name) for r in self.layers)
        lines = [f"{'layer':<{width}}  {'input':<16} {'output':<16} {'params':>12}"]
        lines.append("-" * len(lines[0]))
        for r in self.layers:
            lines.append(f"{r.name:<{width}}  {r.shape_in:<16} {r.shape_out:<16} {r.parameters:>12,}")
        lines.append("-" * len(lines[0]))
        lines.append(f"variant: {self.variant}   blocks: {self.num_blocks}")
        lines.append(f"total parameters: {self.total:,} ({self.total_millions})")
        lines.append(f"closed-form count: {self.closed_form:,}")
        lines.append(
            f"receptive field: {self.receptive_field_frames} frames "
            f"({self.receptive_field_seconds:.3f} s)"
        )
        return "\n".join(lines)


def _shape(*dims) -> str:
    return "(" + ", ".join(str(d) for d in dims) + ")"


def summarize(model: Model, sample_rate: int = 16000) -> ModelSummary:
    cfg = model.config
    layers: list[LayerRecord] = []

    def add(name: str, module: Module | None, shape_in: str, shape_out: str) -> None:
        if module is not None:
            layers.append(LayerRecord(name, shape_in, shape_out, count_parameters(module)))

    add("encoder", model.encoder, _shape("L", cfg.K, cfg.M), _shape("L", cfg.F, cfg.M))
    tcn = model.tcn
    if cfg.variant in ("SC", "MC", "TwoD"):
        fin = cfg.F * cfg.M if cfg.variant == "TwoD" else cfg.F
        add("bottleneck", model.bottleneck, _shape("L", fin), _shape("L", cfg.N))
        for s, st in enumerate(tcn.stacks):
            for b, blk in enumerate(st.blocks):
                add(f"tcn.stack{s}.block{b} (d={blk.dilation})", blk,
                    _shape("L", cfg.N), _shape("L", cfg.N))
        head_in = _shape("L", cfg.N)
    elif isinstance(tcn, TCN3D):
        add("bottleneck", model.bottleneck, _shape("L", cfg.F, cfg.M), _shape("L", cfg.N, cfg.C))
        for c, sl in enumerate(tcn.slices):
            for s, st in enumerate(sl.stacks):
                for b, blk in enumerate(st.blocks):
                    add(f"tcn.slice{c}.stack{s}.block{b} (d={blk.dilation})", blk,
                        _shape("L", cfg.N), _shape("L", cfg.N))
        head_in = _shape("L", cfg.N, cfg.C)
    elif isinstance(tcn, ScheduledTCN):
        n1, c1 = tcn.input_dims
        add("bottleneck", model.bottleneck, _shape("L", cfg.F, cfg.M), _shape("L", n1, c1))
        for s, st in enumerate(tcn.stacks):
            n, c = tcn.schedule[s]
            for b, blk in enumerate(st.blocks):
                add(f"tcn.stack{s}.block{b} (d={blk.dilation})", blk, _shape("L", n, c), _shape("L", n, c))
            target = _shape("L", tcn.n_out, tcn.c_out)
            if count_parameters(tcn.skip_resizers[s]):
                add(f"tcn.skip_resize{s}", tcn.skip_resizers[s], _shape("L", n, c), target)
            if s < len(tcn.transitions):
                add(f"tcn.transition{s}", tcn.transitions[s], _shape("L", n, c),
                    _shape("L", *tcn.schedule[s + 1]))
        head_in = _shape("L", tcn.n_out, tcn.c_out)
    else:
        assert isinstance(tcn, TCN)
        add("bottleneck", model.bottleneck, _shape("L", cfg.F, cfg.M), _shape("L", cfg.N, cfg.C))
        for s, st in enumerate(tcn.stacks):
            for b, blk in enumerate(st.blocks):
                add(f"tcn.stack{s}.block{b} (d={blk.dilation})", blk,
                    _shape("L", cfg.N, cfg.C), _shape("L", cfg.N, cfg.C))
        head_in = _shape("L", cfg.N, cfg.C)
    add("mask_head", model.head, head_in, _shape("L", cfg.F))
    add("decoder", model.decoder, _shape("L", cfg.F), _shape("L", cfg.K))

    frames = receptive_field(cfg.D, cfg.S, 3)
    return ModelSummary(
        variant=cfg.variant,
        layers=layers,
        total=sum(r.parameters for r in layers),
        receptive_field_frames=frames,
        receptive_field_seconds=frames * cfg.hop / sample_rate,
        num_blocks=model.num_blocks,
        closed_form=closed_form_parameters(cfg),
    )
