"""Command-line entry point: ``ictasnet {summary,enhance,train,gradcheck,synth}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import analysis, checkpoint
from .checks import REGISTRY, run_checks
from .config import PUBLISHED_PARAM_MILLIONS, PRESETS, ConfigFile, ModelConfig, get_preset
from .errors import CheckpointError, ConfigError, ShapeError, WavFormatError
from .frontend import AudioBuffer
from .models import build_model
from .training import Pair, synth_dataset, train
from .wavio import atomic_write_bytes, read_wav, write_wav

log = logging.getLogger("ictasnet")


def _load_config(args) -> ConfigFile:
    base = get_preset(args.preset) if args.preset else ModelConfig()
    cfg = ConfigFile.load(args.config, base) if args.config else ConfigFile(model=base)
    return cfg


def _deviation(name: str, total: int) -> float:
    return 100.0 * (total / 1e6 - PUBLISHED_PARAM_MILLIONS[name]) / PUBLISHED_PARAM_MILLIONS[name]


def cmd_summary(args) -> int:
    if args.diff_paper and not args.preset and not args.config:
        print(f"{'preset':<10} {'variant':<12} {'params':>12} {'ours':>9} {'published':>11} {'dev %':>7}")
        for name, preset in PRESETS.items():
            if name not in PUBLISHED_PARAM_MILLIONS:
                continue
            total = analysis.count_parameters(build_model(preset, materialize=False))
            print(f"{name:<10} {preset.variant:<12} {total:>12,} {analysis.format_millions(total):>9} "
                  f"{PUBLISHED_PARAM_MILLIONS[name]:>9} M {_deviation(name, total):>+7.2f}")
        return 0
    cfg = _load_config(args)
    model = build_model(cfg.model, materialize=False)
    summary = analysis.summarize(model, args.sample_rate)
    if args.json:
        print(summary.to_json())
    else:
        print(summary.to_text())
    if args.diff_paper and args.preset in PUBLISHED_PARAM_MILLIONS:
        print(f"published: {PUBLISHED_PARAM_MILLIONS[args.preset]} M, deviation "
              f"{_deviation(args.preset, summary.total):+.2f} %")
    return 0


def cmd_enhance(args) -> int:
    cfg = _load_config(args)
    audio = read_wav(args.inp)
    if audio.sample_rate != 16000:
        log.warning("sample rate %d Hz differs from 16 kHz; processing without resampling", audio.sample_rate)
    if audio.num_channels != cfg.model.M:
        raise ShapeError(f"{args.inp} has {audio.num_channels} channels, config expects M={cfg.model.M}")
    model = build_model(cfg.model)
    checkpoint.load_into(model, args.checkpoint)
    enhanced = model.enhance(audio)
    write_wav(args.out, AudioBuffer(enhanced, audio.sample_rate), args.encoding)
    return 0


def _read_pairs(data_dir: Path) -> list[Pair]:
    pairs = []
    for noisy_path in sorted(data_dir.glob("*_noisy.wav")):
        clean_path = noisy_path.with_name(noisy_path.name.replace("_noisy.wav", "_clean.wav"))
        if not clean_path.exists():
            raise FileNotFoundError(f"no clean partner for {noisy_path}")
        clean = read_wav(clean_path)
        pairs.append(Pair(read_wav(noisy_path), clean.samples[:, 0].copy()))
    if not pairs:
        raise FileNotFoundError(f"no *_noisy.wav files in {data_dir}")
    return pairs


def cmd_train(args) -> int:
    cfg = _load_config(args)
    model_cfg, train_cfg = cfg.model, cfg.train
    if args.seed is not None:
        model_cfg = model_cfg.replace(seed=args.seed)
        train_cfg = train_cfg.replace(seed=args.seed)
    if args.steps is not None:
        train_cfg = train_cfg.replace(steps=args.steps)
    if args.synth:
        data = synth_dataset(train_cfg.seed, args.count, args.duration, model_cfg.M,
                             reference_channel=model_cfg.reference_channel)
    elif args.data_dir:
        data = _read_pairs(Path(args.data_dir))
    else:
        raise ConfigError("train needs --synth or --data-dir")
    model = build_model(model_cfg)
    history = train(model, data, train_cfg, log_every=args.log_every)
    out = Path(args.out)
    csv_path = Path(args.loss_csv) if args.loss_csv else out.with_suffix(".csv")
    checkpoint.save_checkpoint(out, model.state_dict())
    atomic_write_bytes(csv_path, history.to_csv().encode())
    final = history.records[-1] if history.records else None
    if final is not None:
        print(f"trained {len(history.records)} steps; final loss {final.loss:.4f} (SDR {final.sdr_db:.2f} dB)")
    print(f"checkpoint: {out}\nloss csv: {csv_path}")
    return 0


def cmd_gradcheck(args) -> int:
    if args.op:
        unknown = [n for n in args.op if n not in REGISTRY]
        if unknown:
            raise ConfigError(f"unknown op(s) {unknown}; available: {', '.join(REGISTRY)}")
        names = args.op
    else:
        names = None
    ok = True
    for name, err, tol, passed in run_checks(names):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:<26} max rel err {err:.3e}  (tol {tol:.0e})")
    return 0 if ok else 1


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pairs = synth_dataset(args.seed, args.count, args.duration, args.channels, args.sample_rate)
    for i, pair in enumerate(pairs):
        write_wav(out / f"pair{i:04d}_noisy.wav", pair.noisy, args.encoding)
        write_wav(out / f"pair{i:04d}_clean.wav", AudioBuffer(pair.clean, pair.noisy.sample_rate), args.encoding)
    print(f"wrote {len(pairs)} pairs to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ictasnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_opts(p):
        p.add_argument("--config", help="YAML file with model/train sections")
        p.add_argument("--preset", choices=sorted(PRESETS), help="named hyperparameter preset")

    p = sub.add_parser("summary", help="per-layer table, parameter count and receptive field")
    model_opts(p)
    p.add_argument("--diff-paper", action="store_true", help="compare totals against published sizes")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("enhance", help="enhance a multichannel WAV into a mono WAV")
    model_opts(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--encoding", choices=("pcm16", "float32"), default="float32")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("train", help="train on synthetic or on-disk pairs")
    model_opts(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--synth", action="store_true", help="train on generated pairs")
    src.add_argument("--data-dir", help="directory of *_noisy.wav / *_clean.wav pairs")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-csv", help="loss history path (default: checkpoint path with .csv)")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--count", type=int, default=1, help="number of synthetic pairs")
    p.add_argument("--duration", type=float, default=0.5, help="synthetic pair length in seconds")
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--all", action="store_true")
    g.add_argument("--op", action="append", help=f"one of: {', '.join(REGISTRY)}")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="write synthetic noisy/clean WAV pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--duration", type=float, default=0.5)
    p.add_argument("--channels", type=int, default=2)
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--encoding", choices=("pcm16", "float32"), default="pcm16")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ShapeError, CheckpointError, WavFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
