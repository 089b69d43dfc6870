"""Command-line pipeline: synth -> pretrain -> invert -> generate -> evaluate.

Configuration is a plain-text key=value file plus KEY=VALUE overrides on the
command line (overrides win). Unknown keys are rejected. Every run prints its
fully-resolved configuration to stderr. Relative output paths resolve under
$MOTIONINV_OUTDIR when that variable is set.

Exit codes: 0 success, 2 configuration error, 3 file/format error,
4 numeric failure (NaN or divergence).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import denoiser as dn
from . import diffusion
from . import embeddings as emb
from . import formats
from . import inversion
from . import metrics
from . import synthdata
from .errors import ConfigError, FormatError, NumericError

OUTDIR_ENV = "MOTIONINV_OUTDIR"

# key -> (parser, default, help)
CONFIG_KEYS: dict[str, tuple] = {
    "base_channels": (int, 32, "denoiser base channel count"),
    "channel_mults": (str, "1,2", "per-level channel multipliers, comma-separated"),
    "height": (int, 16, "latent/canvas height"),
    "width": (int, 16, "latent/canvas width"),
    "frames": (int, 8, "frames per video"),
    "temporal_per_level": (int, 1, "temporal attention modules per level per half"),
    "cond_vocab": (int, 8, "prompt-id vocabulary size"),
    "time_dim": (int, 32, "time-embedding dimension"),
    "timesteps": (int, 200, "diffusion steps T"),
    "beta_start": (float, 1e-4, "first beta of the linear schedule"),
    "beta_end": (float, 2e-2, "last beta of the linear schedule"),
    "pretrain_steps": (int, 6000, "pretraining optimizer steps"),
    "pretrain_lr": (float, 2e-3, "pretraining learning rate"),
    "invert_steps": (int, 400, "inversion optimizer steps"),
    "invert_lr": (float, 1e-2, "inversion learning rate"),
    "adam_beta1": (float, 0.9, "first moment coefficient"),
    "adam_beta2": (float, 0.999, "second moment coefficient"),
    "clip_norm": (float, 1.0, "global gradient-norm clip (<=0 disables)"),
    "log_every": (int, 25, "loss log cadence"),
    "qk_spatial": (str, "one_d", "query/key embedding spatial shape: one_d|two_d"),
    "v_spatial": (str, "two_d", "value embedding spatial shape: one_d|two_d"),
    "strategy": (str, "differential", "inference strategy: differential|normalize|vanilla"),
    "sample_steps": (int, 50, "denoising iterations when generating"),
    "seed": (int, 0, "base seed for training streams and sampling noise"),
    "appearance_seed": (int, 0, "appearance seed for synth rendering"),
    "cond": (int, 0, "prompt id"),
    "script": (str, "pan_right_hold", "script name for synth (see --list-scripts)"),
    "video": (str, "", "input MVID path"),
    "params": (str, "", "input MDEN path"),
    "embeddings": (str, "", "input MEMB path"),
    "ref": (str, "", "reference MVID path (evaluate)"),
    "out": (str, "", "output path"),
    "truth": (str, "", "ground-truth JSON output path (synth)"),
    "loss_log": (str, "", "loss log output path (invert/pretrain)"),
    "export_ppm": (int, 0, "also write per-frame PPM files next to MVID output"),
}


def parse_value(key: str, raw: str):
    if key not in CONFIG_KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = CONFIG_KEYS[key][0]
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def load_config(path: str | None, overrides: list[str]) -> dict:
    cfg = {k: default for k, (_, default, _) in CONFIG_KEYS.items()}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            cfg[key] = parse_value(key, raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        cfg[key] = parse_value(key, raw)
    return cfg


def resolve_out(cfg: dict, key: str) -> str:
    path = cfg[key]
    if not path:
        raise ConfigError(f"config key {key!r} (an output path) is required")
    outdir = os.environ.get(OUTDIR_ENV, "")
    if outdir and not os.path.isabs(path):
        return os.path.join(outdir, path)
    return path


def require_input(cfg: dict, key: str) -> str:
    path = cfg[key]
    if not path:
        raise ConfigError(f"config key {key!r} (an input path) is required")
    if not os.path.exists(path):
        raise FormatError(f"{path}: input file does not exist")
    return path


def log_config(cfg: dict, command: str) -> None:
    print(f"# motioninv {command} resolved config", file=sys.stderr)
    for key in sorted(cfg):
        print(f"# {key}={cfg[key]}", file=sys.stderr)


def _spec(cfg: dict) -> dn.DenoiserSpec:
    try:
        mults = tuple(int(x) for x in str(cfg["channel_mults"]).split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad channel_mults {cfg['channel_mults']!r}") from exc
    try:
        return dn.DenoiserSpec(
            base_channels=cfg["base_channels"], height=cfg["height"], width=cfg["width"],
            frames=cfg["frames"], channel_mults=mults,
            temporal_per_level=cfg["temporal_per_level"], cond_vocab=cfg["cond_vocab"],
            time_dim=cfg["time_dim"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _schedule(cfg: dict) -> diffusion.NoiseSchedule:
    try:
        return diffusion.linear_schedule(cfg["timesteps"], cfg["beta_start"], cfg["beta_end"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _shape_config(cfg: dict) -> emb.EmbeddingShapeConfig:
    try:
        return emb.EmbeddingShapeConfig(
            qk_spatial=cfg["qk_spatial"], v_spatial=cfg["v_spatial"],
            inference_strategy=cfg["strategy"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _inversion_config(cfg: dict, steps_key: str, lr_key: str) -> inversion.InversionConfig:
    try:
        return inversion.InversionConfig(
            steps=cfg[steps_key], lr=cfg[lr_key], beta1=cfg["adam_beta1"],
            beta2=cfg["adam_beta2"], clip_norm=cfg["clip_norm"], seed=cfg["seed"],
            shape_config=_shape_config(cfg), log_every=cfg["log_every"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_loss_log(path: str, losses: list[float]) -> None:
    text = "".join(f"{i}\t{v:.12g}\n" for i, v in enumerate(losses))
    formats.atomic_write(path, text.encode())


def cmd_synth(cfg: dict) -> None:
    catalog = synthdata.script_catalog(cfg["frames"], cfg["height"], cfg["width"])
    name = cfg["script"]
    if name not in catalog:
        raise ConfigError(
            f"unknown script {name!r}; choose from: {', '.join(sorted(catalog))}"
        )
    video, truth = synthdata.render(catalog[name], cfg["appearance_seed"])
    out = resolve_out(cfg, "out")
    synthdata.save_video(video, out)
    if cfg["truth"]:
        import json

        payload = {"script": name, "objects": [p.tolist() for p in truth.positions]}
        formats.atomic_write(
            resolve_out(cfg, "truth"), json.dumps(payload, indent=1).encode()
        )
    if cfg["export_ppm"]:
        synthdata.export_ppm(video, out + ".frame")
    print(f"wrote {out}")


def cmd_pretrain(cfg: dict) -> None:
    spec = _spec(cfg)
    dataset = synthdata.corpus_videos(spec.frames, spec.height, spec.width)
    params, losses = inversion.pretrain(
        dataset, spec, _inversion_config(cfg, "pretrain_steps", "pretrain_lr"),
        _schedule(cfg),
    )
    out = resolve_out(cfg, "out")
    dn.save_params(params, out)
    if cfg["loss_log"]:
        _write_loss_log(resolve_out(cfg, "loss_log"), losses)
    print(f"wrote {out}")


def cmd_invert(cfg: dict) -> None:
    params = dn.load_params(require_input(cfg, "params"))
    if not params.frozen:
        params = params.freeze()
    video = synthdata.load_video(require_input(cfg, "video"))
    if video.shape[2] != params.spec.frames:
        raise FormatError(
            f"video frame count {video.shape[2]} does not match denoiser spec "
            f"frames {params.spec.frames}"
        )
    before = params.checksum()
    m, losses = inversion.invert(
        video, params, cfg["cond"], _inversion_config(cfg, "invert_steps", "invert_lr"),
        _schedule(cfg),
    )
    if params.checksum() != before:
        raise NumericError("denoiser weights changed during inversion")
    out = resolve_out(cfg, "out")
    emb.save(m, out)
    if cfg["loss_log"]:
        _write_loss_log(resolve_out(cfg, "loss_log"), losses)
    print(f"wrote {out}")


def cmd_generate(cfg: dict) -> None:
    params = dn.load_params(require_input(cfg, "params")).freeze()
    m = None
    if cfg["embeddings"]:
        m = emb.load(require_input(cfg, "embeddings"))
        if not emb.matches_modules(m, params.spec.temporal_modules(), params.spec.frames):
            raise FormatError(
                "embedding checkpoint does not match the denoiser spec "
                f"(modules {m.module_shapes}, frames {m.n_frames})"
            )
        m = replace_strategy(m, cfg["strategy"])
    video = diffusion.sample(
        params, m, cfg["cond"], cfg["seed"], cfg["sample_steps"], _schedule(cfg)
    )
    if not np.all(np.isfinite(video)):
        raise NumericError("generated video contains non-finite values")
    out = resolve_out(cfg, "out")
    synthdata.save_video(video, out)
    if cfg["export_ppm"]:
        synthdata.export_ppm(video, out + ".frame")
    print(f"wrote {out}")


def replace_strategy(m: emb.MotionEmbeddingSet, strategy: str) -> emb.MotionEmbeddingSet:
    from dataclasses import replace

    if strategy == m.config.inference_strategy:
        return m
    return replace(m, config=replace(m.config, inference_strategy=strategy))


def cmd_evaluate(cfg: dict) -> None:
    ref_path = require_input(cfg, "ref")
    out_path = require_input(cfg, "video")
    ref = synthdata.load_video(ref_path)
    video = synthdata.load_video(out_path)
    ref_tracks = metrics.track(ref)
    out_tracks = metrics.track(video)
    entries = [
        ("motion_fidelity", metrics.motion_fidelity(ref_tracks, out_tracks),
         [ref_path, out_path]),
        ("temporal_consistency_reference", metrics.temporal_consistency(ref), [ref_path]),
        ("temporal_consistency_output", metrics.temporal_consistency(video), [out_path]),
        ("frechet_distance",
         metrics.frechet_distance(metrics.video_features(ref), metrics.video_features(video)),
         [ref_path, out_path]),
    ]
    report = metrics.format_report(entries)
    out = resolve_out(cfg, "out")
    formats.atomic_write(out, report.encode())
    sys.stdout.write(report)


COMMANDS = {
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "invert": cmd_invert,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
}


def _config_help() -> str:
    lines = ["config keys (key=value in the config file or on the command line):"]
    for key, (kind, default, help_text) in CONFIG_KEYS.items():
        lines.append(f"  {key:<20} {help_text} (default: {default!r})")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motioninv",
        description=__doc__,
        epilog=_config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="pipeline stage")
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--list-scripts", action="store_true",
                        help="print available synth script names and exit")
    parser.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                        help="config overrides (win over the file)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, list(args.overrides))
        if args.list_scripts:
            for name in sorted(synthdata.script_catalog(cfg["frames"], cfg["height"], cfg["width"])):
                print(name)
            return 0
        log_config(cfg, args.command)
        COMMANDS[args.command](cfg)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
