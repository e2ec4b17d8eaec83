"""Command line front end for the texture-transfer upscaler.

Subcommands cover the pipeline stages (swap, sr), the metric harness
(eval), dataset utilities (pair, warp-ref), and config plumbing
(export-config).  Settings resolve as flags over config file over
built-in defaults.  Logs go to standard error; data goes to files or
standard output.  Exit codes: 0 success, 1 usage, 2 I/O, 3 shape or
config problems.
"""

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from typing import Optional, Tuple

import numpy as np

from .dataset_tool import (
    DEFAULT_CROP,
    DEFAULT_TAU,
    SimilarityLevels,
    gen_warped_ref,
    pair_directory,
    write_pairs,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    ImageIOError,
    MissingTapError,
    MissingWeightError,
    ShapeError,
    WeightFormatError,
)
from .feature_extractor import (
    WeightStore,
    extract_pyramid,
    load_weights,
    random_extractor_weights,
    vgg19_config,
)
from .feature_swap import SwapConfig, load_pyramid, save_pyramid, swap_pipeline
from .image_core import bicubic_resample, load_image, save_image
from .losses import (
    LossWeights,
    TextureLossConfig,
    perceptual_loss,
    psnr,
    rec_loss,
    ssim,
    texture_loss,
    total_objective,
)
from .transfer_net import (
    TransferConfig,
    make_content_base,
    random_generator_weights,
    transfer_forward,
)

log = logging.getLogger("nttsr")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_SHAPE = 3

THREADS_ENV = "NTT_THREADS"


class _UsageError(Exception):
    """A required setting is absent after flag/config/default resolution."""


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs, resolved from flags and file."""

    lr: Optional[str] = None
    refs: Tuple[str, ...] = ()
    hr: Optional[str] = None
    weights: Optional[str] = None
    out: Optional[str] = None
    swap: SwapConfig = SwapConfig()
    transfer: TransferConfig = TransferConfig()
    texture: TextureLossConfig = TextureLossConfig()
    loss_weights: LossWeights = LossWeights()
    seed: int = 0

    def to_json(self) -> str:
        w = self.loss_weights
        return json.dumps(
            {
                "paths": {
                    "lr": self.lr,
                    "refs": list(self.refs),
                    "hr": self.hr,
                    "weights": self.weights,
                    "out": self.out,
                },
                "swap": json.loads(self.swap.to_json()),
                "transfer": {
                    "levels": self.transfer.levels,
                    "blocks": self.transfer.blocks,
                    "channels": self.transfer.channels,
                },
                "texture_loss": {"layers": list(self.texture.layers)},
                "loss_weights": {
                    "rec": w.w_rec,
                    "per": w.w_per,
                    "adv": w.w_adv,
                    "tex": w.w_tex,
                },
                "seed": self.seed,
            },
            indent=2,
        )

    @staticmethod
    def from_json(text: str) -> "RunConfig":
        try:
            doc = json.loads(text)
            paths = doc.get("paths", {})
            transfer = doc.get("transfer", {})
            weights = doc.get("loss_weights", {})
            texture = doc.get("texture_loss", {})
            return RunConfig(
                lr=paths.get("lr"),
                refs=tuple(paths.get("refs", ())),
                hr=paths.get("hr"),
                weights=paths.get("weights"),
                out=paths.get("out"),
                swap=SwapConfig.from_json(json.dumps(doc.get("swap", {}))),
                transfer=TransferConfig(
                    levels=int(transfer.get("levels", 3)),
                    blocks=int(transfer.get("blocks", 16)),
                    channels=int(transfer.get("channels", 64)),
                ),
                texture=TextureLossConfig(
                    layers=tuple(texture.get("layers", ("relu1_1", "relu2_1", "relu3_1")))
                ),
                loss_weights=LossWeights(
                    w_rec=float(weights.get("rec", 1.0)),
                    w_per=float(weights.get("per", 1e-4)),
                    w_adv=float(weights.get("adv", 1e-6)),
                    w_tex=float(weights.get("tex", 1e-4)),
                ),
                seed=int(doc.get("seed", 0)),
            )
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError("bad run config document: %s" % exc) from exc


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _parse_floats(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError("expected comma-separated numbers, got %r" % text) from exc


def _resolve(args: argparse.Namespace) -> RunConfig:
    """Merge flags over an optional config file over defaults."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_json(_read_text(args.config))
    updates = {}
    for field in ("lr", "hr", "weights", "out"):
        value = getattr(args, field, None)
        if value is not None:
            updates[field] = value
    if getattr(args, "refs", None):
        updates["refs"] = tuple(args.refs)
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    swap_updates = {}
    if getattr(args, "patch_size", None) is not None:
        swap_updates["patch_size"] = args.patch_size
    if getattr(args, "stride", None) is not None:
        swap_updates["stride"] = args.stride
    if getattr(args, "scales", None) is not None:
        swap_updates["scales"] = _parse_floats(args.scales)
    if getattr(args, "rotations", None) is not None:
        swap_updates["rotations"] = _parse_floats(args.rotations)
    if swap_updates:
        updates["swap"] = dataclasses.replace(cfg.swap, **swap_updates)
    return dataclasses.replace(cfg, **updates)


def _thread_count(args: argparse.Namespace) -> int:
    value = getattr(args, "threads", None)
    if value is None:
        env = os.environ.get(THREADS_ENV)
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError("%s must be an integer, got %r" % (THREADS_ENV, env)) from exc
    if value < 1:
        raise ConfigError("thread count must be >= 1, got %d" % value)
    return value


def _require(value, name: str):
    if not value:
        raise _UsageError("%s is required (give the flag or set it in --config)" % name)
    return value


def _require_file(path: str, role: str) -> str:
    if not os.path.isfile(path):
        raise FileNotFoundError("%s file not found: %s" % (role, path))
    return path


def _load_image_arg(path: str, role: str) -> np.ndarray:
    _require_file(path, role)
    return load_image(path)


def _extractor_weights(cfg: RunConfig) -> WeightStore:
    if cfg.weights:
        _require_file(cfg.weights, "weights")
        return load_weights(cfg.weights)
    log.info("no weight file given, using seeded random weights (seed %d)", cfg.seed)
    return random_extractor_weights(vgg19_config(), seed=cfg.seed)


def _self_reference(lr: np.ndarray, factor: int) -> np.ndarray:
    return np.clip(bicubic_resample(lr, float(factor)), 0.0, 1.0)


def _cmd_swap(args) -> int:
    cfg = _resolve(args)
    lr = _load_image_arg(_require(cfg.lr, "--lr"), "input")
    out = _require(cfg.out, "--out")
    refs = [_load_image_arg(p, "reference") for p in cfg.refs]
    if not refs:
        log.info("no references given, matching against the upscaled input")
        refs = [_self_reference(lr, cfg.swap.upscale_factor)]
    weights = _extractor_weights(cfg)
    pyramid = swap_pipeline(lr, refs, weights, cfg.swap, threads=_thread_count(args))
    save_pyramid(pyramid, out)
    log.info("wrote %s (%d layers)", out, len(pyramid.layer_order))
    return EXIT_OK


def _cmd_sr(args) -> int:
    cfg = _resolve(args)
    lr = _load_image_arg(_require(cfg.lr, "--lr"), "input")
    out = _require(cfg.out, "--out")
    refs = [_load_image_arg(p, "reference") for p in cfg.refs]
    if not refs:
        log.info("no references given, running in self-reference mode")
        refs = [_self_reference(lr, cfg.swap.upscale_factor)]
    extractor = _extractor_weights(cfg)
    pyramid = swap_pipeline(lr, refs, extractor, cfg.swap, threads=_thread_count(args))
    order = sorted(
        pyramid.layer_order, key=lambda layer: pyramid.maps[layer].stride, reverse=True
    )
    if cfg.weights and "gen.out.kernel" in extractor:
        generator = extractor
    else:
        log.info("no generator weights in store, using seeded random ones")
        generator = random_generator_weights(
            [pyramid.maps[layer].channels for layer in order], cfg.transfer, seed=cfg.seed
        )
    sr = transfer_forward(make_content_base(lr, generator), pyramid, generator, cfg.transfer)
    save_image(sr, out)
    log.info("wrote %s (%dx%d)", out, sr.shape[1], sr.shape[0])
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _resolve(args)
    sr = _load_image_arg(_require(args.sr, "--sr"), "sr")
    hr = _load_image_arg(_require(cfg.hr, "--hr"), "hr")
    weights = _extractor_weights(cfg)
    psnr_val = psnr(sr, hr)
    result = {
        "psnr": "inf" if math.isinf(psnr_val) else psnr_val,
        "ssim": ssim(sr, hr),
        "rec": rec_loss(sr, hr),
        "per": perceptual_loss(sr, hr, weights),
    }
    parts = {"rec": result["rec"], "per": result["per"], "tex": 0.0}
    if args.pyramid:
        _require_file(args.pyramid, "pyramid")
        pyramid = load_pyramid(args.pyramid)
        sr_feats = extract_pyramid(sr, weights, vgg19_config(), cfg.texture.layers)
        result["tex"] = texture_loss(sr_feats, pyramid, cfg.texture)
        parts["tex"] = result["tex"]
    result["total"] = total_objective(parts, cfg.loss_weights)
    text = json.dumps(result, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        log.info("wrote %s", args.out)
    else:
        print(text)
    return EXIT_OK


def _cmd_pair(args) -> int:
    try:
        cutoffs = tuple(int(v) for v in args.levels.split(","))
    except ValueError as exc:
        raise ConfigError("--levels wants comma-separated integers, got %r"
                          % args.levels) from exc
    levels = SimilarityLevels(cutoffs)
    if args.weights:
        _require_file(args.weights, "weights")
        weights = load_weights(args.weights)
    else:
        log.info("no weight file given, using seeded random weights (seed %d)", args.seed)
        weights = random_extractor_weights(vgg19_config("relu3_1"), seed=args.seed)
    records = pair_directory(
        args.dir, weights, levels=levels, tau=args.tau,
        seed=args.seed, crop_size=args.crop_size,
    )
    write_pairs(records, args.out)
    counts = {}
    for rec in records:
        counts[rec.level] = counts.get(rec.level, 0) + 1
    summary = ", ".join("%s: %d" % (k, counts[k]) for k in sorted(counts))
    log.info("wrote %s (%d pairs; %s)", args.out, len(records), summary)
    return EXIT_OK


def _cmd_warp_ref(args) -> int:
    hr = _load_image_arg(args.hr, "hr")
    warped = gen_warped_ref(hr, seed=args.seed, zero_motion=args.zero_motion)
    save_image(warped, args.out)
    log.info("wrote %s", args.out)
    return EXIT_OK


def _cmd_export_config(args) -> int:
    text = _resolve(args).to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        log.info("wrote %s", args.out)
    else:
        print(text)
    return EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser, with_refs: bool = True):
    p.add_argument("--config", help="JSON run config; flags override its values")
    p.add_argument("--weights", help="NTTW weight file (omit for seeded random weights)")
    p.add_argument("--seed", type=int, help="seed for any randomized stand-ins")
    p.add_argument("--threads", type=int,
                   help="worker cap for data-parallel stages (env %s)" % THREADS_ENV)
    if with_refs:
        p.add_argument("--refs", nargs="+", help="reference images (omit for self-reference)")
        p.add_argument("--scales", help="comma-separated reference augmentation scales")
        p.add_argument("--rotations", help="comma-separated reference rotation degrees")
        p.add_argument("--patch-size", type=int, dest="patch_size")
        p.add_argument("--stride", type=int)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nttsr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("swap", help="match references and write the swapped-feature file")
    p.add_argument("--lr", help="low-resolution input image")
    p.add_argument("--out", help="output feature container (.nttw)")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_swap)

    p = sub.add_parser("sr", help="upscale an image, guided by references")
    p.add_argument("--lr", help="low-resolution input image")
    p.add_argument("--out", help="output image (.png)")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_sr)

    p = sub.add_parser("eval", help="score an upscaled image against ground truth")
    p.add_argument("--sr", help="upscaled image to score")
    p.add_argument("--hr", help="ground-truth image")
    p.add_argument("--pyramid", help="swapped-feature file enabling the texture term")
    p.add_argument("--out", help="write the JSON here instead of standard output")
    _add_run_flags(p, with_refs=False)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pair", help="score all image pairs in a directory")
    p.add_argument("--dir", required=True, help="directory of candidate images")
    p.add_argument("--out", required=True, help="output JSONL file")
    p.add_argument("--levels", default="866,361,87,0",
                   help="descending match-count cutoffs for L1..L4")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--crop-size", type=int, default=DEFAULT_CROP, dest="crop_size")
    p.add_argument("--weights", help="NTTW weight file (omit for seeded random weights)")
    p.set_defaults(func=_cmd_pair)

    p = sub.add_parser("warp-ref", help="synthesize a warped reference from a ground truth")
    p.add_argument("--hr", required=True, help="source image, at least 160x160")
    p.add_argument("--out", required=True, help="output image (.png)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-motion", action="store_true", dest="zero_motion",
                   help="identity transform, for plumbing checks")
    p.set_defaults(func=_cmd_warp_ref)

    p = sub.add_parser("export-config", help="print the effective run config as JSON")
    p.add_argument("--config", help="JSON run config to merge with defaults")
    p.add_argument("--out", help="write the JSON here instead of standard output")
    p.set_defaults(func=_cmd_export_config)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except _UsageError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except (ImageIOError, WeightFormatError, MissingWeightError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except (ShapeError, ConfigError, MissingTapError, DegenerateInputError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_SHAPE


if __name__ == "__main__":
    sys.exit(main())
