"""Command-line interface: ``ycda <command> [options]``.

Exit codes: 0 success, 1 failed check or runtime error, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .autograd import (
    GROUP_NAMES,
    LabeledImages,
    TrainConfig,
    grad_check,
    gradcheck_input,
    train_toy,
)
from .colorspace import TRANSFORMS
from .ica import VARIANTS
from .model import (
    KIND_FEATURES,
    ConvStem,
    WeightFileError,
    cost_report,
    init_block,
    load_block,
    manifest,
    save_block,
    write_container,
)
from .ppm import ImageError, load_image, write_ppm
from .stats import compare_groups, group_summary, stats_report, to_csv
from .stem import ACTIVATIONS, ConfigError, StemConfig
from .synth import SHAPES, TOY_SPEC, SynthSpec, synth_pairs, toy_dataset


class UsageError(Exception):
    pass


def _add_config_flags(p: argparse.ArgumentParser, activation: str = "silu") -> None:
    g = p.add_argument_group("block configuration")
    g.add_argument("--unshuffle-factor", type=int, default=2)
    g.add_argument("--multiplier", type=int, default=2)
    g.add_argument("--kernel-size", type=int, default=3)
    g.add_argument("--activation", choices=ACTIVATIONS, default=activation)
    g.add_argument("--reduction", type=int, default=4)
    g.add_argument("--variant", choices=VARIANTS, default="ica")
    g.add_argument("--no-mlp-bias", action="store_true", help="bottleneck MLP without biases")
    g.add_argument("--color", choices=sorted(TRANSFORMS), default="bt601-full")


def _add_synth_flags(p: argparse.ArgumentParser, spec: SynthSpec) -> None:
    g = p.add_argument_group("synthetic fixture")
    g.add_argument("--size", type=int, default=spec.size)
    g.add_argument("--shape", choices=SHAPES, default=spec.shape)
    g.add_argument("--radius", type=int, default=spec.object_radius)
    g.add_argument("--contrast", type=float, default=spec.texture_contrast)
    g.add_argument("--delta-chroma", type=float, default=spec.delta_chroma)
    g.add_argument("--noise", type=float, default=spec.noise)


def _block_from_args(args):
    try:
        cfg = StemConfig(
            unshuffle_factor=args.unshuffle_factor,
            activation=args.activation,
            multiplier=args.multiplier,
            kernel_size=args.kernel_size,
        )
        return init_block(
            cfg,
            seed=args.seed,
            reduction=args.reduction,
            variant=args.variant,
            mlp_bias=not args.no_mlp_bias,
            color=args.color,
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def _spec_from_args(args, base: SynthSpec) -> SynthSpec:
    try:
        return replace(
            base,
            size=args.size,
            shape=args.shape,
            object_radius=args.radius,
            texture_contrast=args.contrast,
            delta_chroma=args.delta_chroma,
            noise=args.noise,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands ---------------------------------------------------------------


def cmd_init_weights(args) -> int:
    block = _block_from_args(args)
    if args.zero_mlp:
        block = block.with_parameters(
            {k: np.zeros_like(v) for k, v in block.named_parameters().items()
             if k in ("ica.w1", "ica.b1", "ica.w2", "ica.b2")}
        )
    save_block(block, args.out)
    print(f"wrote {args.out} ({block.num_params()} parameters)")
    return 0


def cmd_synth(args) -> int:
    spec = _spec_from_args(args, SynthSpec())
    try:
        sal, cam = synth_pairs(args.pairs, spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, (s, c) in enumerate(zip(sal, cam)):
        write_ppm(out / f"pair_{i:03d}_salient.ppm", s)
        write_ppm(out / f"pair_{i:03d}_camouflaged.ppm", c)
    print(f"wrote {2 * len(sal)} images to {out}")
    return 0


def _infer_label(path: Path) -> str:
    stem = path.stem
    for label in ("salient", "camouflaged"):
        if stem.endswith("_" + label) or stem == label:
            return label
    return ""


def cmd_stats(args) -> int:
    if args.synthetic:
        spec = _spec_from_args(args, SynthSpec())
        sal, cam = synth_pairs(args.synthetic, spec)
        images, ids, labels = [], [], []
        for i in range(args.synthetic):
            images += [sal[i], cam[i]]
            ids += [f"pair_{i:03d}_salient", f"pair_{i:03d}_camouflaged"]
            labels += ["salient", "camouflaged"]
    else:
        if not args.images:
            raise UsageError("give image paths or --synthetic N")
        paths = [Path(p) for p in args.images]
        if args.label and len(args.label) != len(paths):
            raise UsageError(f"{len(args.label)} labels for {len(paths)} images")
        images = [load_image(p) for p in paths]
        ids = [p.stem for p in paths]
        labels = args.label or [_infer_label(p) for p in paths]
    rows = stats_report(images, ids, labels, TRANSFORMS[args.color])
    _emit(to_csv(rows), args.out)
    groups = group_summary(rows)
    if "salient" in groups and "camouflaged" in groups:
        cmp = compare_groups(groups["salient"], groups["camouflaged"])
        lines = ["salient -> camouflaged:"]
        for ch in ("Y", "Cb", "Cr"):
            lines.append(
                f"  {ch:<2} |GAP diff| {cmp['gap_abs_diff'][ch]:.6f}   "
                f"var change {100 * cmp['var_rel_change'][ch]:+.1f}%"
            )
        print("\n".join(lines), file=sys.stderr if not args.out else sys.stdout)
    return 0


def _pad_to_multiple(img: np.ndarray, r: int) -> tuple[np.ndarray, list[int]]:
    h, w = img.shape[-2:]
    ph, pw = (-h) % r, (-w) % r
    if ph == 0 and pw == 0:
        return img, [0, 0]
    mode = "reflect" if min(h, w) > 1 else "edge"
    return np.pad(img, ((0, 0), (0, ph), (0, pw)), mode=mode), [ph, pw]


def format_alpha(alpha: np.ndarray, group_size: int) -> str:
    lines = ["# channel group alpha"]
    for j, a in enumerate(alpha):
        group = GROUP_NAMES[j // group_size] if j // group_size < 3 else "?"
        lines.append(f"{j} {group} {format(float(a), '.10g')}")
    return "\n".join(lines) + "\n"


def cmd_forward(args) -> int:
    block = load_block(args.weights)
    img = load_image(args.image)
    padded, pad = _pad_to_multiple(img, block.config.unshuffle_factor)
    out, alpha = block.forward(padded)
    prefix = Path(args.out)
    records = {"features": out, "alpha": alpha}
    write_container(prefix.with_suffix(".ycda"), block, records, KIND_FEATURES)
    meta = {
        "image": str(args.image),
        "input_size": list(img.shape[-2:]),
        "padded_size": list(padded.shape[-2:]),
        "padding": {"mode": "reflect" if any(pad) else "none", "bottom": pad[0], "right": pad[1]},
    }
    _write_json(prefix.with_suffix(".json"), manifest(block, records, KIND_FEATURES, meta))
    alpha_path = prefix.parent / (prefix.name + "_alpha.txt")
    alpha_path.write_text(format_alpha(alpha, block.config.group_size))
    print(f"features {list(out.shape)} -> {prefix.with_suffix('.ycda')}; alpha -> {alpha_path}")
    return 0


def cmd_gradcheck(args) -> int:
    if not args.eps > 0:
        raise UsageError("--eps must be positive")
    block = _block_from_args(args)
    r = block.config.unshuffle_factor
    if min(args.height, args.width) < 1 or args.height % r or args.width % r:
        raise UsageError(f"--height and --width must be positive multiples of {r}")
    img = gradcheck_input(args.seed, args.height, args.width)
    try:
        report = grad_check(block, img, eps=args.eps, seed=args.seed)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    text = report.format()
    verdict = "PASS" if report.passed(args.threshold) else "FAIL"
    text += f"\n{verdict} (threshold {args.threshold:g})\n"
    _emit(text, args.out)
    if args.out:
        print(text, end="")
    return 0 if verdict == "PASS" else 1


def run_toy_train(
    pairs: int = 256,
    test_pairs: int = 64,
    cfg: TrainConfig = TrainConfig(),
    spec: SynthSpec = TOY_SPEC,
) -> dict:
    """Generate the seeded toy data, train, and summarise as a JSON-able dict."""
    images, labels = toy_dataset(pairs, spec, seed=cfg.seed)
    test_images, test_labels = toy_dataset(test_pairs, spec, seed=cfg.seed + 1_000_003)
    result = train_toy(
        LabeledImages(images, labels), cfg, LabeledImages(test_images, test_labels)
    )
    trace = result.loss_trace
    ga = result.group_alpha
    order = sorted(ga, key=ga.get, reverse=True)
    y_first = ga["Y"] > ga["Cb"] and ga["Y"] > ga["Cr"]
    ordering = " > ".join(f"{g} ({ga[g]:.4f})" for g in order)
    summary = [
        f"loss {trace[0]:.6f} -> {trace[-1]:.6f} after {cfg.steps} steps "
        f"(ratio {trace[-1] / trace[0]:.4f})",
        f"mean alpha on camouflaged test images: {ordering}",
        "luminance group attended above both chroma groups: "
        + ("yes" if y_first else "no; measured ordering is " + " > ".join(order)),
    ]
    return {
        "steps": cfg.steps,
        "step_size": cfg.step_size,
        "momentum": cfg.momentum,
        "seed": cfg.seed,
        "pairs": pairs,
        "test_pairs": test_pairs,
        "loss_trace": trace,
        "initial_loss": trace[0],
        "final_loss": trace[-1],
        "loss_halved": trace[-1] <= 0.5 * trace[0],
        "group_alpha_camouflaged": ga,
        "luminance_first": y_first,
        "summary": summary,
    }


def cmd_train_toy(args) -> int:
    try:
        cfg = TrainConfig(args.step_size, args.momentum, args.steps, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.pairs < 1:
        raise UsageError("--pairs must be >= 1")
    report = run_toy_train(args.pairs, args.test_pairs, cfg)
    if args.out:
        _write_json(args.out, report)
    print("\n".join(report["summary"]))
    return 0


def cmd_cost(args) -> int:
    block = _block_from_args(args)
    baseline = ConvStem(3, args.baseline_channels, args.baseline_kernel, args.baseline_stride)
    ycda, base = cost_report(block, baseline, (args.image_size, args.image_size))
    lines = [f"{'':<28}{'ycda':>14}{base.name:>24}"]
    lines.append(f"{'params':<28}{ycda.params:>14}{base.params:>24}")
    lines.append(
        f"{'MACs / input pixel':<28}{ycda.total_macs_per_pixel:>14.3f}"
        f"{base.total_macs_per_pixel:>24.3f}"
    )
    for stage, v in ycda.macs_per_pixel.items():
        lines.append(f"{'  ' + stage:<28}{v:>14.4f}{'':>24}")
    lines.append(f"{'width handed to next layer':<28}{ycda.output_channels:>14}{base.output_channels:>24}")
    lines.append(
        f"{'next layer MACs / pixel':<28}{ycda.next_layer_macs_per_pixel:>14.1f}"
        f"{base.next_layer_macs_per_pixel:>24.1f}"
    )
    lines.append(f"note: {ycda.notes[0]}")
    print("\n".join(lines))
    if args.out:
        _write_json(args.out, {"ycda": ycda.as_dict(), "baseline": base.as_dict()})
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ycda", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-weights", help="write a freshly initialised weight file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-mlp", action="store_true", help="zero the bottleneck (all gates 0.5)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_init_weights)

    p = sub.add_parser("synth", help="write salient/camouflaged PPM pairs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=1)
    _add_synth_flags(p, SynthSpec())
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="per-image Y/Cb/Cr mean and variance as CSV")
    p.add_argument("images", nargs="*")
    p.add_argument("--label", action="append", help="label per image, in order")
    p.add_argument("--synthetic", type=int, default=0, metavar="N",
                   help="use N in-memory synthetic pairs instead of files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--color", choices=sorted(TRANSFORMS), default="bt601-full")
    _add_synth_flags(p, SynthSpec())
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("forward", help="run the block on an image")
    p.add_argument("image")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--seed", type=int, default=0, help="unused; the weights fix the block")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--threshold", type=float, default=1e-6)
    p.add_argument("--height", type=int, default=8)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--out")
    _add_config_flags(p, activation="identity")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train-toy", help="train on synthetic salient/camouflaged data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--pairs", type=int, default=256)
    p.add_argument("--test-pairs", type=int, default=64)
    p.add_argument("--step-size", type=float, default=TrainConfig.step_size)
    p.add_argument("--momentum", type=float, default=TrainConfig.momentum)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("cost", help="parameter and MAC accounting vs a conv stem")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--baseline-channels", type=int, default=64)
    p.add_argument("--baseline-kernel", type=int, default=3)
    p.add_argument("--baseline-stride", type=int, default=2)
    p.add_argument("--image-size", type=int, default=640)
    _add_config_flags(p)
    p.set_defaults(func=cmd_cost)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ycda {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ImageError, WeightFileError, ConfigError, OSError) as exc:
        print(f"ycda {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
