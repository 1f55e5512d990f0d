"""Command-line entry point: ``ast-attn <subcommand> ...``.

Subcommands: masks, run, exchange, curve, stats, tune-demo. Outputs go to
``--out`` (default ``$AST_ATTN_OUT`` or ``./ast_attn_out``). Flags given on
the command line override values read from profile files: a profile's layer
and step counts are rescaled to the model built from ``--double``,
``--single`` and ``--steps``.

Exit codes: 0 success, 1 runtime error (``error: <ErrorName>: <detail>`` on
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .analysis import (
    STAT_RANGES,
    extract_regions,
    layer_range_stats,
    region_means,
    scaling_curve,
    token_heatmap,
)
from .core import row_softmax
from .errors import AstAttnError, FormatError
from .masks import Region, assemble, build_sensitivity
from .mini_dit import MiniDitConfig, init_model, run, token_exchange
from .prompt import TokenClass, classify_tokens, load_lexicon, load_prompt_spec
from .schedule import (
    Activation,
    ScheduleProfile,
    builtin_profile,
    format_profile,
    load_profile,
    scale_profile,
)
from .sketch import load_sketch, parse_latent, to_latent
from .tuner import tune_attention

OUT_ENV = "AST_ATTN_OUT"


def _parse_range(text: str) -> tuple[int, int]:
    try:
        if "-" in text:
            lo, hi = (int(v) for v in text.split("-", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; expected N or LO-HI") from None
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _parse_ranges(text: str) -> list[tuple[int, int]]:
    return [_parse_range(part) for part in text.split(",") if part]


def _parse_classes(text: str) -> list[TokenClass]:
    try:
        return [TokenClass.parse(p) for p in text.split(",") if p]
    except FormatError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _parse_regions(text: str) -> list[Region]:
    try:
        return [Region(p.strip().lower()) for p in text.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"regions must be among t2t,t2i,i2t,i2i: {text!r}") from None


def _latent(text: str) -> tuple[int, int]:
    try:
        return parse_latent(text)
    except FormatError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# -- argument groups ---------------------------------------------------------

def _add_out(p):
    p.add_argument("--out", type=Path, default=None,
                   help=f"output directory (default ${OUT_ENV} or ./ast_attn_out)")


def _add_prompt(p, required=True):
    p.add_argument("--prompt", type=Path, required=required, help="prompt spec file")
    p.add_argument("--lexicon", type=Path, help="'<word> <class>' lexicon file")
    p.add_argument("--strict", action="store_true", help="fail on words missing from the lexicon")


def _add_layout(p):
    p.add_argument("--sketch", type=Path, required=True, help="PGM or text instance-id grid")
    p.add_argument("--latent", type=_latent, default=(8, 8), metavar="HxW", help="latent grid (default 8x8)")
    p.add_argument("--threshold", type=float, default=0.5, help="pooling vote share (default 0.5)")
    p.add_argument("--lambda-cross", type=float, default=5.0)
    p.add_argument("--lambda-self", type=float, default=3.5)
    p.add_argument("--gamma-text", type=float, default=4.0)
    p.add_argument("--gamma-image", type=float, default=1.0)
    p.add_argument("--clamp-g", action="store_true", help="clamp sensitivity to [0, 1]")
    p.add_argument("--i2i-background", dest="i2i_background", action="store_true", default=True,
                   help="count the background complement as an I2I region (default)")
    p.add_argument("--no-i2i-background", dest="i2i_background", action="store_false")


def _add_model(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-seed", type=int, default=None, help="latent noise seed (default --seed)")
    p.add_argument("--d-model", type=int, default=16)
    p.add_argument("--double", type=int, default=2, help="double-stream blocks")
    p.add_argument("--single", type=int, default=3, help="single-stream blocks")
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--carry-text", action="store_true",
                   help="carry the text stream across steps instead of re-injecting embeddings")


def _add_tuning(p):
    p.add_argument("--profile", default=None,
                   help="built-in (flux-dev-57, full-layer, empty, toy-N) or profile file; "
                        "default toy-<layers>")
    p.add_argument("--no-tuning", dest="tuning", action="store_false", default=True)
    p.add_argument("--pre-softmax", action="store_true",
                   help="comparison baseline: modulate logits before softmax")
    p.add_argument("--renorm", choices=("row", "region"), default="row")


# -- shared setup ------------------------------------------------------------

def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV, "ast_attn_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _spec(path, args):
    spec = load_prompt_spec(path)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else {}
    return classify_tokens(spec, lexicon, strict=args.strict)


def _layout(args, spec):
    h, w = args.latent
    sketch = to_latent(load_sketch(args.sketch), h, w, args.threshold)
    mask = assemble(spec, sketch, args.lambda_cross, args.lambda_self, args.i2i_background)
    g = build_sensitivity(sketch, args.gamma_text, args.gamma_image, clamp=args.clamp_g)
    return sketch, mask, g


def _config(args, d_c, h, w) -> MiniDitConfig:
    return MiniDitConfig(d_c=d_c, h=h, w=w, d_model=args.d_model, n_double=args.double,
                         n_single=args.single, n_steps=args.steps, seed=args.seed)


def _profile(args, cfg: MiniDitConfig) -> ScheduleProfile:
    name = args.profile or f"toy-{cfg.n_layers}"
    if Path(name).is_file():
        profile = load_profile(name)
    else:
        profile = builtin_profile(name, n_steps=cfg.n_steps) if name.startswith("toy-") else builtin_profile(name)
    if (profile.n_layers, profile.n_steps) != (cfg.n_layers, cfg.n_steps):
        profile = scale_profile(profile, cfg.n_layers, cfg.n_steps)
    return profile


def _write_lines(path: Path, pairs) -> None:
    path.write_text("".join(f"{k} = {v}\n" for k, v in pairs))


# -- subcommands -------------------------------------------------------------

def cmd_masks(args) -> None:
    out = _out_dir(args)
    spec = _spec(args.prompt, args)
    sketch, mask, g = _layout(args, spec)
    io.write_mask_pgm(out / "t2t.pgm", mask.t2t.data)
    io.write_mask_pgm(out / "i2i.pgm", mask.i2i.data)
    io.write_mask_pgm(out / "i2t.pgm", mask.i2t.data)
    ids = np.zeros(sketch.hw, dtype=np.int64)
    for k, m in enumerate(sketch.flat_masks(), 1):
        ids[m] = k
    io.write_pgm(out / "latent_ids.pgm", ids.reshape(sketch.h, sketch.w), maxval=max(1, sketch.n))
    io.write_csv(out / "sensitivity.csv", ["index", "g_text", "g_image"],
                 ((j, float(g.g_text[j]), float(g.g_image[j])) for j in range(sketch.hw)))
    _write_lines(out / "metadata.txt", [
        ("d_c", spec.d_c),
        ("hw", sketch.hw),
        ("latent", f"{sketch.h}x{sketch.w}"),
        ("instances", sketch.n),
        ("sub_prompts", spec.n),
        ("token_classes", ",".join(c.value for c in spec.token_classes)),
        ("lambda_i2t", io.fmt(mask.lambdas[Region.I2T])),
        ("lambda_t2t", io.fmt(mask.lambdas[Region.T2T])),
        ("lambda_i2i", io.fmt(mask.lambdas[Region.I2I])),
        ("i2i_background", str(args.i2i_background).lower()),
        ("clamp_g", str(args.clamp_g).lower()),
        ("t2t_ones", int(mask.t2t.data.sum())),
        ("i2i_ones", int(mask.i2i.data.sum())),
        ("i2t_ones", int(mask.i2t.data.sum())),
        ("g_text_min", io.fmt(g.g_text.min())),
        ("g_image_min", io.fmt(g.g_image.min())),
    ])


def _capture_rows(captures, d_c, regions):
    for rec in captures:
        view = extract_regions(rec.attention, d_c, rec.attention.shape[0] - d_c)
        for region in regions:
            block = view[region]
            for r in range(block.shape[0]):
                for c in range(block.shape[1]):
                    yield rec.layer, rec.step, region.value, r, c, float(block[r, c])


def cmd_run(args) -> None:
    out = _out_dir(args)
    spec = _spec(args.prompt, args)
    sketch, mask, g = _layout(args, spec)
    cfg = _config(args, spec.d_c, sketch.h, sketch.w)
    profile = _profile(args, cfg)
    model = init_model(cfg)
    steps = set(range(args.capture_steps[0], args.capture_steps[1] + 1)) if args.capture_steps else None
    result = run(model, spec, mask, g, profile, tuning_on=args.tuning,
                 capture=lambda layer, step: steps is None or step in steps,
                 renorm=args.renorm, presoftmax=args.pre_softmax, carry_text=args.carry_text,
                 noise_seed=args.noise_seed)
    io.write_csv(out / "captures.csv", ["layer", "step", "region", "row", "col", "value"],
                 _capture_rows(result.captures, spec.d_c, args.regions))
    heat_dir = out / "heatmaps"
    heat_dir.mkdir(exist_ok=True)
    means = {}
    if result.captures:
        mean_map = np.mean([c.attention for c in result.captures], axis=0)
        view = extract_regions(mean_map, spec.d_c, sketch.hw)
        means = region_means(view)
        for j, cls in enumerate(spec.token_classes):
            if cls is not TokenClass.FILLER:
                io.write_heatmap(heat_dir / f"token_{j:03d}_{cls.value}.pgm",
                                 token_heatmap(view, j, sketch.h, sketch.w))
    worst = max((float(np.abs(c.attention.sum(axis=1) - 1).max()) for c in result.captures), default=0.0)
    (out / "profile.txt").write_text(format_profile(profile))
    _write_lines(out / "summary.txt", [
        ("layers", cfg.n_layers),
        ("steps", cfg.n_steps),
        ("tuning", str(args.tuning).lower()),
        ("mode", "pre-softmax" if args.pre_softmax else "post-softmax"),
        ("captures", len(result.captures)),
        ("tuned_captures", sum(c.tuned for c in result.captures)),
        ("max_row_sum_error", io.fmt(worst)),
        ("final_checksum", result.final.checksum()),
        ("final_latent_norm", io.fmt(np.linalg.norm(result.final.image))),
        *((f"mean_{r.value}", io.fmt(v)) for r, v in means.items()),
    ])


def cmd_stats(args) -> None:
    out = _out_dir(args)
    spec = _spec(args.prompt, args)
    sketch, mask, g = _layout(args, spec)
    cfg = _config(args, spec.d_c, sketch.h, sketch.w)
    profile = _profile(args, cfg)
    result = run(init_model(cfg), spec, mask, g, profile, tuning_on=args.tuning, capture=True,
                 renorm=args.renorm, presoftmax=args.pre_softmax, carry_text=args.carry_text,
                 noise_seed=args.noise_seed)
    steps = range(args.stat_steps[0], args.stat_steps[1] + 1) if args.stat_steps else None
    stats = layer_range_stats(result.captures, args.ranges, spec, steps=steps)
    io.write_csv(out / "stats.csv", ["range", "class", "mean", "max"],
                 ((s.label, s.token_class.value, s.mean, s.max) for s in stats))


def cmd_exchange(args) -> None:
    out = _out_dir(args)
    spec_a = _spec(args.prompt_a, args)
    spec_b = _spec(args.prompt_b, args)
    h, w = args.latent
    cfg = _config(args, spec_a.d_c, h, w)
    model = init_model(cfg)
    layers = range(args.layers[0], args.layers[1] + 1)
    steps = range(args.exchange_steps[0], args.exchange_steps[1] + 1)
    swapped = token_exchange(model, spec_a, spec_b, args.classes, layers, steps,
                             carry_text=args.carry_text, noise_seed=args.noise_seed)
    independent = token_exchange(model, spec_a, spec_b, [], layers, steps,
                                 carry_text=args.carry_text, noise_seed=args.noise_seed)
    for name, res in (("a", swapped.a), ("b", swapped.b)):
        lat = res.final.image
        io.write_csv(out / f"final_latent_{name}.csv", ["row", "col", "value"],
                     ((r, c, float(lat[r, c])) for r in range(lat.shape[0]) for c in range(lat.shape[1])))
    diff_a = np.linalg.norm(swapped.a.final.image - independent.a.final.image, axis=1)
    diff_b = np.linalg.norm(swapped.b.final.image - independent.b.final.image, axis=1)
    io.write_heatmap(out / "shift_a.pgm", diff_a.reshape(h, w))
    io.write_heatmap(out / "shift_b.pgm", diff_b.reshape(h, w))
    _write_lines(out / "summary.txt", [
        ("classes", ",".join(c.value for c in args.classes)),
        ("layers", f"{args.layers[0]}-{args.layers[1]}"),
        ("steps", f"{args.exchange_steps[0]}-{args.exchange_steps[1]}"),
        ("swapped_rows", ",".join(str(i) for i, c in enumerate(spec_a.token_classes) if c in set(args.classes))),
        ("checksum_a", swapped.a.final.checksum()),
        ("checksum_b", swapped.b.final.checksum()),
        ("shift_a_mean", io.fmt(diff_a.mean())),
        ("shift_b_mean", io.fmt(diff_b.mean())),
    ])


def cmd_curve(args) -> None:
    rows = scaling_curve(args.lam, args.T, args.step, args.m, args.samples)
    text = "a,value\n" + "".join(f"{io.fmt(a)},{io.fmt(v)}\n" for a, v in rows)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)


def cmd_tune_demo(args) -> None:
    out = _out_dir(args)
    spec = _spec(args.prompt, args)
    sketch, mask, g = _layout(args, spec)
    n = mask.size
    rng = np.random.default_rng(args.seed)
    attn = row_softmax(rng.normal(0.0, args.logit_scale, (n, n)))
    act = Activation(frozenset({Region.T2T, Region.I2I}),
                     frozenset({TokenClass.ATTRIBUTE, TokenClass.INSTANCE, TokenClass.BACKGROUND}))
    tuned = tune_attention(attn, mask, g, act, args.steps, args.step, renorm=args.renorm)
    before = extract_regions(attn, spec.d_c, sketch.hw)
    after = extract_regions(tuned, spec.d_c, sketch.hw)
    io.write_heatmap(out / "attention_before.pgm", attn)
    io.write_heatmap(out / "attention_after.pgm", tuned)
    for j, cls in enumerate(spec.token_classes):
        if cls is TokenClass.FILLER:
            continue
        io.write_heatmap(out / f"token_{j:03d}_before.pgm", token_heatmap(before, j, sketch.h, sketch.w))
        io.write_heatmap(out / f"token_{j:03d}_after.pgm", token_heatmap(after, j, sketch.h, sketch.w))
    io.write_csv(out / "tuned.csv", ["row", "col", "before", "after"],
                 ((r, c, float(attn[r, c]), float(tuned[r, c])) for r in range(n) for c in range(n)))
    _write_lines(out / "summary.txt", [
        ("size", n),
        ("step", args.step),
        ("steps", args.steps),
        ("max_row_sum_error", io.fmt(np.abs(tuned.sum(axis=1) - 1).max())),
        ("i2t_mask_mass_before", io.fmt((before.i2t * mask.i2t.data).sum())),
        ("i2t_mask_mass_after", io.fmt((after.i2t * mask.i2t.data).sum())),
    ])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ast-attn",
        description="Attention specialty tuning on a toy unified-attention transformer.",
        epilog="Command-line flags override values from profile files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("masks", help="build region masks and the sensitivity vector")
    _add_prompt(p)
    _add_layout(p)
    _add_out(p)
    p.set_defaults(func=cmd_masks)

    p = sub.add_parser("run", help="run the toy model and capture attention maps")
    _add_prompt(p)
    _add_layout(p)
    _add_model(p)
    _add_tuning(p)
    p.add_argument("--capture-steps", type=_parse_range, default=None, metavar="LO-HI",
                   help="steps to capture (default all)")
    p.add_argument("--regions", type=_parse_regions, default=list(Region),
                   help="regions written to captures.csv (default t2t,t2i,i2t,i2i)")
    _add_out(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("stats", help="layer-range I2T statistics per token class")
    _add_prompt(p)
    _add_layout(p)
    _add_model(p)
    _add_tuning(p)
    p.add_argument("--ranges", type=_parse_ranges,
                   default=[tuple(r) for r in STAT_RANGES], help="e.g. 6-10,20-24,50-54")
    p.add_argument("--stat-steps", type=_parse_range, default=None, metavar="LO-HI")
    _add_out(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("exchange", help="swap class-specific text rows between two prompts")
    p.add_argument("--prompt-a", type=Path, required=True)
    p.add_argument("--prompt-b", type=Path, required=True)
    p.add_argument("--lexicon", type=Path)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--latent", type=_latent, default=(8, 8), metavar="HxW")
    _add_model(p)
    p.add_argument("--classes", type=_parse_classes, required=True, help="e.g. instance,attribute")
    p.add_argument("--layers", type=_parse_range, required=True, metavar="LO-HI", help="1-indexed")
    p.add_argument("--exchange-steps", type=_parse_range, required=True, metavar="LO-HI",
                   help="0-indexed")
    _add_out(p)
    p.set_defaults(func=cmd_exchange)

    p = sub.add_parser("curve", help="emit the a*exp(beta*(m-a)) scaling curve as CSV")
    p.add_argument("--lambda", dest="lam", type=float, default=4.0)
    p.add_argument("--T", type=int, default=32)
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--m", type=int, choices=(0, 1), required=True)
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--out", type=Path, default=None, help="CSV file (default stdout)")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("tune-demo", help="tune one random map with every region live")
    _add_prompt(p)
    _add_layout(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--logit-scale", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=32)
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--renorm", choices=("row", "region"), default="row")
    _add_out(p)
    p.set_defaults(func=cmd_tune_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except AstAttnError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
