"""Command-line interface: ``floorgen <subcommand> [flags]``.

Every run writes ``manifest.json`` into its output directory with the full
argument list, the resolved configuration and the package version, which is
enough to repeat the run bit for bit. Results are also printed to stdout as
tab-separated ``key<TAB>value`` lines.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .ablation import ABLATIONS, DESCRIPTIONS, apply_ablation
from .data import SUBSETS, DatasetSpec, load_dataset, save_dataset, synthesize_dataset
from .discriminator import DiscriminatorConfig, desk_discriminator_config
from .errors import FloorgenError
from .evaluation import evaluate_layouts, rasterize, write_pgm, write_ppm, write_report
from .experiments import DeskProtocol, evaluate_generator, run_protocol
from .generator import GeneratorConfig, desk_generator_config, generate
from .graph import layout_from_json, layout_to_json
from .training import TrainConfig, load_trained, train

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """argparse already exits with status 2 on usage errors; keep that for subparsers too."""

    def error(self, message):  # pragma: no cover - argparse plumbing
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, out_default: str) -> None:
    p.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    p.add_argument("--config", type=Path, help="JSON file with 'generator', 'discriminator', 'train' "
                   "and 'protocol' override sections")
    p.add_argument("--out", type=Path, default=Path(out_default), help=f"output directory (default {out_default})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="floorgen", description="Graph-conditioned house layout generation at desk scale.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth-data", help="write a synthetic diagram/layout dataset")
    _common(p, "runs/data")
    p.add_argument("--subset", choices=sorted(SUBSETS), default="4-6")
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--grid", type=int, default=DeskProtocol.grid)
    p.add_argument("--min-side", type=int, default=DeskProtocol.min_side)

    p = sub.add_parser("train", help="train generator, discriminator and adjacency predictor")
    _common(p, "runs/train")
    p.add_argument("--data", type=Path, help="dataset file (default: synthesize the desk protocol's set)")
    p.add_argument("--subset", choices=sorted(SUBSETS), default="4-6")
    p.add_argument("--variant", choices=ABLATIONS, default="B11", type=str.upper)
    p.add_argument("--steps", type=int, default=DeskProtocol.steps)
    p.add_argument("--checkpoint-every", type=int, default=0)

    p = sub.add_parser("generate", help="generate layouts for the diagrams of a dataset")
    _common(p, "runs/generate")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="dataset whose diagrams are used as input")
    p.add_argument("--limit", type=int, default=8, help="number of diagrams (default 8)")

    p = sub.add_parser("eval", help="score layouts against their input diagrams")
    _common(p, "runs/eval")
    p.add_argument("--data", type=Path, required=True, help="dataset with the input diagrams")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--checkpoint", type=Path, help="generate layouts with this trained model")
    source.add_argument("--layouts", type=Path, help="layouts.json written by 'generate'")
    p.add_argument("--subset", choices=sorted(SUBSETS), help="keep only diagrams whose size is in this subset")

    p = sub.add_parser("gradcheck", help="finite-difference check of every op, both networks and the losses")
    _common(p, "runs/gradcheck")
    p.add_argument("--tolerance", type=float, default=1e-4)

    p = sub.add_parser("ablate", help="train and score one ablation variant under the desk protocol")
    _common(p, "runs/ablate")
    p.add_argument("variant_pos", nargs="?", metavar="VARIANT", type=str.upper, choices=ABLATIONS,
                   help="B1..B11 (same as --variant)")
    p.add_argument("--variant", choices=ABLATIONS, type=str.upper)
    p.add_argument("--subset", choices=sorted(SUBSETS), default="4-6")
    p.add_argument("--steps", type=int, default=DeskProtocol.steps)
    return parser


# ---------------------------------------------------------------- utilities

def _load_overrides(path: Optional[Path]) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text())
    unknown = set(doc) - {"generator", "discriminator", "train", "protocol"}
    if unknown:
        raise FloorgenError(f"unknown config sections: {sorted(unknown)}")
    return doc


def _configs(args, overrides: dict, variant: str = "B11", steps: Optional[int] = None):
    gen = desk_generator_config(**overrides.get("generator", {}))
    disc = desk_discriminator_config(**overrides.get("discriminator", {}))
    train_kw = {"max_rooms": SUBSETS[getattr(args, "subset", None) or "4-6"][1], "seed": args.seed}
    if steps is not None:
        train_kw["steps"] = steps
    tc = TrainConfig.from_json({**train_kw, **overrides.get("train", {})})
    return apply_ablation(variant, gen, disc, tc)


def _protocol(args, overrides: dict) -> DeskProtocol:
    kw = {"subset": getattr(args, "subset", "4-6") or "4-6"}
    if getattr(args, "steps", None) is not None:
        kw["steps"] = args.steps
    return DeskProtocol(**{**kw, **overrides.get("protocol", {})})


def _write_manifest(out: Path, args, argv: Sequence[str], **resolved) -> None:
    out.mkdir(parents=True, exist_ok=True)
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    manifest = {
        "argv": list(argv),
        "flags": flags,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        **resolved,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def _emit(**values) -> None:
    for k, v in values.items():
        print(f"{k}\t{v:.6g}" if isinstance(v, float) else f"{k}\t{v}")


def _save_rasters(out: Path, layouts) -> list[np.ndarray]:
    raster_dir = out / "rasters"
    raster_dir.mkdir(parents=True, exist_ok=True)
    rasters = [rasterize(layout) for layout in layouts]
    for i, img in enumerate(rasters):
        write_ppm(raster_dir / f"layout_{i:04d}.ppm", img)
    return rasters


def _subset_filter(samples, subset: Optional[str]):
    if subset is None:
        return samples
    lo, hi = SUBSETS[subset]
    return [s for s in samples if lo <= len(s.diagram.nodes) <= hi]


# ----------------------------------------------------------------- commands

def cmd_synth_data(args, argv) -> int:
    spec = DatasetSpec(count=args.count, subset=args.subset, seed=args.seed, grid=args.grid,
                       min_side=args.min_side)
    samples = synthesize_dataset(spec)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "dataset.jsonl"
    save_dataset(path, samples)
    _write_manifest(args.out, args, argv, dataset_spec={**spec.__dict__})
    _emit(dataset=path, samples=len(samples))
    return EXIT_OK


def cmd_train(args, argv) -> int:
    from .plotting import plot_loss_curves

    overrides = _load_overrides(args.config)
    gen, disc, tc = _configs(args, overrides, args.variant, args.steps)
    tc = replace(tc, checkpoint_every=args.checkpoint_every)
    if args.data is not None:
        dataset = load_dataset(args.data)
    else:
        dataset, _ = _protocol(args, overrides).datasets(args.seed)
    _write_manifest(args.out, args, argv, generator=gen.to_json(), discriminator=disc.to_json(), train=tc.to_json())
    result = train(dataset, tc, gen, disc, out_dir=args.out)
    figure = plot_loss_curves(result.log, args.out / "loss_curves.png")
    last = result.log[-1] if result.log else {}
    _emit(checkpoint=args.out / "checkpoint.json", metrics=args.out / "metrics.jsonl", figure=figure,
          **{k: float(v) for k, v in last.items() if k != "step"})
    return EXIT_OK


def cmd_generate(args, argv) -> int:
    trained = load_trained(args.checkpoint)
    samples = load_dataset(args.data)[: args.limit]
    _write_manifest(args.out, args, argv, generator=trained.generator.config.to_json())
    mask_dir = args.out / "masks"
    mask_dir.mkdir(parents=True, exist_ok=True)
    layouts, attention = [], []
    for i, s in enumerate(samples):
        r = generate(trained.generator, s.diagram, seed=[args.seed, 7, i], trace=True)
        layouts.append(layout_to_json(r.rooms))
        for k, m in enumerate(r.masks):
            write_pgm(mask_dir / f"sample{i:04d}_room{k:02d}.pgm", m)
        attention.append(_attention_summary(r.trace))
    (args.out / "layouts.json").write_text(json.dumps({"layouts": layouts}, indent=1))
    (args.out / "attention.json").write_text(json.dumps({"samples": attention}))
    _emit(layouts=args.out / "layouts.json", samples=len(layouts))
    return EXIT_OK


def _attention_summary(trace: dict) -> list:
    """Per Conv-MPN level, branch and block: attention received by each key position, ``(N, H, W)``."""
    levels = []
    for level, rec in enumerate(trace.get("attention", [])):
        side = int(trace["volumes"][level][2])
        entry = {"level": level, "size": side}
        for branch, blocks in rec.items():
            entry[branch] = [[m.mean(axis=1).reshape(len(m), side, side).round(6).tolist() for m in maps]
                             for maps in blocks]
        levels.append(entry)
    return levels


def cmd_eval(args, argv) -> int:
    from .plotting import plot_compatibility_histogram, plot_layout_grid

    samples = _subset_filter(load_dataset(args.data), args.subset)
    if args.checkpoint is not None:
        trained = load_trained(args.checkpoint)
        report, layouts = evaluate_generator(trained.generator, samples, args.seed)
        source = str(args.checkpoint)
    else:
        if args.layouts is not None:
            docs = json.loads(Path(args.layouts).read_text())["layouts"]
            layouts = [layout_from_json(d) for d in docs]
            samples = samples[: len(layouts)]
            source = str(args.layouts)
        else:
            layouts = [list(s.rooms) for s in samples]
            source = "ground truth"
        report = evaluate_layouts([s.diagram for s in samples], layouts)
    _write_manifest(args.out, args, argv, layout_source=source)
    write_report(args.out / "report.json", report)
    rasters = _save_rasters(args.out, layouts)
    plot_layout_grid(rasters[:32], args.out / "layouts.png",
                     titles=[f"GED {c}" for c in report.compatibility[:32]])
    plot_compatibility_histogram(report.compatibility, args.out / "compatibility.png")
    _emit(samples=len(layouts), mean_compatibility=report.mean_compatibility,
          median_compatibility=report.median_compatibility, diversity_proxy=report.diversity,
          report=args.out / "report.json")
    return EXIT_OK


def cmd_gradcheck(args, argv) -> int:
    from .gradsuite import run_gradient_suite

    _write_manifest(args.out, args, argv)
    errors = run_gradient_suite(args.seed)
    (args.out / "gradcheck.json").write_text(json.dumps({"tolerance": args.tolerance, "errors": errors}, indent=2))
    failed = [k for k, v in errors.items() if not v <= args.tolerance]
    for k, v in errors.items():
        print(f"{k}\t{v:.3e}\t{'ok' if v <= args.tolerance else 'FAIL'}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_ablate(args, argv) -> int:
    from .plotting import plot_compatibility_histogram, plot_layout_grid, plot_loss_curves

    variant = args.variant or args.variant_pos or "B11"
    overrides = _load_overrides(args.config)
    protocol = _protocol(args, overrides)
    configs = _configs(args, overrides, variant, protocol.steps)
    gen, disc, tc = configs
    _write_manifest(args.out, args, argv, variant=variant, description=DESCRIPTIONS[variant],
                    generator=gen.to_json(), discriminator=disc.to_json(), train=tc.to_json(),
                    protocol=protocol.to_json())
    result = run_protocol(variant, args.seed, protocol, out_dir=args.out, configs=configs)
    plot_loss_curves(result.trained.log, args.out / "loss_curves.png")
    plot_compatibility_histogram(result.after.compatibility, args.out / "compatibility.png",
                                 baseline=result.before.compatibility)
    rasters = _save_rasters(args.out, result.layouts_after)
    plot_layout_grid(rasters, args.out / "layouts.png", titles=[f"GED {c}" for c in result.after.compatibility])
    write_report(args.out / "report.json", result.after)
    _emit(**{k: v for k, v in result.summary().items()})
    return EXIT_OK


COMMANDS = {
    "synth-data": cmd_synth_data,
    "train": cmd_train,
    "generate": cmd_generate,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "ablate": cmd_ablate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, argv)
    except (FloorgenError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"floorgen {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
