"""Desk-scale train/evaluate protocol shared by the CLI and the acceptance checks."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from .ablation import apply_ablation
from .data import DatasetSpec, Sample, synthesize_dataset
from .discriminator import DiscriminatorConfig, desk_discriminator_config
from .evaluation import EvalReport, evaluate_layouts
from .generator import Generator, GeneratorConfig, desk_generator_config, generate
from .training import TrainConfig, TrainResult, build_models, train


@dataclass(frozen=True)
class DeskProtocol:
    """64 training diagrams, 32 held-out diagrams from the same subset, 2000 steps."""

    subset: str = "4-6"
    train_count: int = 64
    eval_count: int = 32
    steps: int = 2000
    grid: int = 4
    min_side: int = 8
    eval_seed_offset: int = 1000

    def datasets(self, seed: int) -> tuple[list[Sample], list[Sample]]:
        spec = DatasetSpec(count=self.train_count, subset=self.subset, seed=seed, grid=self.grid,
                           min_side=self.min_side)
        held_out = replace(spec, count=self.eval_count, seed=self.eval_seed_offset + seed)
        return synthesize_dataset(spec), synthesize_dataset(held_out)

    def to_json(self) -> dict:
        return asdict(self)


def desk_configs(seed: int = 0, variant: str = "B11", steps: int = 2000,
                 max_rooms: int = 6) -> tuple[GeneratorConfig, DiscriminatorConfig, TrainConfig]:
    train_cfg = TrainConfig(steps=steps, max_rooms=max_rooms, seed=seed)
    return apply_ablation(variant, desk_generator_config(), desk_discriminator_config(), train_cfg)


def evaluate_generator(generator: Generator, samples: Sequence[Sample], seed: int = 0) -> tuple[EvalReport, list]:
    """Generate one layout per held-out diagram (noise seed ``[seed, 7, i]``) and score it."""
    layouts = [generate(generator, s.diagram, seed=[seed, 7, i]).rooms for i, s in enumerate(samples)]
    return evaluate_layouts([s.diagram for s in samples], layouts), layouts


@dataclass
class ProtocolResult:
    variant: str
    seed: int
    before: EvalReport
    after: EvalReport
    seconds: float
    trained: TrainResult
    layouts_after: list = field(default_factory=list)

    @property
    def improvement(self) -> float:
        """Relative drop in mean compatibility (positive is better)."""
        b = self.before.mean_compatibility
        return (b - self.after.mean_compatibility) / b if b else 0.0

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "compatibility_before": self.before.mean_compatibility,
            "compatibility_after": self.after.mean_compatibility,
            "improvement": self.improvement,
            "diversity_after": self.after.diversity,
            "seconds": self.seconds,
        }


def run_protocol(variant: str = "B11", seed: int = 0, protocol: DeskProtocol = DeskProtocol(),
                 out_dir: Optional[Path] = None, callback: Optional[Callable[[dict], None]] = None,
                 configs: Optional[tuple] = None) -> ProtocolResult:
    """Train one variant from scratch and score the generator before and after."""
    gen_cfg, disc_cfg, train_cfg = configs or desk_configs(seed, variant, protocol.steps)
    train_set, eval_set = protocol.datasets(seed)
    untrained, _, _ = build_models(gen_cfg, disc_cfg, train_cfg)
    before, _ = evaluate_generator(untrained, eval_set, seed)
    start = time.perf_counter()
    trained = train(train_set, train_cfg, gen_cfg, disc_cfg, out_dir=out_dir, callback=callback)
    seconds = time.perf_counter() - start
    after, layouts = evaluate_generator(trained.generator, eval_set, seed)
    result = ProtocolResult(variant, seed, before, after, seconds, trained, layouts)
    if out_dir is not None:
        Path(out_dir, "protocol.json").write_text(json.dumps(
            {**result.summary(), "protocol": protocol.to_json()}, indent=2))
    return result


def majority(flags: Sequence[bool]) -> bool:
    return sum(bool(f) for f in flags) * 2 > len(flags)

