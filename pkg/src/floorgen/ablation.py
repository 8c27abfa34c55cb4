"""Named ablation variants B1-B11 as configuration transforms."""

from __future__ import annotations

from dataclasses import replace

from .discriminator import DiscriminatorConfig
from .errors import ConfigurationError
from .generator import GeneratorConfig
from .training import TrainConfig

DESCRIPTIONS: dict[str, str] = {
    "B1": "plain Conv-MPN generator and discriminator (no attention, no GMB, no classifier, no gcyc)",
    "B2": "graph-transformer generator, plain discriminator",
    "B3": "plain generator, graph-transformer discriminator with classifier",
    "B4": "full model without the graph cycle-consistency loss",
    "B5": "B4 without non-connected node attention",
    "B6": "B4 without connected node attention",
    "B7": "B4 without the graph modeling block",
    "B8": "B4 with a standard transformer block in place of the Conv-MPN fusion",
    "B9": "B4 with the Conv-MPN variant that drops the node's own feature",
    "B10": "B4 with the Conv-MPN variant without pooled neighbour features",
    "B11": "full model: B4 plus the graph cycle-consistency loss",
}

ABLATIONS = tuple(DESCRIPTIONS)


def _plain_generator(g: GeneratorConfig) -> GeneratorConfig:
    return replace(g, use_cna=False, use_nna=False, use_gmb=False)


def _plain_discriminator(d: DiscriminatorConfig) -> DiscriminatorConfig:
    return replace(d, use_attention=False, use_classifier=False)


def apply_ablation(name: str, gen: GeneratorConfig, disc: DiscriminatorConfig,
                   train: TrainConfig) -> tuple[GeneratorConfig, DiscriminatorConfig, TrainConfig]:
    """Return the ``(generator, discriminator, training)`` configs for variant ``name``.

    The inputs describe the full model (B11). B1-B10 all train without the
    cycle-consistency loss; B5-B10 are single-switch edits of B4.
    """
    key = name.upper()
    if key not in DESCRIPTIONS:
        raise ConfigurationError(f"unknown ablation {name!r}; expected one of {', '.join(ABLATIONS)}")
    if key == "B1":
        gen, disc = _plain_generator(gen), _plain_discriminator(disc)
        train = replace(train, use_gcyc=False, use_classifier=False)
    elif key == "B2":
        disc = _plain_discriminator(disc)
        train = replace(train, use_gcyc=False, use_classifier=False)
    elif key == "B3":
        gen = _plain_generator(gen)
        train = replace(train, use_gcyc=False)
    elif key != "B11":
        train = replace(train, use_gcyc=False)
    if key == "B5":
        gen = replace(gen, use_nna=False)
    elif key == "B6":
        gen = replace(gen, use_cna=False)
    elif key == "B7":
        gen = replace(gen, use_gmb=False)
    elif key == "B8":
        gen = replace(gen, conv_mpn_variant="transformer")
    elif key == "B9":
        gen = replace(gen, conv_mpn_variant="eq3")
    elif key == "B10":
        gen = replace(gen, conv_mpn_variant="eq4")
    disc = replace(disc, use_classifier=train.use_classifier and disc.use_classifier)
    return gen, disc, train
