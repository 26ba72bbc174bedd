"""Desk-scale adversarially trained acoustic model: python surface.

The heavy lifting lives in the C++ core; this package re-exports the bound
operations (corpus generation, losses, schedule, training, evaluation).
"""

from ._core import (
    adv_generator_loss,
    evaluate,
    filter_numerals,
    gen_acoustic_loss,
    generate_corpus,
    hinge_discriminator_loss,
    lr_at,
    pitch_std,
    run_cli,
    total_generator_loss,
    train,
)

__all__ = [
    "adv_generator_loss",
    "evaluate",
    "filter_numerals",
    "gen_acoustic_loss",
    "generate_corpus",
    "hinge_discriminator_loss",
    "lr_at",
    "pitch_std",
    "run_cli",
    "total_generator_loss",
    "train",
]
