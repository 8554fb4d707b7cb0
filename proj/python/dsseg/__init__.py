"""Python bindings for the dsseg segmentation toolkit."""

from ._core import (
    __version__,
    decay_weight,
    dice_jaccard,
    evaluate,
    evaluate_case,
    generate_dataset,
    global_weight,
    la_ema_weight,
    largest_component_filter,
    mix_images,
    mix_labels,
    select_student,
    verify_suppression,
    zero_centered_mask,
)

__all__ = [
    "decay_weight",
    "dice_jaccard",
    "evaluate",
    "evaluate_case",
    "generate_dataset",
    "global_weight",
    "la_ema_weight",
    "largest_component_filter",
    "mix_images",
    "mix_labels",
    "select_student",
    "verify_suppression",
    "zero_centered_mask",
]
