# Copyright (c) 2026, The DRPO Toolkit Authors
# SPDX-License-Identifier: Apache-2.0
"""Domain-aware relative policy optimization.

Thin Python layer over the C++ core. Rollouts are plain dicts with the same
field names as the rollout JSONL format.
"""

from drpo._core import (
    DrpoRuntimeError,
    ValidationError,
    best_iou,
    clipped_term,
    combine,
    compute_advantages,
    elbow_k,
    evaluate_dataset,
    format_reward,
    kl_damping,
    kmeans,
    normalize_config,
    score,
    select_k_elbow,
    set_f1,
    simulate,
    temperature,
    train,
)

ESTIMATORS = (
    "grpo",
    "drpo",
    "drpo-domain-only",
    "drpo-nokl",
    "rloo",
    "reinforce-pp",
    "remax",
    "reinforce",
)

__all__ = [
    "ESTIMATORS",
    "DrpoRuntimeError",
    "ValidationError",
    "best_iou",
    "clipped_term",
    "combine",
    "compute_advantages",
    "elbow_k",
    "evaluate_dataset",
    "format_reward",
    "kl_damping",
    "kmeans",
    "normalize_config",
    "score",
    "select_k_elbow",
    "set_f1",
    "simulate",
    "temperature",
    "train",
]
