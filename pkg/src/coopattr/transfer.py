"""Multi-view scoring and the per-iteration transfer/prune selection rules.

Candidates are ranked by the entropy of their combined category posterior:
lowest-entropy unlabeled examples are transferred (most confident), and
highest-entropy labeled examples are pruned (least confident). All ties break
toward the lower example id so runs are reproducible.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .pool import AttributeCategoryMatrix, CategoryPosterior


def _probs(posterior) -> np.ndarray:
    if isinstance(posterior, CategoryPosterior):
        return posterior.probs
    return np.asarray(posterior, dtype=float)


def combined_posterior(p_fc, p_ac) -> CategoryPosterior:
    """Elementwise mean of the feature view and the attribute view."""
    a = _probs(p_fc)
    b = _probs(p_ac)
    if a.shape != b.shape:
        raise ConfigurationError("posteriors have different lengths")
    return CategoryPosterior((a + b) / 2.0)


def entropy(posterior) -> float:
    """Shannon entropy in nats, with 0 * log 0 taken as 0."""
    p = _probs(posterior)
    positive = p > 0.0
    return float(-(p[positive] * np.log(p[positive])).sum())


def select_transfers(
    candidates: Sequence[tuple[int, object]], per_category_count: int
) -> list[tuple[int, int]]:
    """Pick the most confident unlabeled candidates per predicted category.

    ``candidates`` pairs an example id with its combined posterior. Candidates
    are grouped by the posterior argmax; within each group the
    ``per_category_count`` lowest-entropy ids win (fewer if the group is
    smaller). Returns (example_id, predicted_category) pairs.
    """
    if per_category_count < 1:
        raise ConfigurationError("per_category_count must be at least 1")
    groups: dict[int, list[tuple[float, int]]] = {}
    for example_id, posterior in candidates:
        p = _probs(posterior)
        category = int(np.argmax(p))
        groups.setdefault(category, []).append((entropy(p), int(example_id)))
    chosen: list[tuple[int, int]] = []
    for category in sorted(groups):
        ranked = sorted(groups[category])[:per_category_count]
        chosen.extend((example_id, category) for _, example_id in ranked)
    return chosen


def derive_attribute_labels(matrix: AttributeCategoryMatrix, category: int) -> np.ndarray:
    """Binary attribute labels for a transferred example: 1 iff the rate exceeds 0.5.

    The threshold is strict, so a rate of exactly 0.5 yields 0.
    """
    column = matrix.column(category)
    return (column > 0.5).astype(np.int8)


def select_prunes(
    candidates: Sequence[tuple[int, int, object]],
    per_category_count: int,
    protected_ids: Iterable[int] = (),
) -> list[int]:
    """Pick the least confident labeled examples per assigned category.

    ``candidates`` carries (example_id, assigned_category, combined posterior).
    Protected (seed) ids are never selected. Within each category the
    ``per_category_count`` highest-entropy ids are returned.
    """
    if per_category_count < 1:
        raise ConfigurationError("per_category_count must be at least 1")
    protected = frozenset(int(i) for i in protected_ids)
    groups: dict[int, list[tuple[float, int]]] = {}
    for example_id, category, posterior in candidates:
        example_id = int(example_id)
        if example_id in protected:
            continue
        groups.setdefault(int(category), []).append((-entropy(_probs(posterior)), example_id))
    chosen: list[int] = []
    for category in sorted(groups):
        ranked = sorted(groups[category])[:per_category_count]
        chosen.extend(example_id for _, example_id in ranked)
    return chosen
