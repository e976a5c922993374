"""Attribute-category matrix estimation and star-graph sum-product inference.

The probabilistic model is a star: one category variable connected to M binary
attribute nodes. Each attribute's unary is the agent's predicted presence
probability; the edge to category i carries that attribute's presence rate in
category i (a matrix entry). With uniform category and attribute priors, the
category marginal is the normalized product over attributes of the two-state
message

    rate(j, i) * p(a_j present | x) + (1 - rate(j, i)) * (1 - p(a_j present | x)).

Messages are accumulated in log space to avoid underflow; the priors are
constant across categories and cancel in the normalization.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ConfigurationError, FeasibilityError
from .pool import AttributeCategoryMatrix, CategoryPosterior, Example

#: Matrix entries are exact fractions in storage; they are clamped into
#: (0, 1) only at inference time so no message factor can be exactly zero.
MATRIX_CLAMP = 1e-6

#: Exact enumeration over 2^M attribute configurations beyond this is refused.
MAX_ENUMERATION_ATTRIBUTES = 20


def estimate_matrix_from_labels(
    categories: np.ndarray,
    attributes: np.ndarray,
    n_categories: int,
    n_attributes: int,
) -> AttributeCategoryMatrix:
    """Per-category attribute presence rates from labeled category/attribute arrays.

    Categories with zero labeled examples get an uninformative 0.5 column so
    inference stays defined if a category temporarily has no data.
    """
    if n_categories <= 0 or n_attributes <= 0:
        raise ConfigurationError("n_categories and n_attributes must be positive")
    categories = np.asarray(categories, dtype=int)
    attributes = np.asarray(attributes, dtype=float)
    if attributes.ndim != 2 or attributes.shape != (categories.shape[0], n_attributes):
        raise ConfigurationError("attributes must be (n_examples, n_attributes)")
    if categories.size and (categories.min() < 0 or categories.max() >= n_categories):
        raise ConfigurationError("category labels out of range")
    if not np.isin(attributes, (0.0, 1.0)).all():
        raise ConfigurationError("attribute labels must be binary")
    counts = np.bincount(categories, minlength=n_categories).astype(float)
    if categories.size:
        onehot = (categories[:, None] == np.arange(n_categories)).astype(float)
        sums = attributes.T @ onehot
    else:
        sums = np.zeros((n_attributes, n_categories))
    values = np.where(counts > 0, sums / np.maximum(counts, 1.0), 0.5)
    return AttributeCategoryMatrix(values)


def estimate_matrix(
    labeled_examples: Sequence[Example], n_categories: int, n_attributes: int
) -> AttributeCategoryMatrix:
    """Presence-rate matrix from labeled examples carrying assigned labels."""
    for ex in labeled_examples:
        if ex.assigned_category is None or ex.assigned_attributes is None:
            raise ConfigurationError(f"example {ex.id} has no assigned labels")
    categories = np.array([ex.assigned_category for ex in labeled_examples], dtype=int)
    if labeled_examples:
        attributes = np.stack([ex.assigned_attributes for ex in labeled_examples])
    else:
        attributes = np.zeros((0, n_attributes), dtype=np.int8)
    return estimate_matrix_from_labels(categories, attributes, n_categories, n_attributes)


def _conditioned(matrix, attr_probs, n_categories):
    values = matrix.values if isinstance(matrix, AttributeCategoryMatrix) else np.asarray(matrix, float)
    if values.ndim != 2:
        raise ConfigurationError("matrix must be 2-D")
    if values.shape[1] != n_categories:
        raise ConfigurationError(
            f"matrix has {values.shape[1]} categories, expected {n_categories}"
        )
    probs = np.asarray(attr_probs, dtype=float)
    if probs.shape[-1] != values.shape[0]:
        raise ConfigurationError(
            f"got {probs.shape[-1]} attribute probabilities for {values.shape[0]} attributes"
        )
    if probs.size and (probs.min() <= 0.0 or probs.max() >= 1.0):
        raise ConfigurationError("attribute probabilities must lie strictly inside (0, 1)")
    return np.clip(values, MATRIX_CLAMP, 1.0 - MATRIX_CLAMP), probs


def crf_posterior_batch(
    matrix: AttributeCategoryMatrix | np.ndarray,
    attr_probs: np.ndarray,
    n_categories: int,
) -> np.ndarray:
    """Category posteriors for a batch of attribute-probability rows.

    Returns an (n_examples, n_categories) array whose rows sum to 1.
    """
    rates, probs = _conditioned(matrix, attr_probs, n_categories)
    if probs.ndim != 2:
        raise ConfigurationError("attr_probs batch must be (n_examples, n_attributes)")
    messages = probs[:, :, None] * rates[None, :, :] + (1.0 - probs)[:, :, None] * (
        1.0 - rates
    )[None, :, :]
    log_scores = np.log(messages).sum(axis=1)
    log_scores -= log_scores.max(axis=1, keepdims=True)
    scores = np.exp(log_scores)
    return scores / scores.sum(axis=1, keepdims=True)


def crf_posterior(
    matrix: AttributeCategoryMatrix | np.ndarray,
    attr_probs: Sequence[float],
    n_categories: int,
) -> CategoryPosterior:
    """Category posterior for one example via the factorized message product."""
    probs = np.asarray(attr_probs, dtype=float)
    if probs.ndim != 1:
        raise ConfigurationError("attr_probs must be a 1-D vector")
    return CategoryPosterior(crf_posterior_batch(matrix, probs[None, :], n_categories)[0])


def brute_force_posterior(
    matrix: AttributeCategoryMatrix | np.ndarray,
    attr_probs: Sequence[float],
    n_categories: int,
) -> CategoryPosterior:
    """Exact category marginal by explicit enumeration of all 2^M attribute states.

    Test oracle for :func:`crf_posterior`; it never uses the factorized message
    product. Refuses M > 20 for feasibility.
    """
    rates, probs = _conditioned(matrix, np.asarray(attr_probs, dtype=float), n_categories)
    if probs.ndim != 1:
        raise ConfigurationError("attr_probs must be a 1-D vector")
    n_attributes = rates.shape[0]
    if n_attributes > MAX_ENUMERATION_ATTRIBUTES:
        raise FeasibilityError(
            f"enumeration over 2^{n_attributes} attribute configurations is infeasible"
        )
    if n_attributes == 0:
        return CategoryPosterior(np.full(n_categories, 1.0 / n_categories))
    configs = (
        (np.arange(2**n_attributes)[:, None] >> np.arange(n_attributes)[None, :]) & 1
    ).astype(float)
    log_rates = np.log(rates)
    log_rates_off = np.log1p(-rates)
    log_probs = np.log(probs)
    log_probs_off = np.log1p(-probs)
    per_config = configs @ log_rates + (1.0 - configs) @ log_rates_off
    per_config += (configs @ log_probs + (1.0 - configs) @ log_probs_off)[:, None]
    top = per_config.max()
    totals = np.exp(per_config - top).sum(axis=0)
    return CategoryPosterior(totals / totals.sum())
