"""Calibrated binary linear classifiers and the per-agent model banks.

The same classifier is used for the N one-vs-rest category models and the M
attribute models. Training minimizes L2-regularized logistic loss with
deterministic full-batch gradient descent (zero initialization), so identical
inputs and config always produce bit-identical weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, StateError, TrainingError
from .pool import CategoryPosterior, Example

#: Probabilities are clamped into [PROB_CLAMP, 1 - PROB_CLAMP] so no factor in
#: downstream products can reach exactly 0 or 1.
PROB_CLAMP = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    l2: float = 1e-3
    learning_rate: float = 0.5
    max_iters: int = 500
    tol: float = 1e-6


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sigmoid_scalar(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _clamp(p):
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def _fit(features: np.ndarray, targets: np.ndarray, config: TrainConfig):
    """Gradient descent on the mean logistic loss, one target column per classifier.

    Columns are independent, so fitting k classifiers that share the same
    feature matrix in one call is equivalent to fitting them one by one.
    """
    n, dim = features.shape
    k = targets.shape[1]
    weights = np.zeros((dim, k))
    bias = np.zeros(k)
    for _ in range(config.max_iters):
        probs = _sigmoid(features @ weights + bias)
        residual = (probs - targets) / n
        grad_w = features.T @ residual + config.l2 * weights
        grad_b = residual.sum(axis=0)
        if max(np.abs(grad_w).max(), np.abs(grad_b).max()) < config.tol:
            break
        weights -= config.learning_rate * grad_w
        bias -= config.learning_rate * grad_b
    return weights, bias


def _feature_matrix(vectors, label: str) -> np.ndarray:
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ConfigurationError(f"{label} must be a non-empty list of equal-length vectors")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{label} contain non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class LinearClassifier:
    """A linear score with a sigmoid link, clamped away from 0 and 1."""

    weights: np.ndarray
    bias: float
    trained_on_count: int = 0

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).copy()
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", float(self.bias))

    def predict_prob(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != self.weights.shape:
            raise ConfigurationError(
                f"feature vector has length {x.shape}, classifier expects {self.weights.shape}"
            )
        score = float(self.weights @ x) + self.bias
        return float(_clamp(_sigmoid_scalar(score)))


def train_binary(
    positives: Sequence, negatives: Sequence, config: TrainConfig | None = None
) -> LinearClassifier:
    """Fit one binary classifier from explicit positive and negative feature vectors."""
    if len(positives) == 0 or len(negatives) == 0:
        raise TrainingError("training requires at least one positive and one negative example")
    config = config or TrainConfig()
    pos = _feature_matrix(positives, "positive features")
    neg = _feature_matrix(negatives, "negative features")
    if pos.shape[1] != neg.shape[1]:
        raise ConfigurationError("positive and negative feature dimensions differ")
    features = np.vstack([pos, neg])
    targets = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])[:, None]
    weights, bias = _fit(features, targets, config)
    return LinearClassifier(weights[:, 0], float(bias[0]), trained_on_count=len(features))


def _constant_classifier(dim: int, rate: float, count: int) -> LinearClassifier:
    p = float(_clamp(rate))
    return LinearClassifier(np.zeros(dim), math.log(p / (1.0 - p)), trained_on_count=count)


def _stacked(classifiers):
    weights = np.stack([c.weights for c in classifiers], axis=1)
    bias = np.array([c.bias for c in classifiers])
    return weights, bias


@dataclass(frozen=True)
class CategoryModelBank:
    """One one-vs-rest classifier per category; outputs a normalized posterior."""

    classifiers: tuple[LinearClassifier, ...]

    def posterior_batch(self, features: np.ndarray) -> np.ndarray:
        if not self.classifiers:
            raise StateError("category bank has not been trained")
        weights, bias = _stacked(self.classifiers)
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[1] != weights.shape[0]:
            raise ConfigurationError("feature matrix does not match classifier dimension")
        raw = _clamp(_sigmoid(features @ weights + bias))
        return raw / raw.sum(axis=1, keepdims=True)

    def posterior(self, x) -> CategoryPosterior:
        return CategoryPosterior(self.posterior_batch(np.asarray(x, float)[None, :])[0])


@dataclass(frozen=True)
class AttributeModelBank:
    """One independent presence classifier per attribute; no cross-attribute normalization."""

    classifiers: tuple[LinearClassifier, ...]

    def probs_batch(self, features: np.ndarray) -> np.ndarray:
        if not self.classifiers:
            raise StateError("attribute bank has not been trained")
        weights, bias = _stacked(self.classifiers)
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[1] != weights.shape[0]:
            raise ConfigurationError("feature matrix does not match classifier dimension")
        return _clamp(_sigmoid(features @ weights + bias))

    def probs(self, x) -> np.ndarray:
        return self.probs_batch(np.asarray(x, float)[None, :])[0]


def train_category_bank(
    features: np.ndarray,
    categories: np.ndarray,
    n_categories: int,
    config: TrainConfig | None = None,
) -> CategoryModelBank:
    """Train the N one-vs-rest category classifiers in one vectorized pass.

    Each category's negatives are all labeled examples of the other categories.
    """
    if n_categories < 2:
        raise ConfigurationError("need at least two categories for one-vs-rest training")
    config = config or TrainConfig()
    features = _feature_matrix(features, "features")
    categories = np.asarray(categories, dtype=int)
    if categories.shape != (features.shape[0],):
        raise ConfigurationError("one category label per feature row required")
    present = np.bincount(categories, minlength=n_categories)
    if categories.min() < 0 or categories.max() >= n_categories:
        raise ConfigurationError("category labels out of range")
    if (present == 0).any():
        empty = int(np.flatnonzero(present == 0)[0])
        raise TrainingError(f"category {empty} has no labeled examples")
    if (present == features.shape[0]).any():
        raise TrainingError("one-vs-rest training needs negatives for every category")
    targets = (categories[:, None] == np.arange(n_categories)).astype(float)
    weights, bias = _fit(features, targets, config)
    n = features.shape[0]
    return CategoryModelBank(
        tuple(
            LinearClassifier(weights[:, i], float(bias[i]), trained_on_count=n)
            for i in range(n_categories)
        )
    )


def train_attribute_bank(
    features: np.ndarray,
    attributes: np.ndarray,
    config: TrainConfig | None = None,
    constant_fallback: bool = True,
) -> AttributeModelBank:
    """Train the M attribute presence classifiers in one vectorized pass.

    An attribute whose labels are single-class in the pool cannot be fit; with
    ``constant_fallback`` it becomes a bias-only classifier at the clamped
    empirical rate instead of aborting the run.
    """
    config = config or TrainConfig()
    features = _feature_matrix(features, "features")
    attributes = np.asarray(attributes)
    if attributes.ndim != 2 or attributes.shape[0] != features.shape[0]:
        raise ConfigurationError("one attribute row per feature row required")
    if not np.isin(attributes, (0, 1)).all():
        raise ConfigurationError("attribute labels must be binary")
    targets = attributes.astype(float)
    n, n_attributes = targets.shape
    rates = targets.mean(axis=0)
    mixed = np.flatnonzero((rates > 0.0) & (rates < 1.0))
    if mixed.size < n_attributes and not constant_fallback:
        degenerate = int(np.flatnonzero((rates == 0.0) | (rates == 1.0))[0])
        raise TrainingError(f"attribute {degenerate} has single-class labels")
    classifiers: list[LinearClassifier | None] = [None] * n_attributes
    if mixed.size:
        weights, bias = _fit(features, targets[:, mixed], config)
        for col, j in enumerate(mixed):
            classifiers[j] = LinearClassifier(
                weights[:, col], float(bias[col]), trained_on_count=n
            )
    for j in range(n_attributes):
        if classifiers[j] is None:
            classifiers[j] = _constant_classifier(features.shape[1], float(rates[j]), n)
    return AttributeModelBank(tuple(classifiers))


def category_posterior(bank: CategoryModelBank, x) -> CategoryPosterior:
    """Normalized category distribution from the bank's per-class sigmoid scores."""
    return bank.posterior(x)


def attribute_probs(bank: AttributeModelBank, x) -> np.ndarray:
    """Independent presence probabilities for all M attributes."""
    return bank.probs(x)


def attribute_accuracy_arrays(
    bank: AttributeModelBank, features: np.ndarray, attributes: np.ndarray
) -> np.ndarray:
    """Per-attribute accuracy of thresholded predictions (present iff prob > 0.5)."""
    probs = bank.probs_batch(features)
    truth = np.asarray(attributes).astype(bool)
    if truth.shape != probs.shape:
        raise ConfigurationError("attribute truth shape does not match predictions")
    return ((probs > 0.5) == truth).mean(axis=0)


def attribute_bank_accuracy(bank: AttributeModelBank, examples: Sequence[Example]) -> np.ndarray:
    """Per-attribute accuracy of the bank on examples with known true attributes."""
    if len(examples) == 0:
        raise ConfigurationError("cannot measure accuracy on an empty example set")
    if any(ex.true_attributes is None for ex in examples):
        raise ConfigurationError("every example needs true_attributes")
    features = np.stack([ex.features for ex in examples])
    truth = np.stack([ex.true_attributes for ex in examples])
    return attribute_accuracy_arrays(bank, features, truth)
