"""Synthetic data generation: the two-domain bootstrap world and the noise study.

The world replaces real image datasets with a generative model whose
attribute-category table is known exactly, so estimation can be checked against
truth. Both agents share the semantics (the same ground-truth table) while
their feature spaces are incompatible: each agent observes a different fixed
random linear embedding of the attribute vector plus Gaussian sensor noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .pool import DISTRACTOR, Example, PoolState, new_pool_state

#: Noisy attribute predictions are clamped into (0, 1).
PREDICTION_CLAMP = 1e-6

# Deterministic sub-stream tags appended to the seed; generation of one block
# never perturbs another.
_STREAM_EMBEDDING = 11
_STREAM_CATEGORY_BITS = 12
_STREAM_FLIPS = 13
_STREAM_DISTRACTORS = 14
_STREAM_FEATURE_NOISE = 15
_STREAM_STUDY_MATRIX = 20
_STREAM_STUDY_NOISE = 21
_STREAM_STUDY_LABELED = 22
_STREAM_STUDY_TEST = 23
_STREAM_CALIBRATION = 24


@dataclass(frozen=True)
class SplitSizes:
    """Per-category example counts for one agent's three splits."""

    labeled: int = 5
    unlabeled: int = 30
    test: int = 20


@dataclass(frozen=True, eq=False)
class SyntheticWorldConfig:
    n_categories: int
    n_attributes: int
    ground_truth_matrix: np.ndarray
    examples_per_category: SplitSizes = SplitSizes()
    n_distractors: int = 500
    feature_dims: tuple[int, int] = (16, 12)
    feature_noise_stds: tuple[float, float] = (0.45, 0.45)
    attribute_flip_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        matrix = np.asarray(self.ground_truth_matrix, dtype=float)
        if matrix.shape != (self.n_attributes, self.n_categories):
            raise ConfigurationError(
                "ground_truth_matrix must be (n_attributes, n_categories)"
            )
        if not np.all(np.isfinite(matrix)) or matrix.min() < 0.0 or matrix.max() > 1.0:
            raise ConfigurationError("ground_truth_matrix entries must lie in [0, 1]")
        matrix = matrix.copy()
        matrix.setflags(write=False)
        object.__setattr__(self, "ground_truth_matrix", matrix)
        sizes = self.examples_per_category
        if self.n_categories < 2 or self.n_attributes < 1:
            raise ConfigurationError("need at least 2 categories and 1 attribute")
        if min(sizes.labeled, sizes.unlabeled, sizes.test) < 1:
            raise ConfigurationError("every split needs at least one example per category")
        if self.n_distractors < 0:
            raise ConfigurationError("n_distractors must be non-negative")
        if not 0.0 <= self.attribute_flip_rate < 1.0:
            raise ConfigurationError("attribute_flip_rate must be in [0, 1)")
        if min(self.feature_dims) < 1:
            raise ConfigurationError("feature dimensions must be positive")
        if min(self.feature_noise_stds) < 0.0:
            raise ConfigurationError("feature noise must be non-negative")


@dataclass(frozen=True)
class AgentDomain:
    """One agent's slice of the world: its examples and initial pool."""

    agent_id: int
    feature_dim: int
    examples: dict[int, Example]
    pool: PoolState

    def __post_init__(self):
        for ex in self.examples.values():
            if ex.features.size != self.feature_dim:
                raise ConfigurationError(
                    f"example {ex.id} has {ex.features.size} features, expected {self.feature_dim}"
                )


@dataclass(frozen=True)
class SyntheticWorld:
    config: SyntheticWorldConfig
    domains: tuple[AgentDomain, AgentDomain]
    #: Test examples generated from the same attribute draw in both domains,
    #: aligned (agent-0 id, agent-1 id). Only the cross-agent ensemble baseline
    #: relies on this pairing.
    paired_test_ids: tuple[tuple[int, int], ...]


def random_ground_truth_matrix(
    n_attributes: int, n_categories: int, rng: np.random.Generator,
    low: float = 0.05, high: float = 0.95,
) -> np.ndarray:
    """Independent uniform presence rates; the default world table."""
    return rng.uniform(low, high, size=(n_attributes, n_categories))


def contrast_ground_truth_matrix(
    n_attributes: int, n_categories: int, rng: np.random.Generator,
    low: float = 0.1, high: float = 0.9, min_hamming: int = 2,
) -> np.ndarray:
    """Two-level presence rates with well-separated per-category profiles.

    Profiles are redrawn until every pair differs in at least ``min_hamming``
    attributes, so no two categories are near-indistinguishable by attributes.
    """
    if n_categories > 2**n_attributes:
        raise ConfigurationError("more categories than distinct binary profiles")
    for _ in range(10_000):
        pattern = rng.random((n_attributes, n_categories)) < 0.5
        distances = (pattern[:, :, None] != pattern[:, None, :]).sum(axis=0)
        distances[np.diag_indices(n_categories)] = n_attributes + 1
        if distances.min() >= min_hamming:
            return np.where(pattern, high, low)
    raise ConfigurationError("could not draw separated category profiles")


def _flip_bits(bits: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    flips = rng.random(bits.shape) < rate
    return np.logical_xor(bits, flips).astype(np.int8)


def generate_world(config: SyntheticWorldConfig) -> SyntheticWorld:
    """Sample both agents' domains deterministically from the config seed.

    Per category, each example's attribute bits are independent coin flips at
    the ground-truth rates, then corrupted at the flip rate. Features are the
    agent's embedding of the centered bits plus Gaussian noise. Distractors
    draw attributes uniformly at random and carry the DISTRACTOR sentinel.
    Test examples reuse one attribute draw in both domains so they are paired.
    """
    cfg = config
    n_cat, n_attr = cfg.n_categories, cfg.n_attributes
    sizes = cfg.examples_per_category
    seed = cfg.rng_seed
    truth = cfg.ground_truth_matrix

    embeddings = []
    for agent in (0, 1):
        rng = np.random.default_rng([seed, _STREAM_EMBEDDING, agent])
        embeddings.append(
            rng.standard_normal((cfg.feature_dims[agent], n_attr)) / math.sqrt(n_attr)
        )

    # Per-category attribute draws, fixed block order: labeled for agent 0 and
    # 1, unlabeled for agent 0 and 1, then the shared test block.
    block_counts = (sizes.labeled, sizes.labeled, sizes.unlabeled, sizes.unlabeled, sizes.test)
    labeled_bits = ([], [])
    unlabeled_bits = ([], [])
    test_bits = []
    for category in range(n_cat):
        rng = np.random.default_rng([seed, _STREAM_CATEGORY_BITS, category])
        flip_rng = np.random.default_rng([seed, _STREAM_FLIPS, category])
        blocks = []
        for count in block_counts:
            bits = (rng.random((count, n_attr)) < truth[:, category]).astype(np.int8)
            blocks.append(_flip_bits(bits, cfg.attribute_flip_rate, flip_rng))
        labeled_bits[0].append(blocks[0])
        labeled_bits[1].append(blocks[1])
        unlabeled_bits[0].append(blocks[2])
        unlabeled_bits[1].append(blocks[3])
        test_bits.append(blocks[4])

    distractor_counts = ((cfg.n_distractors + 1) // 2, cfg.n_distractors // 2)
    distractor_bits = []
    for agent in (0, 1):
        rng = np.random.default_rng([seed, _STREAM_DISTRACTORS, agent])
        distractor_bits.append(
            (rng.random((distractor_counts[agent], n_attr)) < 0.5).astype(np.int8)
        )

    domains = []
    test_orders: list[list[int]] = []
    next_id = 0
    for agent in (0, 1):
        categories: list[int] = []
        bits_blocks: list[np.ndarray] = []
        splits: list[str] = []
        for category in range(n_cat):
            bits_blocks.append(labeled_bits[agent][category])
            categories.extend([category] * sizes.labeled)
            splits.extend(["labeled"] * sizes.labeled)
        for category in range(n_cat):
            bits_blocks.append(unlabeled_bits[agent][category])
            categories.extend([category] * sizes.unlabeled)
            splits.extend(["unlabeled"] * sizes.unlabeled)
        bits_blocks.append(distractor_bits[agent])
        categories.extend([DISTRACTOR] * distractor_counts[agent])
        splits.extend(["unlabeled"] * distractor_counts[agent])
        for category in range(n_cat):
            bits_blocks.append(test_bits[category])
            categories.extend([category] * sizes.test)
            splits.extend(["test"] * sizes.test)

        bits = np.concatenate(bits_blocks, axis=0)
        noise_rng = np.random.default_rng([seed, _STREAM_FEATURE_NOISE, agent])
        noise = noise_rng.standard_normal((bits.shape[0], cfg.feature_dims[agent]))
        features = (bits - 0.5) @ embeddings[agent].T + cfg.feature_noise_stds[agent] * noise

        examples: dict[int, Example] = {}
        labeled_ids, unlabeled_ids, test_ids = [], [], []
        assignments = {}
        test_order = []
        for row, (category, split) in enumerate(zip(categories, splits)):
            ex_id = next_id + row
            assigned_cat = category if split == "labeled" else None
            assigned_bits = bits[row] if split == "labeled" else None
            examples[ex_id] = Example(
                id=ex_id,
                features=features[row],
                true_category=category,
                true_attributes=bits[row],
                assigned_category=assigned_cat,
                assigned_attributes=assigned_bits,
            )
            if split == "labeled":
                labeled_ids.append(ex_id)
                assignments[ex_id] = (category, tuple(int(b) for b in bits[row]))
            elif split == "unlabeled":
                unlabeled_ids.append(ex_id)
            else:
                test_ids.append(ex_id)
                test_order.append(ex_id)
        next_id += len(categories)
        pool = new_pool_state(labeled_ids, unlabeled_ids, test_ids, assignments)
        domains.append(
            AgentDomain(agent_id=agent, feature_dim=cfg.feature_dims[agent],
                        examples=examples, pool=pool)
        )
        test_orders.append(test_order)

    paired = tuple(zip(test_orders[0], test_orders[1]))
    return SyntheticWorld(config=cfg, domains=(domains[0], domains[1]), paired_test_ids=paired)


def write_world_text(world: SyntheticWorld, path) -> None:
    """One example per line: agent, id, split, category, attribute bits, features."""
    lines = ["# agent id split category attributes features..."]
    for domain in world.domains:
        split_of = {}
        for ex_id in domain.pool.labeled:
            split_of[ex_id] = "labeled"
        for ex_id in domain.pool.unlabeled:
            split_of[ex_id] = "unlabeled"
        for ex_id in domain.pool.test:
            split_of[ex_id] = "test"
        for ex_id in sorted(domain.examples):
            ex = domain.examples[ex_id]
            bits = "".join(str(int(b)) for b in ex.true_attributes)
            feats = " ".join(repr(float(v)) for v in ex.features)
            lines.append(f"{domain.agent_id} {ex.id} {split_of[ex_id]} {ex.true_category} {bits} {feats}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_world_text(path) -> list[tuple[int, int, str, int, np.ndarray, np.ndarray]]:
    """Parse rows written by :func:`write_world_text`."""
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        agent, ex_id, split, category, bits, *feats = line.split()
        rows.append(
            (
                int(agent),
                int(ex_id),
                split,
                int(category),
                np.array([int(b) for b in bits], dtype=np.int8),
                np.array([float(v) for v in feats]),
            )
        )
    return rows


@dataclass(frozen=True, eq=False)
class NoiseStudyConfig:
    """Controlled attribute-noise experiment: half the attributes are reliable
    per agent ("good"), the other half noisy ("bad"), swapped between agents."""

    n_categories: int = 10
    n_attributes: int = 10
    ground_truth_matrix: np.ndarray | None = None
    good_noise_std: float = 0.5
    bad_noise_std: float = 2.5
    agent0_good_attributes: tuple[int, ...] | None = None
    labeled_count: int = 50
    test_count: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        if self.ground_truth_matrix is not None:
            matrix = np.asarray(self.ground_truth_matrix, dtype=float)
            if matrix.shape != (self.n_attributes, self.n_categories):
                raise ConfigurationError("ground_truth_matrix has the wrong shape")
            matrix = matrix.copy()
            matrix.setflags(write=False)
            object.__setattr__(self, "ground_truth_matrix", matrix)
        if self.good_noise_std < 0.0 or self.bad_noise_std < 0.0:
            raise ConfigurationError("noise levels must be non-negative")
        if self.labeled_count < self.n_categories or self.test_count < self.n_categories:
            raise ConfigurationError("need at least one labeled and test example per category")
        if self.agent0_good_attributes is not None:
            good = tuple(sorted(set(int(j) for j in self.agent0_good_attributes)))
            if good and (good[0] < 0 or good[-1] >= self.n_attributes):
                raise ConfigurationError("good attribute indices out of range")
            object.__setattr__(self, "agent0_good_attributes", good)


def good_attribute_sets(config: NoiseStudyConfig) -> tuple[frozenset[int], frozenset[int]]:
    """The two agents' reliable attribute sets; they partition the M attributes."""
    if config.agent0_good_attributes is None:
        first = frozenset(range((config.n_attributes + 1) // 2))
    else:
        first = frozenset(config.agent0_good_attributes)
    second = frozenset(range(config.n_attributes)) - first
    return first, second


def generate_noise_study(
    config: NoiseStudyConfig, annotations: np.ndarray, stream: int = 0
) -> np.ndarray:
    """Both agents' noisy views of one set of binary attribute annotations.

    Returns a (2, n_examples, n_attributes) array: annotation plus Gaussian
    noise at the per-agent, per-attribute level, clamped back into (0, 1) so
    each value remains a valid presence probability. Noise draws depend only on
    the seed and shapes, so sweeping the noise level reuses the same draws
    (common random numbers).
    """
    annotations = np.asarray(annotations, dtype=float)
    if annotations.ndim != 2 or annotations.shape[1] != config.n_attributes:
        raise ConfigurationError("annotations must be (n_examples, n_attributes)")
    if not np.isin(annotations, (0.0, 1.0)).all():
        raise ConfigurationError("annotations must be binary")
    sets = good_attribute_sets(config)
    sigma = np.empty((2, config.n_attributes))
    for agent in (0, 1):
        for j in range(config.n_attributes):
            sigma[agent, j] = (
                config.good_noise_std if j in sets[agent] else config.bad_noise_std
            )
    rng = np.random.default_rng([config.rng_seed, _STREAM_STUDY_NOISE, stream])
    draws = rng.standard_normal((2,) + annotations.shape)
    noisy = annotations[None, :, :] + sigma[:, None, :] * draws
    return np.clip(noisy, PREDICTION_CLAMP, 1.0 - PREDICTION_CLAMP)


def _balanced_categories(count: int, n_categories: int) -> np.ndarray:
    base, extra = divmod(count, n_categories)
    return np.repeat(np.arange(n_categories), base + (np.arange(n_categories) < extra))


@dataclass(frozen=True, eq=False)
class NoiseStudyDataset:
    """One sampled study instance.

    Each agent has its own human-annotated labeled set (ground-truth bits,
    random category composition), from which it estimates its matrix. The test
    set is shared; what differs per agent are its noisy attribute predictions
    on the test examples.
    """

    config: NoiseStudyConfig
    ground_truth_matrix: np.ndarray
    labeled_categories: np.ndarray  # (2, labeled_count)
    labeled_attributes: np.ndarray  # (2, labeled_count, n_attributes)
    test_categories: np.ndarray  # (test_count,)
    test_attributes: np.ndarray  # (test_count, n_attributes)
    test_predictions: np.ndarray  # (2, test_count, n_attributes)


def generate_noise_dataset(config: NoiseStudyConfig) -> NoiseStudyDataset:
    seed = config.rng_seed
    n_cat, n_attr = config.n_categories, config.n_attributes
    truth = config.ground_truth_matrix
    if truth is None:
        truth = contrast_ground_truth_matrix(
            n_attr, n_cat, np.random.default_rng([seed, _STREAM_STUDY_MATRIX]),
            low=0.2, high=0.8,
        )
    labeled_cats = np.empty((2, config.labeled_count), dtype=int)
    labeled_attrs = np.empty((2, config.labeled_count, n_attr), dtype=np.int8)
    for agent in (0, 1):
        rng = np.random.default_rng([seed, _STREAM_STUDY_LABELED, agent])
        cats = np.sort(rng.integers(0, n_cat, config.labeled_count))
        labeled_cats[agent] = cats
        labeled_attrs[agent] = (
            rng.random((config.labeled_count, n_attr)) < truth[:, cats].T
        ).astype(np.int8)
    test_cats = _balanced_categories(config.test_count, n_cat)
    test_rng = np.random.default_rng([seed, _STREAM_STUDY_TEST])
    test_attrs = (
        test_rng.random((test_cats.size, n_attr)) < truth[:, test_cats].T
    ).astype(np.int8)
    return NoiseStudyDataset(
        config=config,
        ground_truth_matrix=truth,
        labeled_categories=labeled_cats,
        labeled_attributes=labeled_attrs,
        test_categories=test_cats,
        test_attributes=test_attrs,
        test_predictions=generate_noise_study(config, test_attrs, stream=1),
    )


def noise_sweep(levels: Sequence[float], config: NoiseStudyConfig) -> list[NoiseStudyDataset]:
    """One dataset per ascending good-attribute noise level, with shared draws.

    The bad-attribute noise stays fixed; only the good level moves, so paired
    comparisons across levels differ through sigma alone.
    """
    levels = [float(s) for s in levels]
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise ConfigurationError("noise levels must be ascending")
    return [
        generate_noise_dataset(replace(config, good_noise_std=level)) for level in levels
    ]


def calibrate_noise_std(
    target_accuracy: float, rng_seed: int = 0, n_samples: int = 200_000
) -> float:
    """Noise level whose thresholded predictions hit the target binary accuracy.

    Empirical bisection on a large sample of simulated annotations; accuracy
    is monotone decreasing in the noise level, from 1.0 at zero noise toward
    chance (0.5).
    """
    if not 0.5 < target_accuracy < 1.0:
        raise ConfigurationError("target accuracy must be in (0.5, 1.0)")
    rng = np.random.default_rng([rng_seed, _STREAM_CALIBRATION])
    bits = rng.random(n_samples) < 0.5
    draws = rng.standard_normal(n_samples)

    def accuracy(sigma: float) -> float:
        # Clamping never moves a value across the 0.5 threshold.
        return float((((bits + sigma * draws) > 0.5) == bits).mean())

    lo, hi = 1e-9, 64.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if accuracy(mid) > target_accuracy:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
