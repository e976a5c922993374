"""The bootstrap iteration loop for every learner variant, plus metrics.

Loop order within one iteration is fixed: train models on the current labeled
pool, exchange and fuse matrices at the communication barrier (cooperative
variants only), score the unlabeled pool, transfer, prune on schedule, then
record metrics. Runs are fully deterministic: the same variant, world, and
config always produce identical records.

Variants:

* ``SSL_IND``: plain self-training per agent, feature-category view only.
* ``MULTIVIEW_IND``: adds the attribute view; scoring uses the mean of both
  views; no communication.
* ``ENSEMBLE_IND``: two SSL_IND learners whose test predictions average the
  two agents' feature-view posteriors over paired test examples.
* ``COOPERATIVE_UNIFORM``: multi-view plus entrywise mean fusion of the two
  agents' matrices each iteration.
* ``COOPERATIVE_WEIGHTED``: multi-view plus per-attribute row overwrite by
  attribute-classifier reliability measured on the original seed set.
* ``MAX_ACCURACY_UPPER_BOUND``: the multi-view learner trained once, fully
  supervised, on the labeled and unlabeled pools with ground-truth labels.
"""
from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from statistics import fmean

import numpy as np

from .crf import crf_posterior_batch, estimate_matrix_from_labels
from .errors import ConfigurationError, StateError
from .linear import (
    TrainConfig,
    attribute_accuracy_arrays,
    train_attribute_bank,
    train_category_bank,
)
from .messages import fuse_uniform, fuse_weighted
from .pool import DISTRACTOR, PoolState, move_to_labeled, prune_from_labeled
from .synthetic import (
    NoiseStudyConfig,
    SyntheticWorld,
    calibrate_noise_std,
    generate_noise_dataset,
    good_attribute_sets,
)
from .transfer import derive_attribute_labels, select_prunes, select_transfers

#: Environment variable bounding how many agents run concurrently.
THREADS_ENV = "COOPATTR_THREADS"


class LearnerVariant(enum.Enum):
    SSL_IND = "SSL_IND"
    MULTIVIEW_IND = "MULTIVIEW_IND"
    ENSEMBLE_IND = "ENSEMBLE_IND"
    COOPERATIVE_UNIFORM = "COOPERATIVE_UNIFORM"
    COOPERATIVE_WEIGHTED = "COOPERATIVE_WEIGHTED"
    MAX_ACCURACY_UPPER_BOUND = "MAX_ACCURACY_UPPER_BOUND"


_ATTRIBUTE_AWARE = {
    LearnerVariant.MULTIVIEW_IND,
    LearnerVariant.COOPERATIVE_UNIFORM,
    LearnerVariant.COOPERATIVE_WEIGHTED,
}


@dataclass(frozen=True)
class LoopConfig:
    transfers_per_category: int = 2
    prunes_per_category: int = 6
    prune_every: int = 5
    train: TrainConfig = TrainConfig()


@dataclass(frozen=True)
class AgentMetrics:
    accuracy: float
    purity: float
    attribute_accuracy: tuple[float, ...] | None
    transfers: int
    prunes: int


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    agents: tuple[AgentMetrics, ...]


CSV_COLUMNS = ("iteration", "agent", "accuracy", "purity", "attr_acc_mean", "transfers", "prunes")


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _map_agents(fn, items):
    workers = _thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def compute_purity(pool: PoolState, examples) -> float:
    """Fraction of the labeled pool whose assigned category matches ground truth.

    Distractors never match; seeds match by construction.
    """
    if not pool.labeled:
        raise StateError("purity is undefined for an empty labeled pool")
    correct = 0
    for ex_id in pool.labeled:
        assignment = pool.assignments.get(ex_id)
        if assignment is None:
            raise StateError(f"labeled example {ex_id} has no assignment")
        if assignment[0] == examples[ex_id].true_category:
            correct += 1
    return correct / len(pool.labeled)


def compute_class_average_accuracy(predictions, truths, n_categories: int) -> float:
    """Mean over categories of the per-category test accuracy."""
    predictions = np.asarray(predictions, dtype=int)
    truths = np.asarray(truths, dtype=int)
    if predictions.shape != truths.shape:
        raise ConfigurationError("predictions and truths differ in length")
    if truths.size == 0 or truths.min() < 0 or truths.max() >= n_categories:
        raise ConfigurationError("every truth must be one of the target categories")
    per_category = []
    for category in range(n_categories):
        mask = truths == category
        if not mask.any():
            raise ConfigurationError(f"category {category} has no test examples")
        per_category.append(float((predictions[mask] == category).mean()))
    return fmean(per_category)


class _AgentRun:
    """Mutable per-agent loop state (internal)."""

    __slots__ = ("domain", "pool", "category_bank", "attribute_bank", "matrix", "q")

    def __init__(self, domain):
        self.domain = domain
        self.pool = domain.pool
        self.category_bank = None
        self.attribute_bank = None
        self.matrix = None
        self.q = None


def _features_for(domain, ids):
    return np.stack([domain.examples[i].features for i in ids])


def _labeled_training_data(run, need_attributes: bool):
    ids = sorted(run.pool.labeled)
    features = _features_for(run.domain, ids)
    categories = np.fromiter(
        (run.pool.assignments[i][0] for i in ids), dtype=int, count=len(ids)
    )
    attributes = None
    if need_attributes:
        attributes = np.array([run.pool.assignments[i][1] for i in ids], dtype=np.int8)
    return features, categories, attributes


def _train_agent(run, world, cfg: LoopConfig, aware: bool, weighted: bool):
    n_cat = world.config.n_categories
    n_attr = world.config.n_attributes
    features, categories, attributes = _labeled_training_data(run, aware)
    run.category_bank = train_category_bank(features, categories, n_cat, cfg.train)
    if aware:
        run.attribute_bank = train_attribute_bank(features, attributes, cfg.train)
        run.matrix = estimate_matrix_from_labels(categories, attributes, n_cat, n_attr)
        if weighted:
            seed_ids = sorted(run.pool.seed_ids)
            seed_features = _features_for(run.domain, seed_ids)
            seed_truth = np.stack(
                [run.domain.examples[i].true_attributes for i in seed_ids]
            )
            run.q = attribute_accuracy_arrays(run.attribute_bank, seed_features, seed_truth)


def _agent_posterior(run, features, aware: bool, n_categories: int):
    p_fc = run.category_bank.posterior_batch(features)
    if not aware:
        return p_fc
    unary = run.attribute_bank.probs_batch(features)
    p_ac = crf_posterior_batch(run.matrix, unary, n_categories)
    return 0.5 * (p_fc + p_ac)


def _advance_agent(run, t: int, cfg: LoopConfig, aware: bool, n_categories: int):
    transfers = 0
    unlabeled_ids = sorted(run.pool.unlabeled)
    if unlabeled_ids:
        posteriors = _agent_posterior(
            run, _features_for(run.domain, unlabeled_ids), aware, n_categories
        )
        chosen = select_transfers(
            list(zip(unlabeled_ids, posteriors)), cfg.transfers_per_category
        )
        for ex_id, category in chosen:
            bits = derive_attribute_labels(run.matrix, category) if aware else ()
            run.pool = move_to_labeled(run.pool, ex_id, category, bits)
        transfers = len(chosen)
    prunes = 0
    if cfg.prune_every > 0 and t % cfg.prune_every == 0:
        labeled_ids = sorted(run.pool.labeled)
        posteriors = _agent_posterior(
            run, _features_for(run.domain, labeled_ids), aware, n_categories
        )
        candidates = [
            (ex_id, run.pool.assignments[ex_id][0], post)
            for ex_id, post in zip(labeled_ids, posteriors)
        ]
        pruned = select_prunes(candidates, cfg.prunes_per_category, run.pool.seed_ids)
        run.pool = prune_from_labeled(run.pool, pruned)
        prunes = len(pruned)
    return transfers, prunes


def _test_arrays(run):
    ids = sorted(run.pool.test)
    features = _features_for(run.domain, ids)
    truths = np.fromiter(
        (run.domain.examples[i].true_category for i in ids), dtype=int, count=len(ids)
    )
    return ids, features, truths


def _agent_test_metrics(run, aware: bool, n_categories: int):
    _, features, truths = _test_arrays(run)
    posteriors = _agent_posterior(run, features, aware, n_categories)
    accuracy = compute_class_average_accuracy(
        np.argmax(posteriors, axis=1), truths, n_categories
    )
    attribute_accuracy = None
    if aware:
        truth_bits = np.stack(
            [run.domain.examples[i].true_attributes for i in sorted(run.pool.test)]
        )
        attribute_accuracy = tuple(
            float(v)
            for v in attribute_accuracy_arrays(run.attribute_bank, features, truth_bits)
        )
    return accuracy, attribute_accuracy


def _ensemble_test_accuracy(runs, world) -> float:
    n_categories = world.config.n_categories
    pairs = world.paired_test_ids
    mean_posterior = None
    for agent, run in enumerate(runs):
        ids = [pair[agent] for pair in pairs]
        posterior = run.category_bank.posterior_batch(_features_for(run.domain, ids))
        mean_posterior = posterior if mean_posterior is None else mean_posterior + posterior
    mean_posterior /= len(runs)
    truths = np.fromiter(
        (runs[0].domain.examples[pair[0]].true_category for pair in pairs),
        dtype=int,
        count=len(pairs),
    )
    return compute_class_average_accuracy(
        np.argmax(mean_posterior, axis=1), truths, n_categories
    )


def _run_upper_bound(world, iterations: int, cfg: LoopConfig) -> list[IterationRecord]:
    n_cat = world.config.n_categories
    n_attr = world.config.n_attributes
    metrics = []
    for domain in world.domains:
        ids = sorted(
            i
            for i in (domain.pool.labeled | domain.pool.unlabeled)
            if domain.examples[i].true_category != DISTRACTOR
        )
        features = _features_for(domain, ids)
        categories = np.fromiter(
            (domain.examples[i].true_category for i in ids), dtype=int, count=len(ids)
        )
        attributes = np.stack([domain.examples[i].true_attributes for i in ids])
        run = _AgentRun(domain)
        run.category_bank = train_category_bank(features, categories, n_cat, cfg.train)
        run.attribute_bank = train_attribute_bank(features, attributes, cfg.train)
        run.matrix = estimate_matrix_from_labels(categories, attributes, n_cat, n_attr)
        accuracy, attribute_accuracy = _agent_test_metrics(run, True, n_cat)
        purity = compute_purity(domain.pool, domain.examples)
        metrics.append(
            AgentMetrics(
                accuracy=accuracy,
                purity=purity,
                attribute_accuracy=attribute_accuracy,
                transfers=0,
                prunes=0,
            )
        )
    frozen = tuple(metrics)
    return [IterationRecord(iteration=t, agents=frozen) for t in range(1, iterations + 1)]


def run_experiment(
    variant: LearnerVariant,
    world: SyntheticWorld,
    iterations: int,
    config: LoopConfig | None = None,
) -> list[IterationRecord]:
    """Run one learner variant on one world and return per-iteration metrics."""
    if iterations < 1:
        raise ConfigurationError("iterations must be at least 1")
    cfg = config or LoopConfig()
    if variant is LearnerVariant.MAX_ACCURACY_UPPER_BOUND:
        return _run_upper_bound(world, iterations, cfg)
    aware = variant in _ATTRIBUTE_AWARE
    weighted = variant is LearnerVariant.COOPERATIVE_WEIGHTED
    n_categories = world.config.n_categories
    runs = [_AgentRun(domain) for domain in world.domains]
    records = []
    for t in range(1, iterations + 1):
        _map_agents(lambda run: _train_agent(run, world, cfg, aware, weighted), runs)
        if variant is LearnerVariant.COOPERATIVE_UNIFORM:
            fused = [
                fuse_uniform(runs[k].matrix, [runs[1 - k].matrix]) for k in range(len(runs))
            ]
            for run, matrix in zip(runs, fused):
                run.matrix = matrix
        elif weighted:
            fused = [
                fuse_weighted(
                    (runs[k].matrix, runs[k].q), [(runs[1 - k].matrix, runs[1 - k].q)]
                )
                for k in range(len(runs))
            ]
            for run, matrix in zip(runs, fused):
                run.matrix = matrix
        moved = _map_agents(
            lambda run: _advance_agent(run, t, cfg, aware, n_categories), runs
        )
        ensemble_accuracy = (
            _ensemble_test_accuracy(runs, world)
            if variant is LearnerVariant.ENSEMBLE_IND
            else None
        )
        agent_metrics = []
        for run, (transfers, prunes) in zip(runs, moved):
            if ensemble_accuracy is None:
                accuracy, attribute_accuracy = _agent_test_metrics(run, aware, n_categories)
            else:
                accuracy, attribute_accuracy = ensemble_accuracy, None
            agent_metrics.append(
                AgentMetrics(
                    accuracy=accuracy,
                    purity=compute_purity(run.pool, run.domain.examples),
                    attribute_accuracy=attribute_accuracy,
                    transfers=transfers,
                    prunes=prunes,
                )
            )
        records.append(IterationRecord(iteration=t, agents=tuple(agent_metrics)))
    return records


def records_to_csv(records) -> str:
    """Canonical CSV rendering; identical runs produce byte-identical text."""
    lines = [",".join(CSV_COLUMNS)]
    for record in records:
        for agent, m in enumerate(record.agents):
            attr_mean = "" if m.attribute_accuracy is None else repr(fmean(m.attribute_accuracy))
            lines.append(
                f"{record.iteration},{agent},{m.accuracy!r},{m.purity!r},"
                f"{attr_mean},{m.transfers},{m.prunes}"
            )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class NoiseSweepConfig:
    study: NoiseStudyConfig
    levels: tuple[float, ...]
    n_seeds: int = 20

    def __post_init__(self):
        if len(self.levels) < 1:
            raise ConfigurationError("sweep needs at least one noise level")
        if self.n_seeds < 1:
            raise ConfigurationError("sweep needs at least one seed")


@dataclass(frozen=True)
class NoiseLevelResult:
    good_noise_std: float
    baseline_accuracy: float
    cooperative_accuracy: float
    good_attribute_accuracy: float
    bad_attribute_accuracy: float

    @property
    def margin(self) -> float:
        return self.cooperative_accuracy - self.baseline_accuracy


def default_noise_sweep(
    n_levels: int = 6,
    n_seeds: int = 20,
    rng_seed: int = 0,
    good_accuracy_target: float = 0.92,
    bad_accuracy_target: float = 0.575,
    study: NoiseStudyConfig | None = None,
) -> NoiseSweepConfig:
    """Sweep whose lowest level hits the target good/bad accuracy bands and whose
    highest level makes all attributes equally bad."""
    sigma_good = calibrate_noise_std(good_accuracy_target, rng_seed=rng_seed)
    sigma_bad = calibrate_noise_std(bad_accuracy_target, rng_seed=rng_seed)
    base = study or NoiseStudyConfig(rng_seed=rng_seed)
    base = replace(base, bad_noise_std=sigma_bad)
    levels = tuple(float(s) for s in np.linspace(sigma_good, sigma_bad, n_levels))
    return NoiseSweepConfig(study=base, levels=levels, n_seeds=n_seeds)


def run_noise_study(sweep: NoiseSweepConfig) -> list[NoiseLevelResult]:
    """Matrix-only classification accuracy, own matrix vs the fused matrix.

    Per level and seed: each agent estimates its matrix from its own small
    human-annotated labeled set, then classifies the shared test set from its
    own noisy attribute predictions, once with its own matrix (baseline) and
    once with the two agents' fused matrix (cooperative). Feature models play
    no role here. Results average over agents and seeds.
    """
    n_cat = sweep.study.n_categories
    n_attr = sweep.study.n_attributes
    good_sets = good_attribute_sets(sweep.study)
    results = []
    for level in sweep.levels:
        baseline, cooperative, good_acc, bad_acc = [], [], [], []
        for k in range(sweep.n_seeds):
            cfg = replace(
                sweep.study, good_noise_std=float(level), rng_seed=sweep.study.rng_seed + k
            )
            data = generate_noise_dataset(cfg)
            matrices = [
                estimate_matrix_from_labels(
                    data.labeled_categories[agent],
                    data.labeled_attributes[agent],
                    n_cat,
                    n_attr,
                )
                for agent in (0, 1)
            ]
            fused = fuse_uniform(matrices[0], [matrices[1]])
            for agent in (0, 1):
                unary = data.test_predictions[agent]
                own_preds = np.argmax(crf_posterior_batch(matrices[agent], unary, n_cat), axis=1)
                fused_preds = np.argmax(crf_posterior_batch(fused, unary, n_cat), axis=1)
                baseline.append(
                    compute_class_average_accuracy(own_preds, data.test_categories, n_cat)
                )
                cooperative.append(
                    compute_class_average_accuracy(fused_preds, data.test_categories, n_cat)
                )
                thresholded = unary > 0.5
                truth = data.test_attributes.astype(bool)
                hits = thresholded == truth
                good = sorted(good_sets[agent])
                bad = sorted(frozenset(range(n_attr)) - good_sets[agent])
                good_acc.append(float(hits[:, good].mean()))
                bad_acc.append(float(hits[:, bad].mean()))
        results.append(
            NoiseLevelResult(
                good_noise_std=float(level),
                baseline_accuracy=fmean(baseline),
                cooperative_accuracy=fmean(cooperative),
                good_attribute_accuracy=fmean(good_acc),
                bad_attribute_accuracy=fmean(bad_acc),
            )
        )
    return results
