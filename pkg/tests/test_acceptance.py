"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete. The full-loop trend runs (criteria 3 and 4) share one
module-scoped batch of experiments.
"""
from __future__ import annotations

import time
from statistics import fmean

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import coopattr.harness as harness
from coopattr import (
    AttributeCategoryMatrix,
    LearnerVariant,
    LoopConfig,
    MatrixMessage,
    SplitSizes,
    SyntheticWorldConfig,
    brute_force_posterior,
    contrast_ground_truth_matrix,
    crf_posterior,
    decode_message,
    default_noise_sweep,
    encode_message,
    estimate_matrix_from_labels,
    generate_world,
    run_experiment,
    run_noise_study,
)
from coopattr.cli import main as cli_main
from coopattr.config import ExperimentConfig, loop_config, world_config
from coopattr.messages import fuse_weighted

TREND_SEEDS = range(10)
TREND_ITERATIONS = 40
TREND_VARIANTS = (
    LearnerVariant.SSL_IND,
    LearnerVariant.MULTIVIEW_IND,
    LearnerVariant.COOPERATIVE_UNIFORM,
)


def _report(number: int, name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {number} {name}: {status}  {detail}")
    assert passed, f"criterion {number} ({name}) failed: {detail}"


def test_criterion_1_crf_oracle_equivalence():
    rng = np.random.default_rng(101)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 11))
        n = int(rng.integers(2, 11))
        matrix = AttributeCategoryMatrix(rng.uniform(0.0, 1.0, (m, n)))
        attr_probs = rng.uniform(1e-4, 1.0 - 1e-4, m)
        fast = crf_posterior(matrix, attr_probs, n).probs
        exact = brute_force_posterior(matrix, attr_probs, n).probs
        worst = max(worst, float(np.abs(fast - exact).max()))
    elapsed = time.perf_counter() - started
    _report(
        1,
        "crf-oracle-equivalence",
        worst <= 1e-9 and elapsed < 10.0,
        f"max deviation {worst:.2e} over 1000 instances in {elapsed:.1f}s",
    )


def test_criterion_2_noise_study_trend():
    started = time.perf_counter()
    sweep = default_noise_sweep(n_levels=6, n_seeds=20, rng_seed=0)
    results = run_noise_study(sweep)
    elapsed = time.perf_counter() - started
    low, high = results[0], results[-1]
    margin_low = low.cooperative_accuracy - low.baseline_accuracy
    margin_high = high.cooperative_accuracy - high.baseline_accuracy
    bands_ok = (
        low.good_attribute_accuracy > 0.80
        and 0.50 <= low.bad_attribute_accuracy <= 0.65
    )
    _report(
        2,
        "noise-study-trend",
        bands_ok and margin_low >= 0.03 and margin_high < margin_low and elapsed < 120.0,
        f"margin_low {margin_low:+.4f} margin_high {margin_high:+.4f} "
        f"good_acc {low.good_attribute_accuracy:.3f} bad_acc {low.bad_attribute_accuracy:.3f} "
        f"in {elapsed:.1f}s",
    )


@pytest.fixture(scope="module")
def trend_runs():
    cfg = ExperimentConfig()
    loop = loop_config(cfg)
    started = time.perf_counter()
    records = {variant: [] for variant in TREND_VARIANTS}
    for seed in TREND_SEEDS:
        world = generate_world(world_config(cfg, seed))
        for variant in TREND_VARIANTS:
            records[variant].append(run_experiment(variant, world, TREND_ITERATIONS, loop))
    return records, time.perf_counter() - started


def _mean_final_accuracy(runs):
    return fmean(fmean(m.accuracy for m in rec[-1].agents) for rec in runs)


def _mean_purity_at(runs, iteration):
    return fmean(fmean(m.purity for m in rec[iteration - 1].agents) for rec in runs)


def test_criterion_3_full_loop_ordering(trend_runs):
    records, elapsed = trend_runs
    ssl = _mean_final_accuracy(records[LearnerVariant.SSL_IND])
    multi = _mean_final_accuracy(records[LearnerVariant.MULTIVIEW_IND])
    coop = _mean_final_accuracy(records[LearnerVariant.COOPERATIVE_UNIFORM])
    ordering_ok = coop >= multi - 0.01 and multi >= ssl - 0.01
    gap_ok = coop - ssl >= 0.02
    _report(
        3,
        "full-loop-ordering",
        ordering_ok and gap_ok and elapsed < 600.0,
        f"ssl {ssl:.4f} multiview {multi:.4f} cooperative {coop:.4f} "
        f"coop-ssl {coop - ssl:+.4f} in {elapsed:.0f}s",
    )


def test_criterion_4_purity_ordering(trend_runs):
    records, _ = trend_runs
    details = []
    passed = True
    purities = {}
    for variant in TREND_VARIANTS:
        p10 = _mean_purity_at(records[variant], 10)
        p30 = _mean_purity_at(records[variant], 30)
        purities[variant] = (p10, p30)
        if p30 > p10 + 1e-9:
            passed = False
        details.append(f"{variant.name} p10={p10:.3f} p30={p30:.3f}")
    for iteration_index in (0, 1):
        coop = purities[LearnerVariant.COOPERATIVE_UNIFORM][iteration_index]
        for baseline in (LearnerVariant.SSL_IND, LearnerVariant.MULTIVIEW_IND):
            if coop < purities[baseline][iteration_index] - 1e-9:
                passed = False
    _report(4, "purity-ordering", passed, "; ".join(details))


def _dominance_world():
    truth = contrast_ground_truth_matrix(
        10, 10, np.random.default_rng([2, 10]), low=0.1, high=0.9
    )
    return generate_world(
        SyntheticWorldConfig(
            n_categories=10,
            n_attributes=10,
            ground_truth_matrix=truth,
            examples_per_category=SplitSizes(labeled=5, unlabeled=30, test=20),
            n_distractors=500,
            feature_dims=(5, 16),
            feature_noise_stds=(0.5, 0.0),
            attribute_flip_rate=0.0,
            rng_seed=2,
        )
    )


def test_criterion_5_weighted_communication_dominance():
    world = _dominance_world()
    loop = LoopConfig()

    # Verify the construction's premise: agent B's attribute classifiers beat
    # agent A's on every attribute at every communication round.
    runs = [harness._AgentRun(domain) for domain in world.domains]
    min_margin = np.inf
    for t in range(1, TREND_ITERATIONS + 1):
        for run in runs:
            harness._train_agent(run, world, loop, aware=True, weighted=True)
        min_margin = min(min_margin, float((runs[1].q - runs[0].q).min()))
        fused = [
            fuse_weighted((runs[k].matrix, runs[k].q), [(runs[1 - k].matrix, runs[1 - k].q)])
            for k in (0, 1)
        ]
        for run, matrix in zip(runs, fused):
            run.matrix = matrix
        for run in runs:
            harness._advance_agent(run, t, loop, True, 10)

    multi = run_experiment(LearnerVariant.MULTIVIEW_IND, world, TREND_ITERATIONS, loop)
    weighted = run_experiment(
        LearnerVariant.COOPERATIVE_WEIGHTED, world, TREND_ITERATIONS, loop
    )
    b_identical = all(
        rm.agents[1] == rw.agents[1] for rm, rw in zip(multi, weighted)
    )
    gain = weighted[-1].agents[0].accuracy - multi[-1].agents[0].accuracy
    _report(
        5,
        "weighted-communication-dominance",
        min_margin > 0.0 and b_identical and gain >= 0.02,
        f"dominance margin {min_margin:+.3f}, agent B identical {b_identical}, "
        f"agent A gain {gain:+.4f}",
    )


def test_criterion_6_bandwidth_and_round_trip():
    matrix = AttributeCategoryMatrix(np.random.default_rng(7).uniform(0, 1, (10, 10)))
    encoded = encode_message(MatrixMessage(agent_id=0, iteration=1, matrix=matrix))
    size_ok = len(encoded) == 816

    failures = []

    @settings(max_examples=100, deadline=None)
    @given(
        st.integers(1, 12),
        st.integers(1, 12),
        st.integers(0, 32767),
        st.integers(1, 2**31 - 1),
        st.booleans(),
        st.integers(0, 2**32 - 1),
    )
    def round_trip(m, n, agent_id, iteration, with_q, seed):
        rng = np.random.default_rng(seed)
        msg = MatrixMessage(
            agent_id=agent_id,
            iteration=iteration,
            matrix=AttributeCategoryMatrix(rng.uniform(0, 1, (m, n))),
            accuracy_vector=rng.uniform(0, 1, m) if with_q else None,
        )
        if decode_message(encode_message(msg)) != msg:
            failures.append((m, n, agent_id, iteration))

    round_trip()
    _report(
        6,
        "bandwidth-and-round-trip",
        size_ok and not failures,
        f"10x10 payload {len(encoded)} bytes, round-trip failures {len(failures)}",
    )


def test_criterion_7_determinism(tmp_path):
    config_path = tmp_path / "run.cfg"
    config_path.write_text(
        "unlabeled_per_category = 10\n"
        "n_distractors = 50\n"
        "test_per_category = 10\n"
        "max_iters = 200\n"
    )
    outputs = []
    for name in ("first", "second"):
        out_dir = tmp_path / name
        cli_main(
            [
                "run",
                "--variant",
                "COOPERATIVE_UNIFORM",
                "--config",
                str(config_path),
                "--seed",
                "3",
                "--iterations",
                "12",
                "--out",
                str(out_dir),
            ]
        )
        outputs.append((out_dir / "records.csv").read_bytes())
    _report(
        7,
        "determinism",
        outputs[0] == outputs[1] and len(outputs[0]) > 0,
        f"records.csv of {len(outputs[0])} bytes byte-identical across runs",
    )


def test_criterion_8_matrix_estimation_consistency():
    truth = contrast_ground_truth_matrix(
        10, 10, np.random.default_rng([9, 10]), low=0.1, high=0.9
    )
    world = generate_world(
        SyntheticWorldConfig(
            n_categories=10,
            n_attributes=10,
            ground_truth_matrix=truth,
            examples_per_category=SplitSizes(labeled=500, unlabeled=1, test=1),
            n_distractors=0,
            feature_dims=(4, 4),
            feature_noise_stds=(0.1, 0.1),
            attribute_flip_rate=0.0,
            rng_seed=9,
        )
    )
    tolerance = 3.0 / np.sqrt(500)
    worst = 0.0
    for domain in world.domains:
        ids = sorted(domain.pool.labeled)
        categories = np.array([domain.pool.assignments[i][0] for i in ids])
        attributes = np.array([domain.pool.assignments[i][1] for i in ids], dtype=np.int8)
        estimated = estimate_matrix_from_labels(categories, attributes, 10, 10)
        worst = max(worst, float(np.abs(estimated.values - truth).max()))
    _report(
        8,
        "matrix-estimation-consistency",
        worst <= tolerance,
        f"max entry error {worst:.4f} vs tolerance {tolerance:.4f}",
    )
