"""Acceptance suite: one test per exit criterion, each printing a verdict.

Every criterion checks the implementation against an independent
computation (enumeration, finite differences, normal equations, known
simulation ground truth) or an arithmetic fact that is fixed exactly.
"""

import filecmp
import shutil
import time
from pathlib import Path

import numpy as np

from convalign import alignment as ca
from convalign import pipeline
from convalign.config import (PipelineConfig, ScorerSettings,
                              TokenizerSettings)
from convalign.dataset import (SamplingPolicy, SplitPlan, assign_splits,
                               build_positive_pairs, sample_negatives,
                               split_pairs)
from convalign.evalrank import CandidateSet, recall_at_k
from convalign.scorer.model import tiny_preset
from convalign.scorer.train import gradient_check, train_scorer
from convalign.stats import RegressionSpec, bh_adjust, fit_linear, fit_random_intercept
from convalign.synthetic import SynthSpec, generate, write_corpus
from convalign.tokenizer import train_bpe
from convalign.transcript import (Conversation, EncounterMetadata, Sentence,
                                  Speaker)

# Sixteen-cell reference set: hand-walking the step-up rule at q = 0.2
# keeps exactly the three smallest values {0.007, 0.020, 0.032}.
REFERENCE_PVALUES = [0.762, 0.920, 0.908, 0.436, 0.020, 0.186, 0.007,
                     0.848, 0.082, 0.618, 0.032, 0.592, 0.617, 0.283,
                     0.563, 0.517]


def verdict(tag, ok, detail, elapsed, limit):
    status = "PASS" if ok and elapsed < limit else "FAIL"
    print(f"[{tag}] {status} ({elapsed:.1f}s / limit {limit:.0f}s) {detail}")
    assert ok, f"{tag}: {detail}"
    assert elapsed < limit, f"{tag}: took {elapsed:.1f}s (limit {limit}s)"


def test_c01_split_arithmetic():
    start = time.time()
    n = 42559
    n_val = int(np.floor(0.2 * n))
    n_test = int(np.floor(0.2 * n))
    counts_ok = (n - n_val - n_test, n_val, n_test) == (25537, 8511, 8511)
    totals_ok = (25537 * 2, 8511 * 10, 8511 * 10) == (51074, 85110, 85110)

    spec = SynthSpec(n_conversations=1000, exact_total_positives=n, seed=101,
                     annotation_rate=0.0)
    conversations, _ = generate(spec)
    positives = [p for c in conversations for p in build_positive_pairs(c)]
    full_ok = len(positives) == n
    assignment = split_pairs(positives, SplitPlan(seed=0))
    sizes = {s: 0 for s in ("train", "val", "test")}
    for split in assignment.values():
        sizes[split] += 1
    split_ok = (sizes["train"], sizes["val"], sizes["test"]) == \
        (25537, 8511, 8511)
    samples = sample_negatives(assign_splits(positives, SplitPlan(seed=0)),
                               SamplingPolicy(seed=0))
    totals = {s: 0 for s in sizes}
    for pair in samples:
        totals[pair.split] += 1
    sampled_ok = (totals["train"], totals["val"], totals["test"]) == \
        (51074, 85110, 85110)
    verdict("C1 split arithmetic",
            counts_ok and totals_ok and full_ok and split_ok and sampled_ok,
            f"splits={sizes} totals={totals}", time.time() - start, 60)


def test_c02_recall_calibration():
    start = time.time()
    rng = np.random.default_rng(7)
    sets = []
    for i in range(10000):
        ids = [f"{rng.integers(0, 10**12):012d}" for _ in range(10)]
        truth = int(rng.integers(0, 10))
        sets.append(CandidateSet(
            context_id=f"ctx{i}",
            candidates=tuple((ids[j], j == truth) for j in range(10))))
    constant = {pid: 0.5 for s in sets for pid, _ in s.candidates}
    r1 = recall_at_k(constant, sets, 1)
    r2 = recall_at_k(constant, sets, 2)
    r5 = recall_at_k(constant, sets, 5)
    oracle = {pid: (1.0 if is_gt else 0.0)
              for s in sets for pid, is_gt in s.candidates}
    o1, o2, o5 = (recall_at_k(oracle, sets, k) for k in (1, 2, 5))
    ok = (0.09 <= r1 <= 0.11 and 0.18 <= r2 <= 0.22 and 0.48 <= r5 <= 0.52
          and (o1, o2, o5) == (1.0, 1.0, 1.0))
    verdict("C2 recall calibration", ok,
            f"constant=({r1:.3f},{r2:.3f},{r5:.3f}) oracle=({o1},{o2},{o5})",
            time.time() - start, 10)


def test_c03_gradient_oracle():
    start = time.time()
    conversations, _ = generate(SynthSpec(n_conversations=4, seed=17,
                                          sentences_range=(12, 16)))
    texts = [s.text for c in conversations for s in c.sentences]
    vocab = train_bpe(texts, 50)
    pairs = [p for c in conversations for p in build_positive_pairs(c)][:2]
    worst = {}
    for style in (False, True):
        config = tiny_preset(
            stylebook=style, embedding_dim=8, encoder_heads=2,
            lstm_encoder_hidden=16, lstm_agg_hidden=16).with_vocab(vocab)
        errors = gradient_check(config, vocab, pairs, max_entries=24)
        worst[style] = max(errors.items(), key=lambda kv: kv[1])
        assert all(err < 1e-3 for err in errors.values()), \
            f"stylebook={style}: {errors}"
    verdict("C3 gradient oracle", True,
            f"worst plain={worst[False][0]}:{worst[False][1]:.2e} "
            f"styled={worst[True][0]}:{worst[True][1]:.2e}",
            time.time() - start, 60)


def test_c04_learning_signal():
    start = time.time()
    spec = SynthSpec(n_conversations=200, vocab_overlap=0.0, seed=11,
                     topic_word_fraction=0.8, topics_per_conversation=3,
                     pool_size=20, words_per_sentence=(3, 6))
    conversations, _ = generate(spec)
    positives = assign_splits(
        [p for c in conversations for p in build_positive_pairs(c)],
        SplitPlan(seed=1))
    dataset = sample_negatives(positives, SamplingPolicy(seed=2))
    vocab = train_bpe([s.text for c in conversations for s in c.sentences], 500)
    config = tiny_preset(
        stylebook=False, embedding_dim=16, encoder_heads=2,
        lstm_encoder_hidden=24, lstm_agg_hidden=16, learning_rate=1e-2,
        weight_decay=0.0, batch_size=128, max_epochs=16, patience=16,
        seed=7).with_vocab(vocab)
    _, history = train_scorer(dataset, config, vocab)
    best = history.best_recall1
    verdict("C4 learning signal", best >= 0.30,
            f"val recall@1={best:.3f} (chance 0.10) at epoch "
            f"{history.best_epoch} of {len(history.records)}",
            time.time() - start, 900)


def brute_force(tdiffs):
    scores = [tdiffs[a] - tdiffs[b] for a in range(len(tdiffs))
              for b in range(a + 1, len(tdiffs))]
    if not scores:
        return (None, None, None, None)
    positive = [s for s in scores if s > 0]
    magnitudes = [abs(s) for s in scores]
    return (max(positive) if positive else None,
            min(positive) if positive else None,
            max(magnitudes), min(magnitudes))


def test_c05_bruteforce_equivalence():
    start = time.time()
    rng = np.random.default_rng(23)
    checked = 0
    for _ in range(1000):
        length = int(rng.integers(2, 11))
        tdiffs = [float(v) for v in rng.random(length)]
        ours = ca.alignment_scores(tdiffs)
        expected = brute_force(tdiffs)
        got = (ours.max, ours.min, ours.absmax, ours.absmin)
        for a, b in zip(got, expected):
            assert (a is None) == (b is None)
            if b is not None:
                assert abs(a - b) <= 1e-12
        checked += 1
    constant = ca.alignment_scores([0.4] * 6)
    blank_ok = (constant.max is None and constant.min is None
                and constant.absmax == 0.0 and constant.absmin == 0.0)
    verdict("C5 brute-force equivalence", checked == 1000 and blank_ok,
            f"{checked} random vectors, constant-vector blanks correct",
            time.time() - start, 5)


def test_c06_interval_segmentation():
    start = time.time()

    def conversation(t):
        return Conversation(
            id="acc", metadata=EncounterMetadata(), sentences=tuple(
                Sentence(i + 1, Speaker.DOCTOR if i % 2 == 0 else Speaker.PATIENT,
                         f"s{i + 1}.", f"s{i + 1}.") for i in range(t)))

    uniform = ca.segment_intervals(conversation(10), [10] * 10)
    singleton_ok = all(iv.start == iv.end == iv.index for iv in uniform)

    # 100-token rule: cuts land at the first sentence boundary at or past
    # each successive tenth of the token budget.
    walk = ca.segment_intervals(conversation(20), [5] * 20)
    walkthrough_ok = [iv.end for iv in walk] == [2 * k for k in range(1, 11)]
    shifted = ca.segment_intervals(conversation(11),
                                   [7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 30])
    boundary_ok = shifted[0].end == 2

    rng = np.random.default_rng(29)
    never_split = True
    union_ok = True
    for _ in range(50):
        t = int(rng.integers(10, 50))
        counts = [int(c) for c in rng.integers(1, 15, size=t)]
        intervals = ca.segment_intervals(conversation(t), counts)
        covered = []
        for iv in intervals:
            if not iv.is_empty:
                covered.extend(iv.sentence_indices())
        union_ok &= covered == list(range(1, t + 1))
        never_split &= len(covered) == len(set(covered))
    verdict("C6 interval segmentation",
            singleton_ok and walkthrough_ok and boundary_ok
            and never_split and union_ok,
            "uniform singletons, 100-token rule, union/no-split hold",
            time.time() - start, 1)


def test_c07_bh_step_up_reference_set():
    start = time.time()
    report = bh_adjust(REFERENCE_PVALUES, q=0.2)
    rejected = {p for p, flag in zip(REFERENCE_PVALUES, report.rejected)
                if flag}
    verdict("C7 BH step-up", rejected == {0.007, 0.020, 0.032},
            f"rejected={sorted(rejected)}", time.time() - start, 1)


def test_c08_regression_oracles():
    start = time.time()
    rng = np.random.default_rng(31)
    max_gap = 0.0
    for _ in range(100):
        n = 20
        x = rng.normal(size=n)
        z = rng.normal(size=n)
        y = 1.0 + 0.8 * x - 0.5 * z + rng.normal(size=n)
        rows = [{"option12": float(y[i]), "predictor": float(x[i]),
                 "age": float(z[i])} for i in range(n)]
        fit = fit_linear(RegressionSpec("option12", "m", "max",
                                        covariates=("age",)), rows)
        X = np.column_stack([np.ones(n), x, z])
        beta = np.linalg.inv(X.T @ X) @ (X.T @ y)
        max_gap = max(max_gap, abs(fit.estimate - beta[1]))
    oracle_ok = max_gap < 1e-8

    rows = []
    clusters = np.repeat(np.arange(12), 8)
    x = rng.normal(size=len(clusters))
    y = 1.0 + 2.0 * x + rng.normal(size=len(clusters))
    for i in range(len(clusters)):
        rows.append({"option12": float(y[i]), "predictor": float(x[i]),
                     "clinician_id": str(clusters[i])})
    spec = RegressionSpec("option12", "m", "max", cluster="clinician_id")
    ols = fit_linear(RegressionSpec("option12", "m", "max"), rows)
    reduced = fit_random_intercept(spec, rows, lambda_fixed=0.0)
    reduction_ok = (abs(ols.estimate - reduced.estimate) < 1e-8
                    and abs(ols.se - reduced.se) < 1e-8
                    and abs(ols.p - reduced.p) < 1e-8)

    errors = []
    for seed in range(100):
        srng = np.random.default_rng(seed)
        clusters = np.repeat(np.arange(30), 10)
        u = srng.normal(scale=2.0, size=30)
        x = srng.normal(size=300)
        y = 2.0 + 1.5 * x + u[clusters] + srng.normal(size=300)
        rows = [{"option12": float(y[i]), "predictor": float(x[i]),
                 "clinician_id": str(clusters[i])} for i in range(300)]
        fit = fit_random_intercept(spec, rows)
        errors.append(abs(fit.lambda_ - 4.0) / 4.0)
    recovery = float(np.median(errors))
    verdict("C8 regression oracles",
            oracle_ok and reduction_ok and recovery < 0.25,
            f"normal-eq gap={max_gap:.1e}, lambda=0 reduction exact, "
            f"median lambda error={recovery:.1%}",
            time.time() - start, 120)


def _e2e_config(tmp_path):
    corpus_dir = tmp_path / "corpus"
    conversations, truth = generate(SynthSpec(
        n_conversations=14, sentences_range=(24, 36), seed=33))
    write_corpus(conversations, truth, corpus_dir)
    neural = ScorerSettings(kind="neural", model_id="nsp", neural={
        "embedding_dim": 8, "encoder_heads": 2, "encoder_layers": 1,
        "lstm_encoder_hidden": 8, "lstm_agg_hidden": 8,
        "learning_rate": 1e-3, "batch_size": 64, "max_epochs": 2,
        "patience": 5, "max_tokens": 64})
    planted = ScorerSettings(kind="planted", model_id="planted",
                             prob_table=str(corpus_dir / "planted_probs.csv"))
    return PipelineConfig(corpus_dir=str(corpus_dir),
                          work_dir=str(tmp_path / "work"),
                          seed=77, tokenizer=TokenizerSettings(vocab_size=300),
                          scorers=(neural, planted))


def test_c09_end_to_end_determinism(tmp_path):
    start = time.time()
    config = _e2e_config(tmp_path)
    pipeline.run_all(config)
    work = Path(config.work_dir)
    snapshot = tmp_path / "snapshot"
    shutil.copytree(work, snapshot)
    shutil.rmtree(work)
    pipeline.run_all(config)

    files_new = sorted(p.relative_to(work) for p in work.rglob("*")
                       if p.is_file())
    files_old = sorted(p.relative_to(snapshot) for p in snapshot.rglob("*")
                       if p.is_file())
    same_names = files_new == files_old
    diffs = [str(rel) for rel in files_new
             if not filecmp.cmp(work / rel, snapshot / rel, shallow=False)]
    verdict("C9 end-to-end determinism", same_names and not diffs,
            f"{len(files_new)} artifacts byte-identical" if not diffs
            else f"differing: {diffs}",
            time.time() - start, 300)


def test_c10_planted_effect_recovery(tmp_path):
    start = time.time()
    hits = 0
    seeds = range(20)
    for seed in seeds:
        corpus_dir = tmp_path / f"corpus{seed}"
        conversations, truth = generate(SynthSpec(
            n_conversations=200, trend="converging", seed=1000 + seed,
            option12_link=(30.0, 40.0), dcs_link=(50.0, 0.0),
            outcome_noise_sd=5.0, n_clinicians=40))
        write_corpus(conversations, truth, corpus_dir)
        config = PipelineConfig(
            corpus_dir=str(corpus_dir),
            work_dir=str(tmp_path / f"work{seed}"),
            seed=seed, tokenizer=TokenizerSettings(vocab_size=300),
            scorers=(
                ScorerSettings(kind="planted", model_id="planted",
                               prob_table=str(corpus_dir / "planted_probs.csv")),
                ScorerSettings(kind="overlap", model_id="overlap"),
            ))
        pipeline.ingest(config)
        pipeline.build_dataset(config)
        pipeline.align(config)
        text = pipeline.validate(config)
        for line in text.strip().splitlines()[1:]:
            cells = line.split(",")
            if cells[0] == "option12" and cells[1] == "planted" \
                    and cells[2] == "max":
                hits += cells[-1] == "yes"
    power = hits / len(seeds)
    verdict("C10 planted-effect recovery", power >= 0.80,
            f"power={power:.2f} over {len(seeds)} seeds",
            time.time() - start, 600)
