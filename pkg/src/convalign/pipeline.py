"""File-mediated pipeline stages behind the CLI.

Each stage reads the previous stage's artifacts from the work directory,
writes its own artifacts plus a sidecar recording the resolved-config hash,
and stays byte-deterministic for a fixed seed (no timestamps, stable float
repr, sorted iteration). External scorers plug in at the eval-recall and
align boundaries through the wire protocol.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from . import alignment as ca
from . import stats as st
from .config import PipelineConfig, config_hash, save_config
from .dataset import (SamplingPolicy, SplitPlan, assign_splits,
                      build_inference_pairs, build_positive_pairs, read_pairs,
                      sample_negatives, write_pairs)
from .errors import MissingInput, UpstreamStageFailed
from .evalrank import candidate_sets_from_pairs, recall_report, render_recall_csv
from .scorer import (ExternalScorer, LabelOracleScorer, NeuralScorer,
                     OverlapScorer, ScorerConfig, TableScorer,
                     load_checkpoint, save_checkpoint, train_scorer)
from .synthetic import GroundTruth
from .tokenizer import SubwordVocab, train_bpe
from .transcript import (Conversation, corpus_stats, parse_transcript,
                         serialize_transcript)

CA_TYPES = ("max", "min", "absmax", "absmin")


def _work(config: PipelineConfig) -> Path:
    path = Path(config.work_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_stage_meta(config: PipelineConfig, stage: str, **extra) -> None:
    work = _work(config)
    save_config(config, work / "resolved_config.json")
    payload = {"stage": stage, "config_hash": config_hash(config), **extra}
    (work / f"{stage}.meta.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise MissingInput(f"{stage}: expected {path} (run the prior stage first)")
    return path


def load_store(config: PipelineConfig) -> list:
    store = _require(_work(config) / "conversations", "pipeline")
    conversations = []
    for path in sorted(store.glob("*.jsonl")):
        conversations.append(parse_transcript(path))
    if not conversations:
        raise MissingInput(f"no conversations under {store}")
    return conversations


# -- stages -----------------------------------------------------------------

def ingest(config: PipelineConfig) -> list:
    """Validate raw transcripts into the conversation store; corpus stats."""
    corpus = Path(config.corpus_dir)
    files = sorted(corpus.glob("*.jsonl"))
    if not files:
        raise MissingInput(f"no *.jsonl transcripts under {corpus}")
    work = _work(config)
    store = work / "conversations"
    store.mkdir(parents=True, exist_ok=True)
    conversations = []
    for path in files:
        conversation = parse_transcript(path)
        conversations.append(conversation)
        with open(store / f"{conversation.id}.jsonl", "w", encoding="utf-8") as fh:
            serialize_transcript(conversation, fh)

    stats = corpus_stats(conversations)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["role", "mean_words", "sd_words",
                     "mean_sentences", "sd_sentences"])
    for role, rs in (("doctor", stats.doctor), ("patient", stats.patient)):
        writer.writerow([role, repr(rs.mean_words), repr(rs.sd_words),
                         repr(rs.mean_sentences), repr(rs.sd_sentences)])
    writer.writerow([])
    writer.writerow(["n_conversations", stats.n_conversations])
    writer.writerow(["patient_dominant_count", stats.patient_dominant_count])
    writer.writerow(["mean_duration_min",
                     "" if stats.mean_duration is None else repr(stats.mean_duration)])
    writer.writerow(["sd_duration_min",
                     "" if stats.sd_duration is None else repr(stats.sd_duration)])
    (work / "corpus_stats.csv").write_text(buf.getvalue(), encoding="utf-8")
    _write_stage_meta(config, "ingest", n_conversations=len(conversations))
    return conversations


def build_dataset(config: PipelineConfig) -> dict:
    """Positive pairs, splits, negatives and the subword vocabulary."""
    conversations = load_store(config)
    work = _work(config)

    if config.tokenizer.pretrained_merges:
        vocab = SubwordVocab.load(config.tokenizer.pretrained_merges)
    else:
        texts = [s.text for c in conversations for s in c.sentences]
        vocab = train_bpe(texts, config.tokenizer.vocab_size,
                          lowercase=config.tokenizer.lowercase)
    vocab.save(work / "vocab.merges")

    positives = []
    for conversation in conversations:
        positives.extend(build_positive_pairs(conversation,
                                              config.dataset.window))
    plan = SplitPlan(fractions=config.dataset.split_fractions,
                     seed=config.seed, unit=config.dataset.split_unit)
    positives = assign_splits(positives, plan)
    policy = SamplingPolicy(negatives_train=config.dataset.negatives_train,
                            negatives_eval=config.dataset.negatives_eval,
                            seed=config.seed)
    samples = sample_negatives(positives, policy)

    dataset_dir = work / "dataset"
    dataset_dir.mkdir(exist_ok=True)
    counts = {}
    for split in ("train", "val", "test"):
        rows = [p for p in samples if p.split == split]
        write_pairs(rows, dataset_dir / f"{split}.jsonl")
        counts[split] = len(rows)
    _write_stage_meta(config, "build-dataset", counts=counts,
                      n_positives=len(positives))
    return counts


def _scorer_config(settings, config: PipelineConfig,
                   vocab: SubwordVocab) -> ScorerConfig:
    options = dict(settings.neural)
    options.setdefault("seed", config.seed)
    return ScorerConfig(**options).with_vocab(vocab)


def train_stage(config: PipelineConfig) -> dict:
    """Train every configured neural scorer; checkpoint + history CSV."""
    work = _work(config)
    vocab = SubwordVocab.load(_require(work / "vocab.merges", "train-scorer"))
    dataset_dir = _require(work / "dataset", "train-scorer")
    samples = (read_pairs(dataset_dir / "train.jsonl")
               + read_pairs(dataset_dir / "val.jsonl"))
    results = {}
    for settings in config.scorers:
        if settings.kind != "neural":
            continue
        scorer_config = _scorer_config(settings, config, vocab)
        params, history = train_scorer(samples, scorer_config, vocab)
        save_checkpoint(work / f"scorer_{settings.model_id}.ckpt",
                        params, scorer_config)
        (work / f"history_{settings.model_id}.csv").write_text(
            history.to_csv(), encoding="utf-8")
        results[settings.model_id] = {"best_epoch": history.best_epoch,
                                      "best_recall1": history.best_recall1}
    _write_stage_meta(config, "train-scorer", results=results)
    return results


def _open_scorer(settings, config: PipelineConfig, vocab: SubwordVocab):
    """Instantiate one configured scorer; callers close external ones."""
    if settings.kind == "neural":
        path = _require(Path(config.work_dir) / f"scorer_{settings.model_id}.ckpt",
                        "scoring")
        params, scorer_config = load_checkpoint(path)
        return NeuralScorer(scorer_config, vocab, params,
                            model_id=settings.model_id)
    if settings.kind == "overlap":
        return OverlapScorer(vocab, model_id=settings.model_id)
    if settings.kind == "oracle":
        scorer = LabelOracleScorer()
        scorer.model_id = settings.model_id
        return scorer
    if settings.kind == "planted":
        table = GroundTruth.probs_from_csv(
            _require(Path(settings.prob_table), "scoring").read_text(
                encoding="utf-8"))
        return TableScorer(table, model_id=settings.model_id)
    return ExternalScorer(settings.command, format=settings.wire_format,
                          timeout=settings.timeout,
                          model_id=settings.model_id).start()


def _close_scorer(scorer) -> None:
    if isinstance(scorer, ExternalScorer):
        scorer.close()


def _scorer_size(scorer) -> str:
    if isinstance(scorer, NeuralScorer):
        return str(scorer.params.n_parameters())
    return "-"


def eval_recall(config: PipelineConfig) -> str:
    """Test-split ranking metrics for every configured scorer."""
    work = _work(config)
    vocab = SubwordVocab.load(_require(work / "vocab.merges", "eval-recall"))
    test_pairs = read_pairs(_require(work / "dataset" / "test.jsonl",
                                     "eval-recall"))
    sets = candidate_sets_from_pairs(test_pairs)
    reports = []
    for settings in config.scorers:
        scorer = _open_scorer(settings, config, vocab)
        try:
            predictions = scorer.predict_pairs(test_pairs)
        finally:
            _close_scorer(scorer)
        reports.append(recall_report(settings.model_id, predictions, sets,
                                     size=_scorer_size(scorer)))
    text = render_recall_csv(reports)
    (work / "recall_report.csv").write_text(text, encoding="utf-8")
    _write_stage_meta(config, "eval-recall", models=[r.model for r in reports])
    return text


def _token_counts(scorer, conversation: Conversation, vocab: SubwordVocab) -> list:
    counter = getattr(scorer, "token_count", None)
    if counter is None:
        counter = vocab.token_count
    return [counter(s.text) for s in conversation.sentences]


def _trace_one(scorer, settings, config: PipelineConfig,
               conversation: Conversation, predictions: dict,
               vocab: SubwordVocab) -> ca.ConversationTrace:
    tokenizer_id = ("external" if settings.kind == "external"
                    else f"bpe{vocab.vocab_size}")
    counts = _token_counts(scorer, conversation, vocab)
    return ca.score_conversation(
        conversation, predictions, counts,
        n_intervals=config.alignment.n_intervals,
        tdiff_denominator=config.alignment.tdiff_denominator,
        model_id=settings.model_id, tokenizer_id=tokenizer_id)


def _blank_trace(settings, config, conversation, vocab,
                 predictions) -> ca.ConversationTrace:
    tokenizer_id = ("external" if settings.kind == "external"
                    else f"bpe{vocab.vocab_size}")
    return ca.ConversationTrace(
        conversation_id=conversation.id, model_id=settings.model_id,
        tokenizer_id=tokenizer_id, n_intervals=config.alignment.n_intervals,
        tdiff_denominator=config.alignment.tdiff_denominator,
        intervals=(), predictions=predictions, interval_scores=(),
        tdiffs=(), scores=ca.AlignmentScores(conversation.id, None, None,
                                             None, None))


def align(config: PipelineConfig) -> list:
    """Per-conversation alignment scores + audit traces for each scorer."""
    conversations = load_store(config)
    work = _work(config)
    vocab = SubwordVocab.load(_require(work / "vocab.merges", "align"))
    traces_dir = work / "traces"
    traces_dir.mkdir(exist_ok=True)
    window = config.dataset.window

    all_traces = []
    for settings in config.scorers:
        scorer = _open_scorer(settings, config, vocab)
        try:
            per_conv_predictions = []
            for conversation in conversations:
                pairs = build_inference_pairs(conversation, window)
                if pairs:
                    probs = scorer.predict_pairs(pairs)
                    predictions = {p.response.index: probs[p.pair_id]
                                   for p in pairs}
                else:
                    predictions = {}
                per_conv_predictions.append(predictions)

            def compute(item):
                conversation, predictions = item
                if not predictions:
                    return _blank_trace(settings, config, conversation,
                                        vocab, predictions)
                try:
                    return _trace_one(scorer, settings, config, conversation,
                                      predictions, vocab)
                except ca.TooShort:
                    return _blank_trace(settings, config, conversation,
                                        vocab, predictions)

            items = list(zip(conversations, per_conv_predictions))
            if config.jobs > 1:
                with ThreadPoolExecutor(max_workers=config.jobs) as pool:
                    traces = list(pool.map(compute, items))
            else:
                traces = [compute(item) for item in items]
        finally:
            _close_scorer(scorer)
        for trace in traces:
            name = f"{trace.conversation_id}_{settings.model_id}.json"
            (traces_dir / name).write_text(trace.to_json() + "\n",
                                           encoding="utf-8")
        all_traces.extend(traces)

    (work / "ca_scores.csv").write_text(ca.render_scores_csv(all_traces),
                                        encoding="utf-8")
    _write_stage_meta(config, "align", n_traces=len(all_traces))
    return all_traces


def _read_ca_scores(path: Path) -> list:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "conversation_id": rec["conversation_id"],
                "model_id": rec["model_id"],
                **{t: (float(rec[t]) if rec[t] else None) for t in CA_TYPES},
            })
    return rows


def validate(config: PipelineConfig, ca_csv: Path | str | None = None) -> str:
    """Associate alignment scores with outcomes; BH over mixed-model p-values."""
    work = _work(config)
    path = Path(ca_csv) if ca_csv else _require(work / "ca_scores.csv",
                                                "validate")
    score_rows = _read_ca_scores(path)
    conversations = {c.id: c for c in load_store(config)}
    models = sorted({r["model_id"] for r in score_rows})
    settings = config.stats

    def apply_blank_policy(row):
        scores = {t: row[t] for t in CA_TYPES}
        if config.alignment.blank_policy == "whole_conversation" and \
                any(v is None for v in scores.values()):
            return {t: None for t in CA_TYPES}
        return scores

    cells = []
    transform_meta = {}
    for outcome in ("option12", "dcs"):
        for model in models:
            model_rows = [r for r in score_rows if r["model_id"] == model]
            for ca_type in CA_TYPES:
                values = []
                metas = []
                for row in model_rows:
                    conv = conversations.get(row["conversation_id"])
                    if conv is None:
                        raise UpstreamStageFailed(
                            f"ca_scores references unknown conversation "
                            f"{row['conversation_id']}")
                    values.append(apply_blank_policy(row)[ca_type])
                    metas.append(conv.metadata)
                transformed, meta = st.normalize_scores(values,
                                                        settings.transform)
                key = f"{model}/{ca_type}"
                transform_meta[key] = {**meta,
                                       "skewness": st.skewness_report(values)}
                rows = []
                for value, m in zip(transformed, metas):
                    rows.append({
                        "predictor": value,
                        "option12": m.option12, "dcs": m.dcs,
                        "age": m.patient_age, "sex": m.sex, "race": m.race,
                        "arm": m.trial_arm, "clinician_id": m.clinician_id,
                    })
                spec_unadj = st.RegressionSpec(outcome=outcome, model_id=model,
                                               ca_type=ca_type)
                spec_adj = st.RegressionSpec(outcome=outcome, model_id=model,
                                             ca_type=ca_type,
                                             covariates=settings.covariates)
                spec_mixed = st.RegressionSpec(outcome=outcome, model_id=model,
                                               ca_type=ca_type,
                                               covariates=settings.covariates,
                                               cluster=settings.cluster)
                cells.append({
                    "outcome": outcome, "model": model, "ca_method": ca_type,
                    "unadj": st.fit_linear(spec_unadj, rows),
                    "adj": st.fit_linear(spec_adj, rows),
                    "mixed": st.fit_random_intercept(spec_mixed, rows),
                })

    report = st.bh_adjust([c["mixed"].p for c in cells], q=settings.fdr_q)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["outcome", "model", "ca_method",
                     "unadj_est", "unadj_se", "unadj_p",
                     "adj_est", "adj_se", "adj_p",
                     "mixed_est", "mixed_se", "mixed_p", "bh_reject"])
    for cell, rejected in zip(cells, report.rejected):
        row = [cell["outcome"], cell["model"], cell["ca_method"]]
        for fit in (cell["unadj"], cell["adj"], cell["mixed"]):
            row.extend([repr(fit.estimate), repr(fit.se), repr(fit.p)])
        row.append("yes" if rejected else "no")
        writer.writerow(row)
    text = buf.getvalue()
    (work / "validation_report.csv").write_text(text, encoding="utf-8")
    (work / "validation_meta.json").write_text(
        json.dumps({"transforms": transform_meta, "m": report.m,
                    "q": report.q, "n_rejected": report.n_rejected},
                   indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_stage_meta(config, "validate", n_cells=len(cells),
                      n_rejected=report.n_rejected)
    return text


def report(work_dir: Path | str) -> str:
    """Summarize all artifacts into one markdown report.

    Refuses to run when stage sidecars carry different config hashes.
    """
    work = Path(work_dir)
    metas = sorted(work.glob("*.meta.json"))
    if not metas:
        raise MissingInput(f"no stage sidecars under {work}")
    hashes = {}
    for path in metas:
        payload = json.loads(path.read_text(encoding="utf-8"))
        hashes[payload["stage"]] = payload["config_hash"]
    if len(set(hashes.values())) > 1:
        raise UpstreamStageFailed(
            f"mixed config hashes across stages: {hashes}")

    lines = ["# Pipeline report", "",
             f"Config hash: `{next(iter(hashes.values()))}`",
             f"Stages present: {', '.join(sorted(hashes))}", ""]

    def embed(title, filename):
        path = work / filename
        if not path.exists():
            return
        lines.append(f"## {title}")
        lines.append("")
        lines.append("```")
        lines.append(path.read_text(encoding="utf-8").rstrip("\n"))
        lines.append("```")
        lines.append("")

    embed("Corpus statistics", "corpus_stats.csv")
    embed("Ranking metrics", "recall_report.csv")
    embed("Alignment scores", "ca_scores.csv")
    embed("Outcome associations", "validation_report.csv")
    text = "\n".join(lines)
    (work / "report.md").write_text(text, encoding="utf-8")
    return text


def run_all(config: PipelineConfig, stages: Sequence[str] = ()) -> None:
    """Run the standard stage order (used by tests and demos)."""
    wanted = set(stages) if stages else {"ingest", "build-dataset",
                                         "train-scorer", "eval-recall",
                                         "align", "validate", "report"}
    if "ingest" in wanted:
        ingest(config)
    if "build-dataset" in wanted:
        build_dataset(config)
    if "train-scorer" in wanted:
        train_stage(config)
    if "eval-recall" in wanted:
        eval_recall(config)
    if "align" in wanted:
        align(config)
    if "validate" in wanted:
        validate(config)
    if "report" in wanted:
        report(config.work_dir)
