"""Pipeline configuration: one versioned JSON file drives every stage.

The resolved configuration is written next to each stage's outputs along
with its hash, and the report stage refuses to mix artifacts produced under
different hashes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigInvalid

CONFIG_VERSION = 1


@dataclass(frozen=True)
class TokenizerSettings:
    vocab_size: int = 2000
    lowercase: bool = False
    pretrained_merges: str | None = None   # path to a merge-rule file


@dataclass(frozen=True)
class DatasetSettings:
    window: int = 5
    split_fractions: tuple = (0.6, 0.2, 0.2)
    split_unit: str = "pair"
    negatives_train: int = 1
    negatives_eval: int = 9


@dataclass(frozen=True)
class ScorerSettings:
    kind: str = "neural"          # neural | overlap | planted | external | oracle
    model_id: str = "neural"
    # neural options (forwarded into ScorerConfig)
    neural: dict = field(default_factory=dict)
    # external options
    command: tuple = ()
    wire_format: str = "plain"
    timeout: float = 60.0
    # planted options
    prob_table: str | None = None  # planted_probs.csv path


@dataclass(frozen=True)
class AlignmentSettings:
    n_intervals: int = 10
    tdiff_denominator: float = 2.0
    blank_policy: str = "per_type"     # per_type | whole_conversation


@dataclass(frozen=True)
class StatsSettings:
    transform: str = "identity"
    fdr_q: float = 0.2
    covariates: tuple = ("age", "sex", "race", "arm")
    cluster: str = "clinician_id"


@dataclass(frozen=True)
class PipelineConfig:
    corpus_dir: str = "corpus"
    work_dir: str = "work"
    seed: int = 0
    jobs: int = 1
    tokenizer: TokenizerSettings = TokenizerSettings()
    dataset: DatasetSettings = DatasetSettings()
    scorers: tuple = (ScorerSettings(),)
    alignment: AlignmentSettings = AlignmentSettings()
    stats: StatsSettings = StatsSettings()

    def with_overrides(self, seed: int | None = None,
                       jobs: int | None = None) -> "PipelineConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if jobs is not None:
            cfg = replace(cfg, jobs=jobs)
        return cfg


def _to_jsonable(obj):
    if isinstance(obj, tuple):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    return obj


def config_to_json(config: PipelineConfig) -> str:
    payload = {"config_version": CONFIG_VERSION, **_to_jsonable(asdict(config))}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def config_hash(config: PipelineConfig) -> str:
    return hashlib.sha256(config_to_json(config).encode("utf-8")).hexdigest()[:16]


def _build(cls, obj: dict, tuple_fields=()):
    kwargs = {}
    for key, value in obj.items():
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigInvalid(f"bad {cls.__name__} section: {exc}") from exc


def config_from_json(text: str) -> PipelineConfig:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigInvalid("config must be a JSON object")
    version = payload.pop("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigInvalid(f"unsupported config_version {version}")
    sections = dict(payload)
    try:
        tokenizer = _build(TokenizerSettings, sections.pop("tokenizer", {}))
        dataset = _build(DatasetSettings, sections.pop("dataset", {}))
        scorers = tuple(_build(ScorerSettings, s)
                        for s in sections.pop("scorers", [{}]))
        alignment = _build(AlignmentSettings, sections.pop("alignment", {}))
        stats = _build(StatsSettings, sections.pop("stats", {}))
        config = PipelineConfig(tokenizer=tokenizer, dataset=dataset,
                                scorers=scorers, alignment=alignment,
                                stats=stats, **sections)
    except TypeError as exc:
        raise ConfigInvalid(f"bad config field: {exc}") from exc
    validate_config(config)
    return config


def load_config(path: Path | str) -> PipelineConfig:
    return config_from_json(Path(path).read_text(encoding="utf-8"))


def save_config(config: PipelineConfig, path: Path | str) -> None:
    Path(path).write_text(config_to_json(config), encoding="utf-8")


def validate_config(config: PipelineConfig) -> None:
    if abs(sum(config.dataset.split_fractions) - 1.0) > 1e-12:
        raise ConfigInvalid("dataset.split_fractions must sum to 1")
    if config.alignment.blank_policy not in ("per_type", "whole_conversation"):
        raise ConfigInvalid("alignment.blank_policy must be per_type or "
                            "whole_conversation")
    if not config.scorers:
        raise ConfigInvalid("at least one scorer must be configured")
    for scorer in config.scorers:
        if scorer.kind not in ("neural", "overlap", "planted", "external",
                               "oracle"):
            raise ConfigInvalid(f"unknown scorer kind {scorer.kind!r}")
        if scorer.kind == "external" and not scorer.command:
            raise ConfigInvalid("external scorer needs a command")
        if scorer.kind == "planted" and not scorer.prob_table:
            raise ConfigInvalid("planted scorer needs a prob_table path")
    if config.stats.transform not in ("identity", "log_shift",
                                      "rank_inverse_normal"):
        raise ConfigInvalid(f"unknown transform {config.stats.transform!r}")
    if not 0 < config.stats.fdr_q <= 1:
        raise ConfigInvalid("stats.fdr_q must be in (0, 1]")
