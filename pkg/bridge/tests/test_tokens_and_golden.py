import pytest

from nspbridge.golden import check, golden_requests, record
from nspbridge.models import BridgeConfig, TIERS, ModelLoadError, \
    build_model, count_parameters, load_tokenizer
from nspbridge.scoring import build_token_ids


class TestTokenLayout:
    def test_sep_and_plain_differ_on_multisentence_context(self, bridge):
        _, tokenizer, _ = bridge
        context = ["dose today.", "clinic again.", "risk sure.",
                   "tablet maybe.", "monitor well."]
        plain_ids, _ = build_token_ids(tokenizer, context, "reply.", "plain", 512)
        sep_ids, _ = build_token_ids(tokenizer, context, "reply.", "sep", 512)
        assert plain_ids != sep_ids
        sep_id = tokenizer.sep_token_id
        assert sep_ids.count(sep_id) == plain_ids.count(sep_id) + 4

    def test_single_sentence_layouts_match(self, bridge):
        _, tokenizer, _ = bridge
        plain_ids, _ = build_token_ids(tokenizer, ["only one."], "r.", "plain", 512)
        sep_ids, _ = build_token_ids(tokenizer, ["only one."], "r.", "sep", 512)
        assert plain_ids == sep_ids

    def test_type_ids_split_at_response(self, bridge):
        _, tokenizer, _ = bridge
        ids, types = build_token_ids(tokenizer, ["a.", "b.", "c.", "d.", "e."],
                                     "resp.", "plain", 512)
        assert len(ids) == len(types)
        assert types[0] == 0 and types[-1] == 1
        assert sorted(set(types)) == [0, 1]

    def test_truncation_keeps_response(self, bridge):
        _, tokenizer, _ = bridge
        long_context = ["dose " * 200] * 5
        ids, types = build_token_ids(tokenizer, long_context, "short reply.",
                                     "plain", 64)
        assert len(ids) <= 64
        resp_len = len(tokenizer.encode("short reply.",
                                        add_special_tokens=False))
        assert sum(types) == resp_len + 1


class TestGolden:
    def test_record_then_check(self, bridge_config, tmp_path):
        path = tmp_path / "golden.json"
        payload = record(bridge_config, path)
        assert len(payload["probabilities"]) == 20
        outcome = check(bridge_config, path)
        assert outcome["ok"], outcome["failures"]
        assert outcome["n_checked"] == 20

    def test_check_detects_drift(self, bridge_config, tmp_path):
        path = tmp_path / "golden.json"
        record(bridge_config, path)
        drifted = BridgeConfig(**{**bridge_config.__dict__, "seed": 99})
        outcome = check(drifted, path)
        assert not outcome["ok"]

    def test_requests_are_fixed(self):
        a = golden_requests()
        b = golden_requests()
        assert a == b
        assert len(a) == 20
        assert {r["format"] for r in a} == {"plain", "sep"}


class TestTiers:
    def test_tier_table(self):
        assert TIERS["tiny"] == (2, 128, 2, 512)
        assert TIERS["base"] == (12, 768, 12, 3072)
        assert TIERS["large"] == (24, 1024, 16, 4096)

    def test_tiny_parameter_count_scale(self, bridge):
        model, _, _ = bridge
        # 4.4M at the usual 30k vocabulary; far smaller with a test
        # vocabulary but still dominated by the two transformer blocks.
        assert 1e5 < count_parameters(model) < 2e6

    def test_unknown_tier_rejected(self, bridge_config):
        bad = BridgeConfig(**{**bridge_config.__dict__,
                              "model_source": "seeded:giga"})
        tokenizer = load_tokenizer(bridge_config)
        with pytest.raises(ModelLoadError):
            build_model(bad, tokenizer)

    def test_missing_tokenizer_rejected(self):
        with pytest.raises(ModelLoadError):
            load_tokenizer(BridgeConfig(tokenizer_path=None, corpus_path=None))
