import json

import numpy as np
import pytest

from conftest import make_dataset
from nspbridge.finetune import read_dataset, recall_at_1, sweep
from nspbridge.golden import golden_requests
from nspbridge.models import build_model, load_tokenizer
from nspbridge.scoring import score_requests


@pytest.fixture(scope="module")
def dataset_files(tmp_path_factory):
    rng = np.random.default_rng(5)
    root = tmp_path_factory.mktemp("data")
    train = make_dataset(rng, n_contexts=500, negatives=1)
    val = make_dataset(rng, n_contexts=100, negatives=9)
    paths = {}
    for name, samples in (("train", train), ("val", val)):
        path = root / f"{name}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for sample in samples:
                fh.write(json.dumps(sample) + "\n")
        paths[name] = path
    return paths


def test_two_epoch_finetune_beats_chance(bridge_config, dataset_files, tmp_path):
    result = sweep(bridge_config, dataset_files["train"], dataset_files["val"],
                   grid={"batch_sizes": (8,), "learning_rates": (5e-4,),
                         "epochs": (2,)},
                   checkpoint_dir=tmp_path / "best")
    assert len(result.rows) == 1
    recall1 = result.rows[0]["recall1"]
    # candidate sets have n=10, so chance recall@1 is 0.10
    assert recall1 > 0.2, result.rows
    assert (tmp_path / "best" / "model").exists()


def test_sweep_table_columns(bridge_config, dataset_files):
    result = sweep(bridge_config, dataset_files["train"], dataset_files["val"],
                   grid={"batch_sizes": (16,), "learning_rates": (3e-4, 1e-4),
                         "epochs": (1, 2)},
                   max_train=80, max_val=40)
    text = result.to_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "batch,lr,epoch,recall@1"
    assert len(lines) == 1 + 2 * 2
    for line in lines[1:]:
        batch, lr, epoch, recall1 = line.split(",")
        assert int(batch) == 16
        assert float(lr) in (3e-4, 1e-4)
        assert int(epoch) in (1, 2)
        assert 0.0 <= float(recall1) <= 1.0


def test_frozen_control_differs_from_finetuned(bridge_config, dataset_files):
    tokenizer = load_tokenizer(bridge_config)
    frozen = build_model(bridge_config, tokenizer)
    requests = golden_requests()
    before = score_requests(frozen, tokenizer, bridge_config, requests)

    from nspbridge.finetune import finetune_once
    train = read_dataset(dataset_files["train"])[:120]
    val = read_dataset(dataset_files["val"])[:40]
    tuned, tuned_tokenizer, _ = finetune_once(bridge_config, train, val,
                                              batch_size=16,
                                              learning_rate=3e-4, epochs=1)
    after = score_requests(tuned, tuned_tokenizer, bridge_config, requests)
    assert before != after


def test_recall_groups_by_context(bridge, dataset_files):
    model, tokenizer, config = bridge
    val = read_dataset(dataset_files["val"])[:200]
    value = recall_at_1(model, tokenizer, config, val)
    assert 0.0 <= value <= 1.0
