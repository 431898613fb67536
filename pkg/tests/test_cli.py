import hashlib
import json
from pathlib import Path

import pytest

from cellbloom.cli import main


def tree_digest(root: Path, skip: tuple[str, ...] = ()) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name not in skip:
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_synth_data_twice_is_byte_identical(tmp_path, capsys):
    args = ["synth-data", "--per-class", "3", "--size", "16", "--seed", "7"]
    # same invocation twice overwrites with identical bytes
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    first = tree_digest(tmp_path / "a")
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert tree_digest(tmp_path / "a") == first
    # the data itself is destination-independent (run config records --out)
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert tree_digest(tmp_path / "b", skip=("run_config.json",)) == tree_digest(
        tmp_path / "a", skip=("run_config.json",)
    )
    assert (tmp_path / "a" / "cells.manifest.jsonl").exists()
    assert (tmp_path / "a" / "flowers.manifest.jsonl").exists()


def test_every_artifact_dir_records_its_run_config(tmp_path):
    main(["synth-data", "--per-class", "2", "--size", "16", "--seed", "1",
          "--out", str(tmp_path / "d")])
    doc = json.loads((tmp_path / "d" / "run_config.json").read_text())
    assert doc["command"] == "synth-data"
    assert doc["params"]["per_class"] == 2
    assert doc["params"]["seed"] == 1


def test_unknown_flag_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["synth-data", "--frobnicate", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_missing_input_is_a_runtime_error(tmp_path, capsys):
    rc = main(["split", "--manifest", str(tmp_path / "ghost.jsonl"),
               "--out", str(tmp_path / "o.jsonl"), "--seed", "1"])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.splitlines()[-1].startswith("error: ")


def test_config_file_supplies_defaults_and_flags_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"per_class": 4, "size": 16, "seed": 9}))
    main(["--config", str(cfg), "synth-data", "--out", str(tmp_path / "a")])
    header = json.loads((tmp_path / "a" / "cells.manifest.jsonl").read_text().splitlines()[0])
    assert header["census"]["neutrophil"] == 4
    # explicit flag wins over the config file
    main(["--config", str(cfg), "synth-data", "--per-class", "2", "--out", str(tmp_path / "b")])
    header = json.loads((tmp_path / "b" / "cells.manifest.jsonl").read_text().splitlines()[0])
    assert header["census"]["neutrophil"] == 2


@pytest.fixture(scope="module")
def synth_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_tree")
    main(["synth-data", "--per-class", "10", "--size", "16", "--seed", "5",
          "--out", str(root)])
    main(["split", "--manifest", str(root / "cells.manifest.jsonl"),
          "--out", str(root / "cells.split.jsonl"), "--seed", "5"])
    main(["split", "--manifest", str(root / "flowers.manifest.jsonl"),
          "--out", str(root / "flowers.split.jsonl"), "--seed", "5"])
    return root


def test_split_and_oversample_round_trip(synth_tree):
    rc = main(["oversample", "--manifest", str(synth_tree / "cells.split.jsonl"),
               "--out", str(synth_tree / "cells.os.jsonl"), "--floor", "12", "--seed", "5"])
    assert rc == 0
    from cellbloom.manifest import DatasetManifest

    m = DatasetManifest.load(synth_tree / "cells.os.jsonl")
    assert all(v == 12 for v in m.split_census("train").values())


def test_train_transfer_routes_the_named_pair(synth_tree):
    rc = main([
        "train-transfer", "--pair", "mast_cell",
        "--cells", str(synth_tree / "cells.split.jsonl"),
        "--flowers", str(synth_tree / "flowers.split.jsonl"),
        "--out", str(synth_tree / "ckpt"),
        "--epochs", "1", "--image-size", "16", "--batch-size", "4",
        "--width", "4", "--blocks", "1", "--disc-layers", "1", "--seed", "3",
    ])
    assert rc == 0
    cfg = json.loads((synth_tree / "ckpt" / "mast_cell" / "config.json").read_text())
    assert cfg["config"]["pair"] == ["mast_cell", "daisy"]
    assert (synth_tree / "ckpt" / "mast_cell" / "history.csv").exists()


def test_end_to_end_identity_experiment_and_tasks(synth_tree, tmp_path, capsys):
    rc = main(["train-classifier",
               "--manifest", str(synth_tree / "cells.split.jsonl"),
               "--out", str(synth_tree / "model"),
               "--epochs", "1", "--image-size", "16", "--batch-size", "16",
               "--seed", "2", "--no-augment"])
    assert rc == 0

    rc = main(["run-experiment",
               "--cells", str(synth_tree / "cells.split.jsonl"),
               "--checkpoints", str(synth_tree / "nonexistent"), "--identity",
               "--model", str(synth_tree / "model"),
               "--out", str(synth_tree / "exp"), "--heatmaps"])
    assert rc == 0
    report = json.loads((synth_tree / "exp" / "report.json").read_text())
    assert report["cm_real"] == report["cm_reconstructed"]
    assert (synth_tree / "exp" / "confusion_real.png").exists()

    rc = main(["make-tasks",
               "--cells", str(synth_tree / "cells.split.jsonl"),
               "--checkpoints", str(synth_tree / "nonexistent"), "--identity",
               "--split", "test",
               "--out", str(tmp_path / "svc"), "--required", "1"])
    assert rc == 0
    tasks = json.loads((tmp_path / "svc" / "tasks.json").read_text())["tasks"]
    assert len(tasks) == 7  # one test record per class at per-class 6

    from cellbloom.bloomserve import AnnotationStore

    store = AnnotationStore(tmp_path / "svc")
    for t in store.tasks():
        store.submit(t.task_id, "cli-annotator", "buttercup")
    rc = main(["export-labels", "--data-dir", str(tmp_path / "svc"),
               "--out", str(tmp_path / "labels.jsonl")])
    assert rc == 0
    lines = (tmp_path / "labels.jsonl").read_text().strip().splitlines()
    assert len(lines) == 8  # header + 7 rows


def test_evaluate_subcommand_writes_report(synth_tree):
    rc = main(["evaluate", "--model", str(synth_tree / "model"),
               "--manifest", str(synth_tree / "cells.split.jsonl"),
               "--split", "test", "--tag", "real",
               "--out", str(synth_tree / "eval")])
    assert rc == 0
    doc = json.loads((synth_tree / "eval" / "evaluation_real.json").read_text())
    assert doc["dataset_tag"] == "real"
