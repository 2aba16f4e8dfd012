"""CLI flows, flag overrides, and exit codes."""

import hashlib
import json

import pytest

from triloc.cli import main

TINY_CONFIG = {
    "version": 1,
    "world": {"num_scenes": 30, "seed": 17, "stub_dim": 16},
    "train": {
        "d": 16,
        "epochs_instance": 1,
        "epochs_scene": 1,
        "batch_instance": 64,
        "batch_scene": 16,
        "seed": 2,
    },
    "eval": {"d": 20, "ks": [1, 3, 5], "hints": 6},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(TINY_CONFIG))
    data_path = root / "data.jsonl"
    assert main(["generate", "--config", str(cfg_path),
                 "--out", str(data_path)]) == 0
    return root, cfg_path, data_path


@pytest.fixture(scope="module")
def trained(workdir):
    root, cfg_path, data_path = workdir
    out = root / "run"
    assert main(["train", "--config", str(cfg_path), "--dataset",
                 str(data_path), "--out", str(out)]) == 0
    return out


def test_generate_outputs(workdir):
    root, _, data_path = workdir
    assert data_path.exists()
    meta = json.loads((root / "data.jsonl.meta.json").read_text())
    counts = meta["split_counts"]
    assert counts["train"] + counts["val"] + counts["test"] == 30
    assert meta["config"]["world"]["seed"] == 17


def test_generate_same_seed_same_hash(workdir, tmp_path):
    _, cfg_path, data_path = workdir
    other = tmp_path / "again.jsonl"
    assert main(["generate", "--config", str(cfg_path),
                 "--out", str(other)]) == 0
    h1 = hashlib.sha256(data_path.read_bytes()).hexdigest()
    h2 = hashlib.sha256(other.read_bytes()).hexdigest()
    assert h1 == h2


def test_generate_unknown_key_exits_2(tmp_path, capsys):
    cfg = dict(TINY_CONFIG)
    cfg["world"] = dict(cfg["world"], num_scnes=5)  # typo on purpose
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    code = main(["generate", "--config", str(path),
                 "--out", str(tmp_path / "x.jsonl")])
    assert code == 2
    assert "num_scnes" in capsys.readouterr().err


def test_generate_infeasible_world_exits_3(tmp_path):
    cfg = dict(TINY_CONFIG)
    cfg["world"] = {"num_scenes": 100000, "area_extent": 200.0}
    path = tmp_path / "big.json"
    path.write_text(json.dumps(cfg))
    assert main(["generate", "--config", str(path),
                 "--out", str(tmp_path / "x.jsonl")]) == 3


def test_train_writes_checkpoints_and_log(trained):
    for name in ("instance_it", "instance_ip", "scene"):
        assert (trained / f"{name}.ckpt").exists()
        sidecar = json.loads((trained / f"{name}.ckpt.json").read_text())
        assert sidecar["config"]["d"] == 16
    log_lines = (trained / "training_log.jsonl").read_text().splitlines()
    assert len(log_lines) == 3  # one record per epoch per stage


def test_train_missing_dataset_exits_3(workdir, tmp_path):
    _, cfg_path, _ = workdir
    code = main(["train", "--config", str(cfg_path), "--dataset",
                 str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "o")])
    assert code == 3


def test_train_flag_overrides_reach_checkpoint(workdir, tmp_path):
    root, cfg_path, data_path = workdir
    out = tmp_path / "ablated"
    assert main(["train", "--config", str(cfg_path), "--dataset",
                 str(data_path), "--out", str(out), "--stage", "scene",
                 "--no-pretrain", "--pool", "max", "--no-uv"]) == 0
    sidecar = json.loads((out / "scene.ckpt.json").read_text())
    assert sidecar["config"]["pool"] == "max"
    assert sidecar["config"]["use_uv"] is False
    assert not (out / "instance_it.ckpt").exists()


def test_eval_report_schema(workdir, trained, tmp_path):
    _, _, data_path = workdir
    out = tmp_path / "report.json"
    assert main(["eval", "--checkpoint", str(trained / "scene.ckpt"),
                 "--dataset", str(data_path), "--out", str(out),
                 "--split", "test", "--d", "20", "--ks", "1,3,5",
                 "--hints", "6"]) == 0
    payload = json.loads(out.read_text())
    assert set(payload["reports"]) == {"T2I", "I2T", "T2P", "P2T", "I2P",
                                       "P2I", "I2I", "P2P"}
    assert payload["eval_config"]["hints"] == 6
    assert payload["train_config"]["d"] == 16
    for rep in payload["reports"].values():
        ks = [int(k) for k in rep["recalls"]]
        assert ks == sorted(ks)
    assert 0.0 <= payload["average_cross_r1"] <= 1.0


def test_eval_monotone_in_d(workdir, trained, tmp_path):
    _, _, data_path = workdir
    wide, tight = tmp_path / "w.json", tmp_path / "t.json"
    for out, d in ((wide, "20"), (tight, "2")):
        assert main(["eval", "--checkpoint", str(trained / "scene.ckpt"),
                     "--dataset", str(data_path), "--out", str(out),
                     "--split", "test", "--d", d]) == 0
    w = json.loads(wide.read_text())["reports"]
    t = json.loads(tight.read_text())["reports"]
    for task in ("I2P", "P2I", "I2I", "P2P"):
        for k in ("1", "3", "5"):
            assert w[task]["recalls"][k] >= t[task]["recalls"][k]


def test_eval_incompatible_checkpoint_exits_5(workdir, tmp_path):
    _, _, data_path = workdir
    bogus = tmp_path / "bogus.ckpt"
    bogus.write_bytes(b"ULOC" + b"\x00\x00\x00\x01")
    (tmp_path / "bogus.ckpt.json").write_text(
        json.dumps({"config": {"d": 16}, "epoch": 0, "stage": "scene"})
    )
    code = main(["eval", "--checkpoint", str(bogus), "--dataset",
                 str(data_path), "--out", str(tmp_path / "r.json")])
    assert code == 5


def test_embed_dump(workdir, trained, tmp_path):
    _, _, data_path = workdir
    out = tmp_path / "emb.csv"
    assert main(["embed-dump", "--checkpoint", str(trained / "scene.ckpt"),
                 "--dataset", str(data_path), "--out", str(out),
                 "--split", "test"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("sceneId,modality,x,y,v_0")
    assert len(lines) > 1


def test_bench_runs_quickly():
    assert main(["bench", "--scale", "0.02"]) == 0


def test_gradcheck_command():
    assert main(["gradcheck", "--seed", "3", "--max-entries", "2"]) == 0
