"""JSONL dataset round trips and parse failure reporting."""

import pytest

from triloc.errors import DatasetParseError
from triloc.scenegen import (
    WorldConfig,
    generate_world,
    read_dataset,
    write_dataset,
)


@pytest.fixture(scope="module")
def world():
    return generate_world(WorldConfig(num_scenes=12, seed=1))


def test_round_trip_structural_equality(world, tmp_path):
    path = tmp_path / "scenes.jsonl"
    write_dataset(world, path)
    back = read_dataset(path)
    assert back == world


def test_same_seed_byte_identical(tmp_path):
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_dataset(generate_world(WorldConfig(num_scenes=10, seed=5)), p1)
    write_dataset(generate_world(WorldConfig(num_scenes=10, seed=5)), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_empty_dataset_round_trip(tmp_path):
    path = tmp_path / "empty.jsonl"
    write_dataset([], path)
    assert path.read_text() == ""
    assert read_dataset(path) == []


def test_truncated_file_names_line(world, tmp_path):
    path = tmp_path / "scenes.jsonl"
    write_dataset(world, path)
    text = path.read_text()
    lines = text.splitlines(keepends=True)
    broken = "".join(lines[:2]) + lines[2][: len(lines[2]) // 2]
    path.write_text(broken)
    with pytest.raises(DatasetParseError) as exc:
        read_dataset(path)
    assert exc.value.line == 3
    assert "line 3" in str(exc.value)


def test_malformed_record_names_line(world, tmp_path):
    path = tmp_path / "scenes.jsonl"
    write_dataset(world[:3], path)
    lines = path.read_text().splitlines()
    lines[1] = lines[1].replace('"scene_id"', '"wrong_key"', 1)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetParseError) as exc:
        read_dataset(path)
    assert exc.value.line == 2


def test_float_precision_17_sig_digits(world, tmp_path):
    path = tmp_path / "scenes.jsonl"
    write_dataset(world, path)
    back = read_dataset(path)
    for orig, loaded in zip(world, back):
        assert loaded.location == orig.location  # exact, not approximate
        for ro, rl in zip(orig.instances, loaded.instances):
            assert rl.stub_text_vec == ro.stub_text_vec
            assert rl.instance3d.points == ro.instance3d.points
