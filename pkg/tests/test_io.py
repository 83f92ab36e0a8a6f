import json
import math
import os

import numpy as np
import pytest

import utils.io as io_mod
from utils.io import ArtifactSet, atomic_write_text, csv_text, json_text, plain, sha256_file


def test_plain_converts_numpy_and_non_finite():
    data = {"a": np.arange(3), "b": np.float64(1.5), 2: (np.int64(4), math.inf)}
    assert plain(data) == {"a": [0, 1, 2], "b": 1.5, "2": [4, "inf"]}


def test_json_text_is_deterministic():
    one = json_text({"b": 1.0, "a": np.array([0.1, 0.2])})
    two = json_text({"a": [0.1, 0.2], "b": 1.0})
    assert one == two
    assert one.endswith("\n")
    assert list(json.loads(one)) == ["a", "b"]


def test_csv_text_keeps_full_precision():
    text = csv_text(["x", "y", "z"], [[0.1 + 0.2, None, 3]])
    assert text == "x,y,z\n0.30000000000000004,,3\n"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    atomic_write_text(target, "hello\n")
    atomic_write_text(target, "again\n")
    assert target.read_text(encoding="utf-8") == "again\n"
    assert os.listdir(target.parent) == ["out.txt"]


def test_artifact_set_commit(tmp_path):
    out = tmp_path / "run"
    arts = ArtifactSet(out)
    arts.add_json("b.json", {"x": 1})
    arts.add_csv("a.csv", ["t"], [[0.5]])
    with pytest.raises(ValueError):
        arts.add_text("a.csv", "dup")
    digests = arts.commit()
    assert [d["path"] for d in digests] == ["a.csv", "b.json"]
    for d in digests:
        assert sha256_file(out / d["path"]) == d["sha256"]
    assert sorted(os.listdir(tmp_path)) == ["run"]


def test_artifact_set_failure_leaves_nothing(tmp_path, monkeypatch):
    out = tmp_path / "run"
    real_replace = os.replace

    def flaky(src, dst):
        if os.path.dirname(str(dst)) == str(out) and str(dst).endswith("b.json"):
            raise OSError("disk full")
        return real_replace(src, dst)

    monkeypatch.setattr(io_mod.os, "replace", flaky)
    arts = ArtifactSet(out)
    arts.add_text("a.json", "{}\n")
    arts.add_text("b.json", "{}\n")
    with pytest.raises(OSError):
        arts.commit()
    assert not (out / "a.json").exists()
    assert not (out / "b.json").exists()
    assert not [p for p in os.listdir(tmp_path) if p.startswith(".stage-")]
