import json
import zipfile

import numpy as np
import pytest

from posesynth.container import load_container, save_container
from posesynth.errors import LoadError


def test_round_trip(tmp_path):
    path = tmp_path / "c.zip"
    arrays = {
        "a": np.arange(12, dtype=np.float64).reshape(3, 4),
        "b": np.array([1, -1, 7], dtype=np.int64),
    }
    save_container(path, arrays, meta={"note": "x"})
    loaded, meta = load_container(path)
    assert meta == {"note": "x"}
    for name in arrays:
        assert loaded[name].dtype == arrays[name].dtype
        assert np.array_equal(loaded[name], arrays[name])


def test_missing_file():
    with pytest.raises(LoadError, match="cannot open"):
        load_container("/nonexistent/container.zip")


def test_not_a_zip(tmp_path):
    path = tmp_path / "junk.zip"
    path.write_bytes(b"not a zip")
    with pytest.raises(LoadError):
        load_container(path)


def test_missing_manifest(tmp_path):
    path = tmp_path / "c.zip"
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("a", b"\x00" * 8)
    with pytest.raises(LoadError, match="manifest"):
        load_container(path)


def test_missing_array_entry(tmp_path):
    path = tmp_path / "c.zip"
    manifest = {"format": "array-container/1",
                "arrays": {"a": {"shape": [1], "dtype": "<f8"}}, "meta": {}}
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("manifest.json", json.dumps(manifest))
    with pytest.raises(LoadError, match="missing array entry"):
        load_container(path)


def test_byte_count_mismatch(tmp_path):
    path = tmp_path / "c.zip"
    manifest = {"format": "array-container/1",
                "arrays": {"a": {"shape": [4], "dtype": "<f8"}}, "meta": {}}
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("manifest.json", json.dumps(manifest))
        zf.writestr("a", b"\x00" * 8)  # one value, manifest says four
    with pytest.raises(LoadError, match="expected 32"):
        load_container(path)


def test_manifest_is_single_line(tmp_path):
    path = tmp_path / "c.zip"
    save_container(path, {"a": np.zeros(2)}, meta={"k": 1})
    with zipfile.ZipFile(path) as zf:
        raw = zf.read("manifest.json").decode()
    assert "\n" not in raw.strip()
