import numpy as np
import pytest

from condips.errors import ConfigError
from condips.io import read_csv, read_meta, read_snapshot, write_csv, write_meta, write_profile, write_snapshot
from condips.meanfield import load_profile, poisson_profile


def test_csv_round_trip(tmp_path):
    x = np.random.default_rng(0).normal(size=7)
    path = write_csv(tmp_path / "a" / "x.csv", ["i", "x", "flag", "blank"],
                     ((i, v, i % 2 == 0, "") for i, v in enumerate(x)))
    cols = read_csv(path)
    np.testing.assert_array_equal(cols["i"], np.arange(7))
    np.testing.assert_array_equal(cols["x"], x)
    assert cols["i"].dtype == np.int64
    np.testing.assert_array_equal(cols["flag"], [1, 0, 1, 0, 1, 0, 1])
    assert np.all(np.isnan(cols["blank"]))


def test_empty_csv(tmp_path):
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(ConfigError):
        read_csv(tmp_path / "e.csv")


def test_profile_round_trip(tmp_path):
    f = poisson_profile(1.5)
    np.testing.assert_array_equal(load_profile(write_profile(tmp_path / "f0.csv", f)), f)


def test_snapshot_round_trip(tmp_path):
    times = np.array([0.0, 0.5, 1.0])
    counts = np.array([[3, 0, 1, 0], [2, 2, 0, 0], [3, 1, 0, 1]])
    header = {"L": 4, "N": 4, "seed": 12}
    h, t, c = read_snapshot(write_snapshot(tmp_path / "s.csv", times, counts, header))
    assert h == header
    np.testing.assert_array_equal(t, times)
    np.testing.assert_array_equal(c, counts)
    (tmp_path / "bad.csv").write_text("t,k,count\n")
    with pytest.raises(ConfigError):
        read_snapshot(tmp_path / "bad.csv")


def test_meta(tmp_path):
    path = write_meta(tmp_path / "meta.json", {"x": 1}, started=0.0)
    meta = read_meta(path)
    assert meta["x"] == 1 and "numpy" in meta and meta["wall_seconds"] > 0
