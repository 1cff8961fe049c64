import numpy as np
import pytest

from parasketch.io import (
    atomic_write_text,
    format_float,
    load_matrix,
    load_snapshots,
    matrix_to_csv,
    save_matrix,
    save_snapshots,
)


def test_matrix_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(17)
    cases = [
        rng.standard_normal((5, 3)),
        rng.standard_normal((1, 1)),
        np.array([[1e-300, 1e300], [-1e-300, -1.0], [0.0, np.pi]]),
        np.array([[np.nextafter(1.0, 2.0), np.finfo(float).tiny]]),
    ]
    for j, a in enumerate(cases):
        path = tmp_path / f"m{j}.csv"
        save_matrix(path, a)
        back = load_matrix(path)
        assert np.array_equal(back, a), f"case {j} not bit-exact"


def test_format_float_17_digits():
    x = 0.1 + 0.2
    assert float(format_float(x)) == x
    assert format_float(1.0) == "1"


def test_load_matrix_errors(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2\n3\n")
    with pytest.raises(ValueError, match="ragged"):
        load_matrix(ragged)

    empty = tmp_path / "empty.csv"
    empty.write_text("\n\n")
    with pytest.raises(ValueError, match="empty"):
        load_matrix(empty)

    bad = tmp_path / "bad.csv"
    bad.write_text("1,spam\n")
    with pytest.raises(ValueError, match="bad.csv:1"):
        load_matrix(bad)

    with pytest.raises(FileNotFoundError):
        load_matrix(tmp_path / "nope.csv")


def test_load_matrix_skips_blank_lines(tmp_path):
    path = tmp_path / "gaps.csv"
    path.write_text("1,2\n\n3,4\n")
    assert np.array_equal(load_matrix(path), np.array([[1.0, 2.0], [3.0, 4.0]]))


def test_matrix_to_csv_shape():
    text = matrix_to_csv(np.array([[1.5, -2.0], [0.25, 3.0]]))
    assert text == "1.5,-2\n0.25,3\n"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    atomic_write_text(target, "hello\n")
    assert target.read_text() == "hello\n"
    atomic_write_text(target, "replaced\n")
    assert target.read_text() == "replaced\n"
    leftovers = [p for p in target.parent.iterdir() if p.name != "out.txt"]
    assert leftovers == []


def test_snapshot_manifest_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    ts = [0.0, 0.25, 1.0]
    mats = [rng.standard_normal((4, 2)) for _ in ts]
    manifest = tmp_path / "snaps" / "family.txt"
    save_snapshots(manifest, ts, mats)
    assert (tmp_path / "snaps" / "family_0000.csv").exists()

    back_ts, back_mats = load_snapshots(manifest)
    assert back_ts == ts
    for a, b in zip(mats, back_mats):
        assert np.array_equal(a, b)


def test_load_snapshots_errors(tmp_path):
    manifest = tmp_path / "m.txt"
    manifest.write_text("\n")
    with pytest.raises(ValueError, match="empty"):
        load_snapshots(manifest)
    manifest.write_text("0.5\n")
    with pytest.raises(ValueError, match="t,path"):
        load_snapshots(manifest)
