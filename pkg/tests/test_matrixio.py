import numpy as np
import pytest

from modalsense.matrixio import (
    load_container,
    load_snapshot_matrix,
    save_container,
    save_snapshot_matrix,
)


@pytest.mark.parametrize("ext", ["csv", "bin"])
def test_snapshot_matrix_roundtrip(tmp_path, ext):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((7, 5))
    path = tmp_path / f"series.{ext}"
    save_snapshot_matrix(path, m, dt=0.025)
    loaded, dt = load_snapshot_matrix(path)
    assert dt == 0.025
    assert np.array_equal(loaded, m) if ext == "bin" else np.allclose(loaded, m)


def test_csv_roundtrip_is_exact(tmp_path):
    # repr-formatted floats survive the text round trip bit for bit
    rng = np.random.default_rng(1)
    m = rng.standard_normal((4, 6))
    path = tmp_path / "series.csv"
    save_snapshot_matrix(path, m, dt=0.1)
    loaded, _ = load_snapshot_matrix(path)
    assert np.array_equal(loaded, m)


def test_binary_header_fields(tmp_path):
    path = tmp_path / "series.bin"
    save_snapshot_matrix(path, np.ones((3, 2)), dt=0.5)
    raw = path.read_bytes()
    assert raw[:4] == b"FSNP"
    loaded, dt = load_snapshot_matrix(path)
    assert loaded.shape == (3, 2) and dt == 0.5


def test_snapshot_matrix_rejects_bad_input(tmp_path):
    with pytest.raises(ValueError):
        save_snapshot_matrix(tmp_path / "x.bin", np.zeros((0, 3)), dt=0.1)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ValueError):
        load_snapshot_matrix(bad)


def test_container_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    arrays = {
        "real_mat": rng.standard_normal((5, 3)),
        "complex_mat": rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)),
        "vector": rng.standard_normal(6),
    }
    meta = {"kind": "test", "rank": 3, "dt": 0.01}
    path = tmp_path / "state.msc"
    save_container(path, meta, arrays)
    meta2, arrays2 = load_container(path)
    assert meta2 == meta
    assert np.array_equal(arrays2["real_mat"], arrays["real_mat"])
    assert np.array_equal(arrays2["complex_mat"], arrays["complex_mat"])
    assert np.array_equal(arrays2["vector"].ravel(), arrays["vector"])


def test_container_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bogus"
    path.write_bytes(b"XXXX" + b"\x00" * 16)
    with pytest.raises(ValueError):
        load_container(path)
