import numpy as np
import pytest

from tvprox.io import (
    FormatError,
    read_array,
    read_csv,
    read_matrix_csv,
    read_pgm,
    read_tvt,
    write_array,
    write_csv,
    write_pgm,
    write_tvt,
)


def test_csv_round_trip(tmp_path, rng):
    x = rng.normal(size=17)
    write_csv(tmp_path / "x.csv", x)
    np.testing.assert_array_equal(read_csv(tmp_path / "x.csv"), x)


def test_csv_errors(tmp_path):
    (tmp_path / "two.csv").write_text("1,2\n3,4\n")
    (tmp_path / "nan.csv").write_text("1\nnan\n")
    (tmp_path / "text.csv").write_text("1\nabc\n")
    (tmp_path / "empty.csv").write_text("")
    for name in ("two", "nan", "text", "empty", "missing"):
        with pytest.raises(FormatError):
            read_csv(tmp_path / f"{name}.csv")


def test_csv_comments(tmp_path):
    (tmp_path / "c.csv").write_text("# header\n1.5\n-2\n")
    np.testing.assert_array_equal(read_csv(tmp_path / "c.csv"), [1.5, -2.0])


def test_matrix_csv(tmp_path):
    (tmp_path / "m.csv").write_text("1,2,3\n4,5,6\n")
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "m.csv"), [[1, 2, 3], [4, 5, 6]])


def test_pgm_p2_with_comments(tmp_path):
    (tmp_path / "a.pgm").write_bytes(b"P2\n# a comment\n3 2\n# another\n4\n0 1 2\n3 4 0\n")
    img = read_pgm(tmp_path / "a.pgm")
    np.testing.assert_allclose(img, [[0, 0.25, 0.5], [0.75, 1, 0]])
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm", normalize=False), [[0, 1, 2], [3, 4, 0]])


def test_pgm_p5_8bit(tmp_path):
    (tmp_path / "b.pgm").write_bytes(b"P5 2 2 255\n" + bytes([0, 255, 51, 102]))
    np.testing.assert_allclose(read_pgm(tmp_path / "b.pgm"), [[0, 1], [0.2, 0.4]])


def test_pgm_p5_16bit_big_endian(tmp_path):
    raw = np.array([0, 1000, 65535, 256], dtype=">u2").tobytes()
    (tmp_path / "c.pgm").write_bytes(b"P5\n2 2\n65535\n" + raw)
    np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm", normalize=False), [[0, 1000], [65535, 256]])


@pytest.mark.parametrize("maxval", [1, 255, 4095, 65535])
@pytest.mark.parametrize("binary", [True, False])
def test_pgm_round_trip_half_step(tmp_path, rng, maxval, binary):
    img = rng.uniform(0, 1, size=(5, 7))
    write_pgm(tmp_path / "r.pgm", img, maxval=maxval, binary=binary)
    back = read_pgm(tmp_path / "r.pgm")
    assert np.max(np.abs(back - img)) <= 0.5 / maxval + 1e-15


def test_pgm_errors(tmp_path):
    cases = {
        "magic": b"P6\n1 1\n255\n\x00\x00\x00",
        "trunc": b"P5\n4 4\n255\n\x00",
        "header": b"P2\n3",
        "maxval": b"P2\n1 1\n70000\n5\n",
        "sample": b"P2\n1 1\n10\n11\n",
        "dims": b"P2\n0 1\n10\n",
        "text": b"P2\n1 1\n10\nxx\n",
    }
    for name, data in cases.items():
        (tmp_path / f"{name}.pgm").write_bytes(data)
        with pytest.raises(FormatError):
            read_pgm(tmp_path / f"{name}.pgm")
    with pytest.raises(FormatError):
        write_pgm(tmp_path / "x.pgm", np.zeros(3))


@pytest.mark.parametrize("shape", [(5,), (3, 4), (2, 3, 4), (1, 1, 1, 2)])
def test_tvt_round_trip(tmp_path, rng, shape):
    X = rng.normal(size=shape)
    write_tvt(tmp_path / "t.tvt", X)
    back = read_tvt(tmp_path / "t.tvt")
    assert back.shape == shape
    np.testing.assert_array_equal(back, X)


def test_tvt_layout(tmp_path):
    write_tvt(tmp_path / "t.tvt", np.array([[1.0, 2.0]]))
    raw = (tmp_path / "t.tvt").read_bytes()
    assert raw[:4] == b"TVT1"
    assert raw[4:16] == b"\x02\x00\x00\x00\x01\x00\x00\x00\x02\x00\x00\x00"
    assert np.frombuffer(raw[16:], "<f8").tolist() == [1.0, 2.0]


def test_tvt_errors(tmp_path):
    good = b"TVT1" + np.array([1, 2], "<u4").tobytes()
    cases = {
        "magic": b"TVT2" + good[4:] + b"\x00" * 16,
        "short": good + b"\x00" * 8,
        "long": good + b"\x00" * 24,
        "axes": b"TVT1" + np.array([0], "<u4").tobytes(),
        "zero": b"TVT1" + np.array([1, 0], "<u4").tobytes(),
        "tiny": b"TVT1",
    }
    for name, data in cases.items():
        (tmp_path / f"{name}.tvt").write_bytes(data)
        with pytest.raises(FormatError):
            read_tvt(tmp_path / f"{name}.tvt")


def test_dispatch(tmp_path, rng):
    X = rng.uniform(size=(3, 3))
    for ext in (".tvt", ".csv"):
        write_array(tmp_path / f"a{ext}", X)
    np.testing.assert_array_equal(read_array(tmp_path / "a.tvt"), X)
    np.testing.assert_array_equal(read_array(tmp_path / "a.csv"), X.ravel())
    write_array(tmp_path / "a.pgm", X)
    assert read_array(tmp_path / "a.pgm").shape == (3, 3)
