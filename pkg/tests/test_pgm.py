import numpy as np
import pytest

from moldkit.camera import CameraIntrinsics, DepthImage
from moldkit.errors import ConfigError
from moldkit.pgm import read_pgm, write_pgm


def intr16():
    return CameraIntrinsics(width=21, height=13, u0=10.0, v0=7.0, fx=30.0, fy=28.0)


def test_roundtrip_16bit(tmp_path):
    intr = intr16()
    rng = np.random.default_rng(1)
    img = DepthImage(intr, rng.integers(0, 65536, size=(13, 21)))
    path = tmp_path / "img.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    assert back.intrinsics == intr
    np.testing.assert_array_equal(back.pixels, img.pixels)


def test_roundtrip_8bit(tmp_path):
    intr = CameraIntrinsics(width=5, height=4, u0=3.0, v0=2.0, fx=8.0, fy=8.0, bit_depth=8)
    img = DepthImage(intr, np.arange(20).reshape(4, 5))
    path = tmp_path / "img8.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    assert back.intrinsics.bit_depth == 8
    np.testing.assert_array_equal(back.pixels, img.pixels)


def test_header_layout(tmp_path):
    intr = intr16()
    img = DepthImage(intr, np.zeros((13, 21), dtype=np.uint16))
    path = tmp_path / "img.pgm"
    write_pgm(path, img)
    raw = path.read_bytes()
    lines = raw.split(b"\n", 4)
    assert lines[0] == b"P5"
    assert lines[1].startswith(b"# {")
    assert lines[2] == b"21 13"
    assert lines[3] == b"65535"
    assert len(lines[4]) == 21 * 13 * 2


def test_big_endian_samples(tmp_path):
    intr = CameraIntrinsics(width=1, height=1, u0=1.0, v0=1.0, fx=5.0, fy=5.0)
    img = DepthImage(intr, np.array([[0x0102]]))
    path = tmp_path / "one.pgm"
    write_pgm(path, img)
    assert path.read_bytes()[-2:] == b"\x01\x02"


def test_determinism(tmp_path):
    intr = intr16()
    img = DepthImage(intr, np.random.default_rng(2).integers(0, 65536, size=(13, 21)))
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    write_pgm(a, img)
    write_pgm(b, img)
    assert a.read_bytes() == b.read_bytes()


def test_rejects_missing_intrinsics(tmp_path):
    path = tmp_path / "bare.pgm"
    path.write_bytes(b"P5\n4 2\n255\n" + bytes(8))
    with pytest.raises(ConfigError):
        read_pgm(path)


def test_rejects_wrong_magic(tmp_path):
    path = tmp_path / "p2.pgm"
    path.write_bytes(b"P2\n# {}\n2 2\n255\n0 0 0 0\n")
    with pytest.raises(ConfigError):
        read_pgm(path)


def test_rejects_truncated_data(tmp_path):
    intr = intr16()
    img = DepthImage(intr, np.zeros((13, 21), dtype=np.uint16))
    path = tmp_path / "img.pgm"
    write_pgm(path, img)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(ConfigError):
        read_pgm(path)


def test_rejects_maxval_bitdepth_mismatch(tmp_path):
    path = tmp_path / "bad.pgm"
    meta = b'# {"u0": 1.0, "v0": 1.0, "fx": 5.0, "fy": 5.0, "z_min": 0.3, "z_max": 0.7, "b": 16}'
    path.write_bytes(b"P5\n" + meta + b"\n2 2\n255\n" + bytes(4))
    with pytest.raises(ConfigError):
        read_pgm(path)
