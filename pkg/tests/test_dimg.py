import threading

import numpy as np
import pytest

from moldkit.dimg import (
    DONE_NAME,
    ERROR_NAME,
    REQUEST_NAME,
    RESPONSE_NAME,
    read_dimg,
    request_prediction,
    respond_once,
    write_dimg,
)
from moldkit.errors import ConfigError, PredictorUnavailableError


def test_roundtrip(tmp_path):
    frames = np.random.default_rng(0).uniform(size=(5, 7, 9))
    path = tmp_path / "x.dimg"
    write_dimg(path, frames)
    np.testing.assert_array_equal(read_dimg(path), frames)


def test_single_frame_promotion(tmp_path):
    frame = np.ones((3, 4))
    path = tmp_path / "one.dimg"
    write_dimg(path, frame)
    out = read_dimg(path)
    assert out.shape == (1, 3, 4)


def test_header_bytes(tmp_path):
    path = tmp_path / "h.dimg"
    write_dimg(path, np.zeros((2, 3, 5)))
    raw = path.read_bytes()
    assert raw[:4] == b"DIMG"
    assert int.from_bytes(raw[4:6], "little") == 1
    assert int.from_bytes(raw[6:10], "little") == 2
    assert int.from_bytes(raw[10:14], "little") == 3
    assert int.from_bytes(raw[14:18], "little") == 5
    assert len(raw) == 18 + 2 * 3 * 5 * 8


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.dimg"
    write_dimg(path, np.zeros((1, 2, 2)))
    raw = bytearray(path.read_bytes())
    raw[:4] = b"GMID"
    path.write_bytes(bytes(raw))
    with pytest.raises(ConfigError):
        read_dimg(path)


def test_rejects_truncated(tmp_path):
    path = tmp_path / "t.dimg"
    write_dimg(path, np.zeros((1, 4, 4)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ConfigError):
        read_dimg(path)


def test_exchange_roundtrip(tmp_path):
    batch = np.random.default_rng(1).uniform(size=(10, 6, 8))
    server = threading.Thread(target=respond_once, args=(tmp_path, lambda b: b * 0.5), kwargs={"timeout": 10.0})
    server.start()
    try:
        resp = request_prediction(tmp_path, batch, timeout=10.0)
    finally:
        server.join()
    np.testing.assert_allclose(resp, batch * 0.5)
    # The protocol cleans up after itself.
    for name in (REQUEST_NAME, RESPONSE_NAME, DONE_NAME, ERROR_NAME):
        assert not (tmp_path / name).exists()


def test_exchange_timeout(tmp_path):
    with pytest.raises(PredictorUnavailableError):
        request_prediction(tmp_path, np.zeros((1, 2, 2)), timeout=0.1, poll=0.01)


def test_exchange_server_error_surfaces(tmp_path):
    def boom(_):
        raise ValueError("no good")

    server = threading.Thread(target=respond_once, args=(tmp_path, boom), kwargs={"timeout": 10.0})
    server.start()
    try:
        with pytest.raises(PredictorUnavailableError, match="no good"):
            request_prediction(tmp_path, np.zeros((1, 2, 2)), timeout=10.0)
    finally:
        server.join()


def test_exchange_missing_dir():
    with pytest.raises(PredictorUnavailableError):
        request_prediction("/nonexistent/exchange", np.zeros((1, 2, 2)))


def test_respond_once_corrupt_request(tmp_path):
    (tmp_path / REQUEST_NAME).write_bytes(b"not a dimg at all")
    assert respond_once(tmp_path, lambda b: b, timeout=1.0)
    assert (tmp_path / ERROR_NAME).exists()
