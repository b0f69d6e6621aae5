"""Binary PGM (P5) reader/writer for depth images.

The container is standard binary PGM with maxval 2^b - 1 and big-endian
two-byte samples whenever b > 8.  One comment line right after the magic
carries the camera intrinsics as JSON:

    P5
    # {"u0": 424.0, "v0": 240.0, "fx": 415.0, "fy": 373.0, "z_min": 0.3, "z_max": 0.7, "b": 16}
    848 480
    65535
    <raw samples, row-major>

Image dimensions live in the PGM header, so the JSON omits them.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .camera import CameraIntrinsics, DepthImage
from .errors import ConfigError

__all__ = ["read_pgm", "write_pgm"]


def write_pgm(path: str | Path, img: DepthImage) -> None:
    intr = img.intrinsics
    meta = json.dumps(intr.to_dict(with_size=False))
    header = f"P5\n# {meta}\n{intr.width} {intr.height}\n{intr.max_luminance}\n"
    if intr.bit_depth > 8:
        payload = img.pixels.astype(">u2").tobytes()
    else:
        payload = img.pixels.astype(np.uint8).tobytes()
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(payload)


def _tokens(data: bytes):
    """Yield header tokens, reporting full comment lines separately."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i : i + 1]
        if c == b"#":
            j = data.find(b"\n", i)
            j = n if j < 0 else j
            yield ("comment", data[i + 1 : j].strip().decode("ascii", "replace"))
            i = j + 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace():
                j += 1
            yield ("token", data[i:j].decode("ascii"), j)
            i = j + 1


def read_pgm(path: str | Path) -> DepthImage:
    data = Path(path).read_bytes()
    fields: list[str] = []
    comments: list[str] = []
    data_start = None
    for item in _tokens(data):
        if item[0] == "comment":
            comments.append(item[1])
            continue
        fields.append(item[1])
        if len(fields) == 4:
            # Exactly one whitespace byte separates maxval from the payload.
            data_start = item[2] + 1
            break
    if len(fields) < 4 or data_start is None:
        raise ConfigError(f"{path}: truncated PGM header")
    if fields[0] != "P5":
        raise ConfigError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])

    meta = None
    for c in comments:
        try:
            meta = json.loads(c)
            break
        except json.JSONDecodeError:
            continue
    if not isinstance(meta, dict):
        raise ConfigError(f"{path}: missing intrinsics JSON comment")
    intr = CameraIntrinsics.from_dict(meta, width=width, height=height)
    if maxval != intr.max_luminance:
        raise ConfigError(
            f"{path}: maxval {maxval} does not match bit depth {intr.bit_depth}"
        )

    dtype = ">u2" if intr.bit_depth > 8 else np.uint8
    count = width * height
    try:
        pixels = np.frombuffer(data, dtype=dtype, count=count, offset=data_start)
    except ValueError as e:
        raise ConfigError(f"{path}: truncated pixel data") from e
    return DepthImage(intr, pixels.reshape(height, width).astype(np.uint16))
