"""Frame and buffer file formats.

Scene directory layout, one set per frame index ``k``::

    frame_000.ppm    P6 color, 8-bit
    frame_000.depth  float32 little-endian, row-major (H*W values)
    frame_000.pgm    P5 labels, 8-bit
    frame_000.cam    "fx fy cu cv", three pose-rotation rows, translation row
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Camera, InputError


class DataFormatError(InputError):
    pass


@dataclass(eq=False)
class Frame:
    rgb: np.ndarray
    depth: np.ndarray
    labels: np.ndarray
    cam: Camera
    sem: np.ndarray | None = None  # optional dense semantic target overriding labels


def _read_pnm(path, magic: bytes):
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataFormatError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != magic:
        raise DataFormatError(f"{path}: expected {magic!r}, found {tokens[0]!r}")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise DataFormatError(f"{path}: only 8-bit images are supported")
    return w, h, data[pos:]


def write_ppm(path, rgb: np.ndarray) -> None:
    img = np.clip(np.round(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape[:2]
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())


def read_ppm(path) -> np.ndarray:
    w, h, body = _read_pnm(path, b"P6")
    if len(body) < w * h * 3:
        raise DataFormatError(f"{path}: truncated pixel data")
    return np.frombuffer(body[: w * h * 3], np.uint8).reshape(h, w, 3).astype(np.float64) / 255.0


def write_pgm(path, labels: np.ndarray) -> None:
    img = np.asarray(labels).astype(np.uint8)
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def read_pgm(path) -> np.ndarray:
    w, h, body = _read_pnm(path, b"P5")
    if len(body) < w * h:
        raise DataFormatError(f"{path}: truncated pixel data")
    return np.frombuffer(body[: w * h], np.uint8).reshape(h, w).astype(np.int64)


def write_depth(path, depth: np.ndarray) -> None:
    Path(path).write_bytes(np.asarray(depth, dtype="<f4").tobytes())


def read_depth(path, height: int, width: int) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) != height * width * 4:
        raise DataFormatError(f"{path}: expected {height * width * 4} bytes, found {len(data)}")
    return np.frombuffer(data, "<f4").reshape(height, width).astype(np.float64)


def write_camera(path, cam: Camera) -> None:
    lines = [" ".join(repr(float(x)) for x in (cam.fx, cam.fy, cam.cu, cam.cv))]
    lines += [" ".join(repr(float(x)) for x in row) for row in cam.rotation]
    lines.append(" ".join(repr(float(x)) for x in cam.translation))
    Path(path).write_text("\n".join(lines) + "\n")


def read_camera(path, width: int, height: int) -> Camera:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        vals = [[float(x) for x in r] for r in rows]
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-numeric camera entry") from exc
    if len(vals) != 5 or len(vals[0]) != 4 or any(len(r) != 3 for r in vals[1:]):
        raise DataFormatError(f"{path}: expected intrinsics line, 3 rotation rows and a translation row")
    fx, fy, cu, cv = vals[0]
    return Camera(fx, fy, cu, cv, width, height, np.array(vals[1:4]), np.array(vals[4]))


def write_frames(directory, frames: list[Frame]) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for k, fr in enumerate(frames):
        stem = d / f"frame_{k:03d}"
        write_ppm(stem.with_suffix(".ppm"), fr.rgb)
        write_depth(stem.with_suffix(".depth"), fr.depth)
        write_pgm(stem.with_suffix(".pgm"), fr.labels)
        write_camera(stem.with_suffix(".cam"), fr.cam)


def read_frames(directory) -> list[Frame]:
    d = Path(directory)
    if not d.is_dir():
        raise DataFormatError(f"scene directory {d} does not exist")
    stems = sorted(p.with_suffix("") for p in d.glob("frame_*.ppm"))
    if not stems:
        raise DataFormatError(f"{d}: no frame_*.ppm files")
    frames = []
    for stem in stems:
        rgb = read_ppm(stem.with_suffix(".ppm"))
        h, w = rgb.shape[:2]
        depth = read_depth(stem.with_suffix(".depth"), h, w)
        labels = read_pgm(stem.with_suffix(".pgm"))
        if labels.shape != (h, w):
            raise DataFormatError(f"{stem}: label image size {labels.shape} differs from color {h}x{w}")
        frames.append(Frame(rgb, depth, labels, read_camera(stem.with_suffix(".cam"), w, h)))
    return frames


_RBUF = struct.Struct("<4sIII")


def write_rbuf(path, data: np.ndarray) -> None:
    arr = np.asarray(data, dtype="<f4")
    if arr.ndim == 2:
        arr = arr[..., None]
    h, w, c = arr.shape
    Path(path).write_bytes(_RBUF.pack(b"RBUF", h, w, c) + arr.tobytes())


def read_rbuf(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _RBUF.size or data[:4] != b"RBUF":
        raise DataFormatError(f"{path}: not an RBUF file")
    _, h, w, c = _RBUF.unpack_from(data)
    if len(data) != _RBUF.size + h * w * c * 4:
        raise DataFormatError(f"{path}: payload size does not match header")
    return np.frombuffer(data, "<f4", offset=_RBUF.size).reshape(h, w, c).astype(np.float64)
