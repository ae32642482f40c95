"""Raw planar video, depth sequences and CSV tables.

Supported pixel formats:

``gray``
    one 8-bit luma plane per frame
``yuv420``
    8-bit Y plane followed by Cb and Cr planes at half resolution
    (rounded up for odd sizes)
``rgb``
    three full-resolution planes R, G, B per frame
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from vqm3d.core import DepthFrame, Frame

PIXEL_FORMATS = ("gray", "yuv420", "rgb")


class DescriptorError(ValueError):
    """File contents disagree with the declared sequence geometry."""


def frame_byte_size(width: int, height: int, pixel_format: str) -> int:
    if pixel_format == "gray":
        return width * height
    if pixel_format == "yuv420":
        return width * height + 2 * ((width + 1) // 2) * ((height + 1) // 2)
    if pixel_format == "rgb":
        return 3 * width * height
    raise DescriptorError(f"unknown pixel format {pixel_format!r}; expected one of {PIXEL_FORMATS}")


@dataclass(frozen=True)
class SequenceDescriptor:
    path: Path
    width: int
    height: int
    frame_count: int
    pixel_format: str = "gray"
    fps: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))
        if self.width < 1 or self.height < 1:
            raise DescriptorError("width and height must be positive")
        if self.frame_count < 1:
            raise DescriptorError("frame_count must be at least 1")
        frame_byte_size(self.width, self.height, self.pixel_format)

    @property
    def frame_bytes(self) -> int:
        return frame_byte_size(self.width, self.height, self.pixel_format)

    @property
    def expected_bytes(self) -> int:
        return self.frame_count * self.frame_bytes

    @classmethod
    def probe(cls, path, width: int, height: int, pixel_format: str = "gray", fps: float = 30.0):
        """Build a descriptor whose frame count is inferred from the file size."""
        path = Path(path)
        size = path.stat().st_size
        fb = frame_byte_size(width, height, pixel_format)
        if size == 0 or size % fb:
            raise DescriptorError(
                f"{path}: {size} bytes is not a positive multiple of the "
                f"{fb}-byte {width}x{height} {pixel_format} frame"
            )
        return cls(path, width, height, size // fb, pixel_format, fps)


def _read_checked(desc: SequenceDescriptor) -> np.ndarray:
    raw = desc.path.read_bytes()
    if len(raw) != desc.expected_bytes:
        raise DescriptorError(
            f"{desc.path}: expected {desc.expected_bytes} bytes "
            f"({desc.frame_count} frames x {desc.frame_bytes}), found {len(raw)}"
        )
    return np.frombuffer(raw, dtype=np.uint8)


def load_video(desc: SequenceDescriptor) -> List[Frame]:
    buf = _read_checked(desc)
    w, h = desc.width, desc.height
    frames = []
    for chunk in buf.reshape(desc.frame_count, desc.frame_bytes):
        if desc.pixel_format == "gray":
            frames.append(Frame(chunk.reshape(h, w)))
        elif desc.pixel_format == "rgb":
            frames.append(Frame(chunk.reshape(3, h, w).transpose(1, 2, 0)))
        else:
            cw, ch = (w + 1) // 2, (h + 1) // 2
            y = chunk[: w * h].reshape(h, w)
            cb = chunk[w * h : w * h + cw * ch].reshape(ch, cw)
            cr = chunk[w * h + cw * ch :].reshape(ch, cw)
            frames.append(Frame(y, chroma=(cb, cr)))
    return frames


def load_depth(desc: SequenceDescriptor) -> List[DepthFrame]:
    if desc.pixel_format == "rgb":
        raise DescriptorError("depth sequences are single-channel (gray or yuv420 luma)")
    buf = _read_checked(desc)
    n = desc.width * desc.height
    return [DepthFrame(chunk[:n].reshape(desc.height, desc.width))
            for chunk in buf.reshape(desc.frame_count, desc.frame_bytes)]


def encode_frame(frame: Frame, pixel_format: str) -> bytes:
    data = frame.data
    if pixel_format == "gray":
        if data.ndim != 2:
            raise DescriptorError("gray output needs single-channel frames")
        return data.tobytes()
    if pixel_format == "rgb":
        if data.ndim != 3:
            raise DescriptorError("rgb output needs tri-channel frames")
        return data.transpose(2, 0, 1).tobytes()
    if pixel_format == "yuv420":
        if data.ndim != 2:
            raise DescriptorError("yuv420 output needs a luma frame")
        if frame.chroma is None:
            neutral = np.full(((frame.height + 1) // 2, (frame.width + 1) // 2), 128, np.uint8)
            cb = cr = neutral
        else:
            cb, cr = frame.chroma
        return data.tobytes() + cb.tobytes() + cr.tobytes()
    raise DescriptorError(f"unknown pixel format {pixel_format!r}")


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_video(frames: Sequence[Frame], path, pixel_format: str = "gray") -> SequenceDescriptor:
    if not frames:
        raise DescriptorError("refusing to write an empty sequence")
    atomic_write_bytes(path, b"".join(encode_frame(f, pixel_format) for f in frames))
    return SequenceDescriptor(path, frames[0].width, frames[0].height, len(frames), pixel_format)


def write_depth(frames: Sequence[DepthFrame], path) -> SequenceDescriptor:
    if not frames:
        raise DescriptorError("refusing to write an empty sequence")
    atomic_write_bytes(path, b"".join(f.codes.tobytes() for f in frames))
    return SequenceDescriptor(path, frames[0].width, frames[0].height, len(frames), "gray")


def format_value(value) -> str:
    # repr() of a float is the shortest string that parses back to the same double
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return "" if value is None else str(value)


def render_csv(rows: Iterable[Mapping], fieldnames: Optional[Sequence[str]] = None) -> str:
    rows = list(rows)
    if fieldnames is None:
        if not rows:
            raise ValueError("fieldnames are required for an empty table")
        fieldnames = list(rows[0].keys())
    fieldnames = list(fieldnames)
    for i, row in enumerate(rows):
        if set(row.keys()) != set(fieldnames):
            raise ValueError(f"row {i} keys {sorted(row)} do not match header {fieldnames}")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([format_value(row[k]) for k in fieldnames])
    return out.getvalue()


def write_csv(rows: Iterable[Mapping], path, fieldnames: Optional[Sequence[str]] = None) -> None:
    """Write a rectangular table of labelled values as UTF-8 CSV with a header."""
    atomic_write_bytes(path, render_csv(rows, fieldnames).encode("utf-8"))


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path, convert: bool = True) -> List[Dict[str, object]]:
    """Read a CSV written by :func:`write_csv`; numeric cells become numbers."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            rows.append({k: (_parse_cell(v) if convert else v) for k, v in row.items()})
    return rows
