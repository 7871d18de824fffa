"""Binary PGM (P5) reading and writing, plus stack and mask directories.

Samples are one byte when ``maxval < 256`` and two big-endian bytes otherwise.
"""
from __future__ import annotations

import os
from pathlib import Path
from typing import Union

import numpy as np

from .core import CineStack, ImageSlice, InvalidInputError, as_mask

PathLike = Union[str, os.PathLike]


class PGMError(ValueError):
    """Malformed PGM data; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int, path=None):
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{message} at byte {offset}")
        self.offset = offset
        self.path = path


class StackValidationError(InvalidInputError):
    """A stack or mask file disagrees with the rest of its directory."""


def parse_pgm(data: bytes, path=None) -> tuple[np.ndarray, int]:
    """Decode a P5 image; returns ``(pixels, maxval)`` with pixels shaped ``(h, w)``."""
    if data[:2] != b"P5":
        raise PGMError("missing P5 magic", 0, path)
    pos = 2
    fields, offsets = [], []
    while len(fields) < 3:
        start = pos
        while pos < len(data) and (data[pos : pos + 1].isspace() or data[pos : pos + 1] == b"#"):
            if data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        if pos == start:
            raise PGMError("expected whitespace", pos, path)
        tok_start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if pos == tok_start:
            raise PGMError("expected a decimal header field", pos, path)
        fields.append(int(data[tok_start:pos]))
        offsets.append(tok_start)
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PGMError("expected one whitespace byte after maxval", pos, path)
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PGMError(f"bad dimensions {width}x{height}", offsets[0 if width < 1 else 1], path)
    if not 0 < maxval < 65536:
        raise PGMError(f"maxval {maxval} out of range", offsets[2], path)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    size = width * height * dtype.itemsize
    if len(data) - pos < size:
        raise PGMError(f"raster truncated: need {size} bytes, have {len(data) - pos}", len(data), path)
    if len(data) - pos > size:
        raise PGMError("trailing bytes after the raster", pos + size, path)
    pixels = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos).reshape(height, width)
    if pixels.size and int(pixels.max()) > maxval:
        bad = int(np.argmax(pixels.ravel() > maxval))
        raise PGMError(f"sample exceeds maxval {maxval}", pos + bad * dtype.itemsize, path)
    return pixels.astype(np.uint16 if maxval > 255 else np.uint8), maxval


def encode_pgm(pixels: np.ndarray, maxval: int) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise InvalidInputError("PGM images are 2D")
    if not 0 < maxval < 65536:
        raise InvalidInputError(f"maxval {maxval} out of range")
    if pixels.size and (pixels.min() < 0 or pixels.max() > maxval):
        raise InvalidInputError("pixel values exceed maxval")
    h, w = pixels.shape
    dtype = ">u2" if maxval > 255 else "u1"
    return f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + pixels.astype(dtype).tobytes()


def read_pgm(path: PathLike) -> tuple[np.ndarray, int]:
    return parse_pgm(Path(path).read_bytes(), path=str(path))


def write_pgm(path: PathLike, pixels: np.ndarray, maxval: int = 255):
    Path(path).write_bytes(encode_pgm(pixels, maxval))


def load_slice(path: PathLike) -> tuple[ImageSlice, int]:
    pixels, maxval = read_pgm(path)
    return ImageSlice(pixels, bit_depth=16 if maxval > 255 else 8), maxval


def slice_files(directory: PathLike) -> list[Path]:
    """PGM files of a directory in lexicographic (= slice) order."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"not a directory: {d}")
    return sorted(p for p in d.iterdir() if p.suffix.lower() == ".pgm" and p.is_file())


def load_stack(directory: PathLike) -> CineStack:
    files = slice_files(directory)
    if len(files) < 2:
        raise StackValidationError(f"{directory}: need at least 2 .pgm slices, found {len(files)}")
    slices = []
    ref = None
    for f in files:
        img, maxval = load_slice(f)
        if ref is None:
            ref = (img.shape, maxval, f.name)
        elif (img.shape, maxval) != ref[:2]:
            raise StackValidationError(
                f"{f}: {img.width}x{img.height} maxval {maxval} differs from "
                f"{ref[2]} ({ref[0][1]}x{ref[0][0]} maxval {ref[1]})"
            )
        slices.append(img)
    return CineStack(tuple(slices))


def load_mask(path: PathLike) -> np.ndarray:
    pixels, maxval = read_pgm(path)
    if maxval != 255:
        raise StackValidationError(f"{path}: mask maxval must be 255, got {maxval}")
    if not np.isin(pixels, (0, 255)).all():
        raise StackValidationError(f"{path}: mask values must be 0 or 255")
    return pixels == 255


def save_mask(mask, path: PathLike):
    m = as_mask(mask)
    write_pgm(path, np.where(m, 255, 0).astype(np.uint8), 255)


def save_slice(image: ImageSlice, path: PathLike):
    write_pgm(path, image.pixels, 65535 if image.bit_depth == 16 else 255)
