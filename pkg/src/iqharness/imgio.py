"""Image file IO: codec boundary, magic-byte checks, and shared pixel helpers.

All arrays entering or leaving this module are RGB channel order (or 2-D
grayscale); the BGR convention of the underlying codec library never leaks
past this file.  Dtypes are preserved: 8-bit stays uint8, 16-bit stays uint16.
"""
from __future__ import annotations

import logging
from pathlib import Path

import cv2
import numpy as np

from .errors import IqhError, UnsupportedChannelCount

log = logging.getLogger(__name__)

# Extensions the toolkit treats as images when scanning a directory.
IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".tif", ".tiff"}

# Magic prefixes for the supported container formats.
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"
_TIFF_MAGICS = (b"II*\x00", b"MM\x00*")

# End-of-stream markers used to tell a truncated file from a corrupt one.
_PNG_TRAILER = b"IEND"
_JPEG_TRAILER = b"\xff\xd9"

# Luma weights for RGB -> single channel reduction.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


class ImageReadError(IqhError):
    """File could not be decoded into pixels."""


def list_images(images_dir: Path) -> list[Path]:
    """Relative paths of all image files under ``images_dir``, sorted.

    Recurses so nested layouts survive; ordering is by the POSIX form of the
    relative path, which keeps listings stable across platforms.
    """
    images_dir = Path(images_dir)
    found = [
        p.relative_to(images_dir)
        for p in images_dir.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    ]
    return sorted(found, key=lambda p: p.as_posix())


def sniff_format(path: Path) -> str | None:
    """Container format from magic bytes: 'png', 'jpeg', 'tiff', or None."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
    except OSError:
        return None
    if head.startswith(_PNG_MAGIC):
        return "png"
    if head.startswith(_JPEG_MAGIC):
        return "jpeg"
    if head[:4] in _TIFF_MAGICS:
        return "tiff"
    return None


def classify_invalid(path: Path) -> str | None:
    """Why ``path`` is not a readable image, or None if it decodes fine.

    Returns one of ``bad-magic`` (unknown container signature), ``truncated``
    (valid signature but the end-of-stream marker is missing), or
    ``decode-error`` (signature and trailer present, decode still fails).
    """
    fmt = sniff_format(path)
    if fmt is None:
        return "bad-magic"
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is not None:
        return None
    try:
        size = path.stat().st_size
        with open(path, "rb") as fh:
            if size > 64:
                fh.seek(-64, 2)
            tail = fh.read()
    except OSError:
        return "decode-error"
    if fmt == "png" and _PNG_TRAILER not in tail:
        return "truncated"
    if fmt == "jpeg" and not tail.rstrip(b"\x00").endswith(_JPEG_TRAILER):
        return "truncated"
    return "decode-error"


def read_image(path: Path) -> np.ndarray:
    """Decode ``path`` to an RGB (or 2-D grayscale) array.

    Alpha channels are dropped.  Raises :class:`ImageReadError` when the file
    cannot be decoded.
    """
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise ImageReadError(f"cannot decode image: {path}")
    if data.ndim == 3:
        if data.shape[2] == 4:
            data = data[:, :, :3]
        if data.shape[2] == 3:
            data = data[:, :, ::-1]
        else:
            raise UnsupportedChannelCount(
                f"{path}: {data.shape[2]} channels not supported"
            )
    return np.ascontiguousarray(data)


def write_image(path: Path, image: np.ndarray, *, jpeg_quality: int | None = None) -> None:
    """Encode ``image`` (RGB or grayscale) to ``path``, codec from extension."""
    path = Path(path)
    out = image
    if out.ndim == 3:
        if out.shape[2] != 3:
            raise UnsupportedChannelCount(
                f"{path}: {out.shape[2]} channels not supported"
            )
        out = np.ascontiguousarray(out[:, :, ::-1])
    params = []
    if jpeg_quality is not None and path.suffix.lower() in (".jpg", ".jpeg"):
        params = [cv2.IMWRITE_JPEG_QUALITY, int(jpeg_quality)]
    ok = cv2.imwrite(str(path), out, params)
    if not ok:
        raise ImageReadError(f"cannot encode image: {path}")


def encode_jpeg(image: np.ndarray, quality: int) -> bytes:
    """JPEG bytestream for ``image`` at the given quality.

    Chroma subsampling follows baseline encoder practice: 4:2:0 below
    quality 95, 4:4:4 at 95 and above.  Only 8-bit, 1- or 3-channel input
    can be encoded.
    """
    if image.dtype != np.uint8:
        raise UnsupportedChannelCount(
            f"JPEG supports 8-bit samples only, got {image.dtype}"
        )
    if image.ndim == 3 and image.shape[2] != 3:
        raise UnsupportedChannelCount(
            f"JPEG supports 1 or 3 channels, got {image.shape[2]}"
        )
    subsampling = (
        cv2.IMWRITE_JPEG_SAMPLING_FACTOR_444
        if quality >= 95
        else cv2.IMWRITE_JPEG_SAMPLING_FACTOR_420
    )
    out = image[:, :, ::-1] if image.ndim == 3 else image
    ok, buf = cv2.imencode(
        ".jpg",
        np.ascontiguousarray(out),
        [
            cv2.IMWRITE_JPEG_QUALITY, int(quality),
            cv2.IMWRITE_JPEG_SAMPLING_FACTOR, subsampling,
        ],
    )
    if not ok:
        raise ImageReadError("JPEG encoding failed")
    return bytes(buf.tobytes())


def image_size(path: Path) -> tuple[int, int]:
    """(width, height) of the image at ``path``."""
    img = read_image(path)
    return img.shape[1], img.shape[0]


def to_gray(image: np.ndarray) -> np.ndarray:
    """Float64 luma plane: 0.299 R + 0.587 G + 0.114 B (identity for gray)."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr @ _LUMA
    raise UnsupportedChannelCount(f"expected 1 or 3 channels, got shape {arr.shape}")


def max_value(image: np.ndarray) -> float:
    """Nominal full-scale value for the image dtype (255 or 65535)."""
    if image.dtype == np.uint16:
        return 65535.0
    return 255.0
