"""Binary PPM (P6, 8-bit) reading and writing; PNG via Pillow if installed."""

from __future__ import annotations

from pathlib import Path

import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageError(ValueError):
    """Base class for image loading failures."""


class UnreadableImageError(ImageError):
    pass


class MalformedHeaderError(ImageError):
    pass


class UnsupportedMaxValueError(ImageError):
    pass


class TruncatedImageError(ImageError):
    pass


class UnsupportedFormatError(ImageError):
    pass


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one.
    """
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MalformedHeaderError(
                f"header ended after {len(tokens)} of {count} fields"
            )
        tokens.append(data[start:pos])
    if pos >= n or not data[pos:pos + 1].isspace():
        raise MalformedHeaderError("missing whitespace between header and pixel data")
    return tokens, pos + 1


def decode_ppm(data: bytes, source: str = "<bytes>") -> np.ndarray:
    """Decode P6 bytes to a ``(3, H, W)`` float64 array in [0, 1]."""
    if data[:2] != b"P6":
        raise MalformedHeaderError(f"{source}: not a binary PPM (magic {data[:2]!r}, expected b'P6')")
    tokens, offset = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t.decode("ascii")) for t in tokens[1:])
    except (UnicodeDecodeError, ValueError):
        raise MalformedHeaderError(
            f"{source}: non-numeric header fields {[t.decode('latin-1') for t in tokens[1:]]}"
        ) from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"{source}: invalid dimensions {width}x{height}")
    if maxval < 1:
        raise MalformedHeaderError(f"{source}: invalid max value {maxval}")
    if maxval > 255:
        raise UnsupportedMaxValueError(
            f"{source}: max value {maxval} implies 16-bit samples; only 8-bit PPM is supported"
        )
    need = width * height * 3
    pixels = data[offset:offset + need]
    if len(pixels) < need:
        raise TruncatedImageError(
            f"{source}: expected {need} pixel bytes for {width}x{height}, found {len(pixels)}"
        )
    arr = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)
    return np.clip(arr.transpose(2, 0, 1).astype(np.float64) / maxval, 0.0, 1.0)


def encode_ppm(img: np.ndarray) -> bytes:
    """Quantise a ``(3, H, W)`` image in [0, 1] to 8-bit P6 bytes."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"expected (3, H, W) image, got shape {list(img.shape)}")
    q = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    _, h, w = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + q.transpose(1, 2, 0).tobytes()


def write_ppm(path, img: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(img))


def _load_png(path: Path) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError:
        raise UnsupportedFormatError(
            f"{path}: PNG support needs Pillow (pip install 'artifact[png]')"
        ) from None
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr.transpose(2, 0, 1).copy()


def load_image(path) -> np.ndarray:
    """Load an RGB image as ``(3, H, W)`` float64 in [0, 1]."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise UnreadableImageError(f"{path}: {exc.strerror or exc}") from exc
    if data.startswith(PNG_SIGNATURE):
        return _load_png(path)
    return decode_ppm(data, str(path))
