"""RGB <-> YCbCr conversion on [0, 1]-normalised, channel-first images.

Images are arrays of shape ``(..., 3, H, W)``. The default transform is
full-range (JPEG-style) BT.601 with chroma centred on 0.5, so a valid RGB
image maps into ``[0, 1]`` on every channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import as_tensor


class ColorDomainError(ValueError):
    """An input pixel lies outside the valid [0, 1] range."""


@dataclass(frozen=True)
class ColorTransform:
    name: str
    matrix: np.ndarray  # rows: Y, Cb, Cr; cols: R, G, B
    offset: np.ndarray
    inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=np.float64))
        object.__setattr__(self, "inverse", np.linalg.inv(m))

    @classmethod
    def from_luma_weights(cls, name: str, kr: float, kb: float) -> "ColorTransform":
        """Full-range transform from the red/blue luma weights."""
        kg = 1.0 - kr - kb
        y = [kr, kg, kb]
        cb = [-kr / (2 * (1 - kb)), -kg / (2 * (1 - kb)), 0.5]
        cr = [0.5, -kg / (2 * (1 - kr)), -kb / (2 * (1 - kr))]
        return cls(name, np.array([y, cb, cr]), np.array([0.0, 0.5, 0.5]))


BT601_FULL = ColorTransform(
    "bt601-full",
    np.array(
        [
            [0.299, 0.587, 0.114],
            [-0.168736, -0.331264, 0.5],
            [0.5, -0.418688, -0.081312],
        ]
    ),
    np.array([0.0, 0.5, 0.5]),
)

BT709_FULL = ColorTransform.from_luma_weights("bt709-full", 0.2126, 0.0722)

TRANSFORMS = {t.name: t for t in (BT601_FULL, BT709_FULL)}


def _check_image(img: np.ndarray, what: str) -> None:
    if img.ndim < 3 or img.shape[-3] != 3:
        raise ValueError(f"{what} must have shape (..., 3, H, W), got {list(img.shape)}")


def check_rgb_range(img: np.ndarray) -> None:
    bad = ~((img >= 0.0) & (img <= 1.0))
    if bad.any():
        loc = tuple(int(i) for i in np.argwhere(bad)[0])
        *lead, c, y, x = loc
        where = f"channel {'RGB'[c]} row {y} col {x}"
        if lead:
            where = f"image {tuple(lead)} " + where
        raise ColorDomainError(f"pixel value {img[loc]!r} outside [0, 1] at {where}")


def apply_color_matrix(img: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Per-pixel 3x3 matrix product over the channel axis."""
    return np.einsum("ij,...jhw->...ihw", matrix, img)


def rgb_to_ycbcr(img, transform: ColorTransform = BT601_FULL, check: bool = True) -> np.ndarray:
    """Convert an RGB image to YCbCr.

    Args:
        img: array ``(..., 3, H, W)`` ordered R, G, B with values in [0, 1].
        transform: coefficient table, BT.601 full range by default.
        check: reject out-of-range pixels with :class:`ColorDomainError`.

    Returns:
        Array of the same shape ordered Y, Cb, Cr.
    """
    img = as_tensor(img)
    _check_image(img, "RGB image")
    if check:
        check_rgb_range(img)
    return apply_color_matrix(img, transform.matrix) + transform.offset[:, None, None]


def ycbcr_to_rgb(img, transform: ColorTransform = BT601_FULL, clamp: bool = True) -> np.ndarray:
    """Inverse of :func:`rgb_to_ycbcr`; optionally clamps the result to [0, 1]."""
    img = as_tensor(img)
    _check_image(img, "YCbCr image")
    rgb = apply_color_matrix(img - transform.offset[:, None, None], transform.inverse)
    if clamp:
        rgb = np.clip(rgb, 0.0, 1.0)
    return rgb
