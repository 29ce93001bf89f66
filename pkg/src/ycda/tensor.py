"""Dense float64 array helpers shared by every stage of the block.

Feature maps are plain ``numpy.ndarray`` objects laid out channel-first,
``(C, H, W)``, optionally with leading batch axes ``(..., C, H, W)``.
Nothing here mutates its inputs.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

DTYPE = np.float64


class InvalidShapeError(ValueError):
    """Raised when a requested shape has a zero or negative extent."""


class ShapeMismatchError(ValueError):
    """Raised when two operands can neither be matched nor channel-broadcast."""


def as_tensor(x) -> np.ndarray:
    """Return ``x`` as a C-contiguous float64 array (copying only if needed)."""
    return np.ascontiguousarray(x, dtype=DTYPE)


def zeros(shape: Sequence[int]) -> np.ndarray:
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise InvalidShapeError(f"all extents must be >= 1, got {list(shape)}")
    return np.zeros(shape, dtype=DTYPE)


def elementwise(a, b, op: str = "mul") -> np.ndarray:
    """Add or multiply two tensors.

    ``b`` may either match ``a`` exactly or be a per-channel vector: for
    ``a`` of shape ``(..., C, H, W)`` a ``b`` of shape ``(..., C)`` scales
    every spatial element of channel ``c`` by ``b[..., c]``.
    """
    a = as_tensor(a)
    b = as_tensor(b)
    if op not in ("add", "mul"):
        raise ValueError(f"unknown elementwise op {op!r}; expected 'add' or 'mul'")
    if a.shape == b.shape:
        rhs = b
    elif a.ndim >= 3 and b.shape == a.shape[:-2]:
        rhs = b[..., None, None]
    else:
        raise ShapeMismatchError(
            f"cannot combine shapes {list(a.shape)} and {list(b.shape)}: "
            "need equal shapes or a per-channel vector"
        )
    return a + rhs if op == "add" else a * rhs


def _check_spatial(f: np.ndarray) -> None:
    if f.ndim < 3:
        raise ShapeMismatchError(
            f"expected a (C, H, W) feature map, got shape {list(f.shape)}"
        )


def spatial_mean(f: np.ndarray) -> np.ndarray:
    f = as_tensor(f)
    _check_spatial(f)
    return f.mean(axis=(-2, -1))


def spatial_var(f: np.ndarray) -> np.ndarray:
    """Population variance over H and W (divisor ``H*W``), two-pass."""
    f = as_tensor(f)
    _check_spatial(f)
    mean = f.mean(axis=(-2, -1), keepdims=True)
    dev = f - mean
    return (dev * dev).mean(axis=(-2, -1))


def reduce_spatial(f, stat: str = "mean") -> np.ndarray:
    """Per-channel spatial statistic of a ``(..., C, H, W)`` map.

    Args:
        f: feature map.
        stat: ``"mean"`` or ``"var"``.

    Returns:
        Array of shape ``(..., C)``.
    """
    if stat == "mean":
        return spatial_mean(f)
    if stat == "var":
        return spatial_var(f)
    raise ValueError(f"unknown statistic {stat!r}; expected 'mean' or 'var'")


def sigmoid(x) -> np.ndarray:
    """Logistic function, overflow-free for large ``|x|``."""
    x = as_tensor(x)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
