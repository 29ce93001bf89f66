"""Channel-isolated downsampling: pixel-unshuffle followed by depthwise conv.

The unshuffle moves every ``r x r`` spatial block into ``r**2`` channels, so
all downsampling happens without mixing channels. The depthwise conv then
applies ``multiplier`` kernels to each channel independently, stride 1 with
zero same-padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import as_tensor, sigmoid

ACTIVATIONS = ("identity", "silu")


class ConfigError(ValueError):
    """Invalid or internally inconsistent block configuration."""


class IndivisibleError(ValueError):
    """Spatial or channel extent not divisible by the shuffle factor."""


@dataclass(frozen=True)
class StemConfig:
    unshuffle_factor: int = 2
    activation: str = "silu"
    multiplier: int = 2
    kernel_size: int = 3
    in_channels: int = 3

    def __post_init__(self):
        for name in ("unshuffle_factor", "multiplier", "kernel_size", "in_channels"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )

    @property
    def unshuffled_channels(self) -> int:
        return self.in_channels * self.unshuffle_factor**2

    @property
    def out_channels(self) -> int:
        return self.unshuffled_channels * self.multiplier

    @property
    def group_size(self) -> int:
        """Output channels derived from each colour channel (8 by default)."""
        return self.unshuffle_factor**2 * self.multiplier


@dataclass(frozen=True)
class DWConvParams:
    """Depthwise kernels ``(C_in*m, k, k)`` and bias ``(C_in*m,)``.

    Output channel ``j`` reads only input channel ``j // multiplier``.
    """

    kernels: np.ndarray
    bias: np.ndarray
    multiplier: int = 2

    def __post_init__(self):
        k = as_tensor(self.kernels)
        b = as_tensor(self.bias)
        object.__setattr__(self, "kernels", k)
        object.__setattr__(self, "bias", b)
        if k.ndim != 3 or k.shape[1] != k.shape[2] or k.shape[1] % 2 == 0:
            raise ConfigError(f"kernels must be (C*m, k, k) with odd k, got {list(k.shape)}")
        if b.shape != (k.shape[0],):
            raise ConfigError(f"bias shape {list(b.shape)} does not match {k.shape[0]} kernels")
        if self.multiplier < 1 or k.shape[0] % self.multiplier:
            raise ConfigError(
                f"{k.shape[0]} kernels not divisible by multiplier {self.multiplier}"
            )

    @property
    def kernel_size(self) -> int:
        return self.kernels.shape[-1]

    @property
    def in_channels(self) -> int:
        return self.kernels.shape[0] // self.multiplier

    def num_params(self) -> int:
        return self.kernels.size + self.bias.size


def pixel_unshuffle(f, r: int) -> np.ndarray:
    """Space-to-depth: ``(..., C, H, W) -> (..., C*r*r, H/r, W/r)``.

    Output channel ``c*r*r + dy*r + dx`` at ``(y, x)`` is input channel ``c``
    at ``(y*r + dy, x*r + dx)``.
    """
    f = as_tensor(f)
    *lead, c, h, w = f.shape
    if h % r or w % r:
        raise IndivisibleError(
            f"height {h} and width {w} must both be divisible by {r}; pad the input first"
        )
    x = f.reshape(*lead, c, h // r, r, w // r, r)
    n = len(lead)
    x = x.transpose(*range(n), n, n + 2, n + 4, n + 1, n + 3)
    return np.ascontiguousarray(x.reshape(*lead, c * r * r, h // r, w // r))


def pixel_shuffle(f, r: int) -> np.ndarray:
    """Depth-to-space, the exact inverse of :func:`pixel_unshuffle`."""
    f = as_tensor(f)
    *lead, cr, h, w = f.shape
    if cr % (r * r):
        raise IndivisibleError(f"channel count {cr} must be divisible by r*r = {r * r}")
    c = cr // (r * r)
    x = f.reshape(*lead, c, r, r, h, w)
    n = len(lead)
    x = x.transpose(*range(n), n, n + 3, n + 1, n + 4, n + 2)
    return np.ascontiguousarray(x.reshape(*lead, c, h * r, w * r))


def depthwise_conv(f, p: DWConvParams) -> np.ndarray:
    """Stride-1, zero same-padded depthwise cross-correlation plus bias."""
    f = as_tensor(f)
    if f.ndim < 3 or f.shape[-3] != p.in_channels:
        raise ConfigError(
            f"input has {f.shape[-3] if f.ndim >= 3 else '?'} channels, "
            f"kernels expect {p.in_channels}"
        )
    k = p.kernel_size
    pad = k // 2
    *lead, c, h, w = f.shape
    m = p.multiplier
    widths = [(0, 0)] * (f.ndim - 2) + [(pad, pad), (pad, pad)]
    src = np.pad(f, widths)[..., :, None, :, :]
    kern = p.kernels.reshape(c, m, k, k)
    out = np.zeros((*lead, c, m, h, w))
    for dy in range(k):
        for dx in range(k):
            out += kern[:, :, dy, dx, None, None] * src[..., dy:dy + h, dx:dx + w]
    out = out.reshape(*lead, c * m, h, w)
    out += p.bias[:, None, None]
    return out


def activate(x: np.ndarray, name: str) -> np.ndarray:
    if name == "identity":
        return x
    if name == "silu":
        return x * sigmoid(x)
    raise ConfigError(f"unknown activation {name!r}")


def stem_forward(img, cfg: StemConfig, p: DWConvParams) -> np.ndarray:
    """YCbCr image ``(..., 3, H, W)`` -> feature map ``(..., 24, H/2, W/2)``.

    Output channels ``0..7`` derive only from Y, ``8..15`` from Cb and
    ``16..23`` from Cr (default configuration).
    """
    if p.multiplier != cfg.multiplier or p.kernel_size != cfg.kernel_size:
        raise ConfigError("stem parameters do not match the stem config")
    u = pixel_unshuffle(img, cfg.unshuffle_factor)
    return activate(depthwise_conv(u, p), cfg.activation)
