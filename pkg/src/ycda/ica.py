"""Information-aware channel attention and the assembled YCDa forward pass.

Per channel, the spatial mean and population variance are concatenated
(mean first), fused by a ``C x 2C`` linear map, passed through a
``C -> C/r -> C`` ReLU bottleneck and a sigmoid, and the resulting gates
rescale the feature map channel by channel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .colorspace import BT601_FULL, ColorTransform, rgb_to_ycbcr
from .stem import (
    ConfigError,
    DWConvParams,
    StemConfig,
    activate,
    depthwise_conv,
    pixel_unshuffle,
)
from .tensor import as_tensor, elementwise, sigmoid, spatial_mean, spatial_var
from .trace import Tape

VARIANTS = ("ica", "gap_only", "var_only")


class ChannelStats(NamedTuple):
    mean: np.ndarray
    variance: np.ndarray


@dataclass(frozen=True)
class IcaParams:
    """Fusion and bottleneck weights.

    ``b1``/``b2`` are ``None`` in no-bias mode. ``variant`` selects the
    descriptor: ``ica`` fuses ``[mean; var]``, ``gap_only`` fuses
    ``[mean; mean]`` and ``var_only`` fuses ``[var; var]``.
    """

    fuse_weight: np.ndarray
    fuse_bias: np.ndarray
    w1: np.ndarray
    b1: Optional[np.ndarray]
    w2: np.ndarray
    b2: Optional[np.ndarray]
    reduction: int = 4
    variant: str = "ica"

    def __post_init__(self):
        for name in ("fuse_weight", "fuse_bias", "w1", "b1", "w2", "b2"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, as_tensor(v))
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if (self.b1 is None) != (self.b2 is None):
            raise ConfigError("b1 and b2 must both be present or both be None")
        c = self.fuse_weight.shape[0]
        if self.reduction < 1 or c < self.reduction or c % self.reduction:
            raise ConfigError(
                f"channel count {c} must be a positive multiple of reduction {self.reduction}"
            )
        hidden = c // self.reduction
        expected = {
            "fuse_weight": (c, 2 * c),
            "fuse_bias": (c,),
            "w1": (hidden, c),
            "b1": (hidden,),
            "w2": (c, hidden),
            "b2": (c,),
        }
        for name, shape in expected.items():
            v = getattr(self, name)
            if v is not None and v.shape != shape:
                raise ConfigError(f"{name} has shape {list(v.shape)}, expected {list(shape)}")

    @property
    def channels(self) -> int:
        return self.fuse_weight.shape[0]

    @property
    def has_bias(self) -> bool:
        return self.b1 is not None

    def num_params(self) -> int:
        return sum(
            v.size
            for v in (self.fuse_weight, self.fuse_bias, self.w1, self.b1, self.w2, self.b2)
            if v is not None
        )


def compute_stats(f) -> ChannelStats:
    return ChannelStats(spatial_mean(f), spatial_var(f))


def descriptor(s: ChannelStats, variant: str) -> np.ndarray:
    """Length-``2C`` input to the fusion map for the given variant."""
    first, second = {
        "ica": (s.mean, s.variance),
        "gap_only": (s.mean, s.mean),
        "var_only": (s.variance, s.variance),
    }[variant]
    return np.concatenate([first, second], axis=-1)


def fuse_stats(s: ChannelStats, p: IcaParams) -> np.ndarray:
    if s.mean.shape[-1] != p.channels:
        raise ConfigError(
            f"statistics have {s.mean.shape[-1]} channels, parameters expect {p.channels}"
        )
    return descriptor(s, p.variant) @ p.fuse_weight.T + p.fuse_bias


def _hidden(z: np.ndarray, p: IcaParams) -> np.ndarray:
    h = z @ p.w1.T
    return h + p.b1 if p.b1 is not None else h


def excite(z, p: IcaParams) -> np.ndarray:
    """Gates ``sigmoid(w2 @ relu(w1 @ z + b1) + b2)``, each in (0, 1)."""
    q = np.maximum(_hidden(as_tensor(z), p), 0.0)
    o = q @ p.w2.T
    if p.b2 is not None:
        o = o + p.b2
    return sigmoid(o)


def ica_forward(f, p: IcaParams, tape: Optional[Tape] = None, name: str = "f"):
    """Gate a ``(..., C, H, W)`` map by its channel attention.

    Returns:
        ``(alpha * f, alpha)`` with ``alpha`` of shape ``(..., C)``.
    """
    f = as_tensor(f)
    stats = compute_stats(f)
    z = fuse_stats(stats, p)
    h = _hidden(z, p)
    alpha = excite(z, p)
    out = elementwise(f, alpha, "mul")
    if tape is not None:
        tape.record("mean", [name], "mean", shape=f.shape)
        tape.record("var", [name], "var", f=f, mean=stats.mean)
        tape.record("fuse", ["mean", "var"], "z", stats=stats, params=p)
        tape.record("excite", ["z"], "alpha", z=z, hidden=h, alpha=alpha, params=p)
        tape.record("gate", [name, "alpha"], "out", f=f, alpha=alpha)
    return out, alpha


def ycda_forward(
    img,
    cfg: StemConfig,
    sp: DWConvParams,
    ip: IcaParams,
    transform: ColorTransform = BT601_FULL,
    tape: Optional[Tape] = None,
    check_range: bool = True,
):
    """RGB ``(..., 3, H, W)`` -> gated features ``(..., 24, H/2, W/2)`` and gates.

    Colour decoupling, unshuffle, depthwise conv, activation, then channel
    attention. Pass a :class:`Tape` to record intermediates for backward.
    """
    if ip.channels != cfg.out_channels:
        raise ConfigError(
            f"attention expects {ip.channels} channels, stem produces {cfg.out_channels}"
        )
    if sp.multiplier != cfg.multiplier or sp.kernel_size != cfg.kernel_size:
        raise ConfigError("stem parameters do not match the stem config")
    ycc = rgb_to_ycbcr(img, transform, check=check_range)
    u = pixel_unshuffle(ycc, cfg.unshuffle_factor)
    a = depthwise_conv(u, sp)
    f = activate(a, cfg.activation)
    if tape is not None:
        tape.record("color", ["input"], "ycc", transform=transform)
        tape.record("unshuffle", ["ycc"], "u", r=cfg.unshuffle_factor)
        tape.record("dwconv", ["u"], "a", u=u, params=sp)
        tape.record("act", ["a"], "f", pre=a, name=cfg.activation)
    return ica_forward(f, ip, tape)
