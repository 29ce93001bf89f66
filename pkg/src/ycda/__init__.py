"""YCbCr decoupled attention (YCDa) stem in plain numpy.

Colour decoupling, pixel-unshuffle plus depthwise downsampling and
variance-aware channel attention, with analytic gradients.
"""

__version__ = "0.1.0"

from .colorspace import BT601_FULL, BT709_FULL, rgb_to_ycbcr, ycbcr_to_rgb
from .ica import ChannelStats, IcaParams, compute_stats, excite, fuse_stats, ica_forward, ycda_forward
from .model import YcdaBlock, cost_report, init_block, load_block, save_block
from .stem import DWConvParams, StemConfig, depthwise_conv, pixel_shuffle, pixel_unshuffle, stem_forward

__all__ = [
    "BT601_FULL",
    "BT709_FULL",
    "ChannelStats",
    "DWConvParams",
    "IcaParams",
    "StemConfig",
    "YcdaBlock",
    "compute_stats",
    "cost_report",
    "depthwise_conv",
    "excite",
    "fuse_stats",
    "ica_forward",
    "init_block",
    "load_block",
    "pixel_shuffle",
    "pixel_unshuffle",
    "rgb_to_ycbcr",
    "save_block",
    "stem_forward",
    "ycbcr_to_rgb",
    "ycda_forward",
]
