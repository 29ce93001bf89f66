"""The assembled YCDa block: initialisation, weight files and cost accounting.

Weight file layout (all integers little-endian)::

    magic      4 bytes   b"YCDA"
    version    uint16    FORMAT_VERSION
    kind       uint8     0 = block weights, 1 = feature dump
    config     10 x int64  unshuffle_factor, multiplier, kernel_size,
                           in_channels, activation, reduction, variant,
                           mlp_bias, color, seed
    count      uint32    number of records
    record     name_len uint16, name utf-8, ndim uint8,
               dims ndim x uint32, data prod(dims) x float64

Enumerations are stored as indices into ``ACTIVATIONS``, ``VARIANTS`` and
``COLOR_SPACES``. A JSON manifest with the same basename lists the config
and record shapes for humans; it is never read back.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .colorspace import TRANSFORMS, ColorTransform
from .ica import VARIANTS, IcaParams, ycda_forward
from .stem import ACTIVATIONS, ConfigError, DWConvParams, StemConfig
from .trace import Tape

MAGIC = b"YCDA"
FORMAT_VERSION = 1
KIND_WEIGHTS = 0
KIND_FEATURES = 1
COLOR_SPACES = ("bt601-full", "bt709-full")
_CONFIG_FIELDS = (
    "unshuffle_factor",
    "multiplier",
    "kernel_size",
    "in_channels",
    "activation",
    "reduction",
    "variant",
    "mlp_bias",
    "color",
    "seed",
)
_HEAD = struct.Struct("<4sHB")
_CONFIG = struct.Struct("<" + "q" * len(_CONFIG_FIELDS))


class WeightFileError(ValueError):
    """Base class for weight/feature container errors."""


class BadMagicError(WeightFileError):
    pass


class VersionMismatchError(WeightFileError):
    pass


class TruncatedFileError(WeightFileError):
    pass


class WeightShapeError(WeightFileError):
    """A record's shape (or presence) disagrees with the header config."""


class WrongKindError(WeightFileError):
    pass


@dataclass(frozen=True)
class YcdaBlock:
    config: StemConfig
    stem: DWConvParams
    ica: IcaParams
    seed: int = 0
    color: str = "bt601-full"

    def __post_init__(self):
        c = self.config.out_channels
        if self.ica.channels != c:
            raise ConfigError(
                f"attention has {self.ica.channels} channels but the stem produces "
                f"3 * {self.config.unshuffle_factor}^2 * {self.config.multiplier} = {c}"
            )
        if self.stem.kernels.shape != (c, self.config.kernel_size, self.config.kernel_size):
            raise ConfigError(
                f"stem kernels {list(self.stem.kernels.shape)} inconsistent with config"
            )
        if self.stem.multiplier != self.config.multiplier:
            raise ConfigError("stem multiplier differs from config")
        if self.color not in TRANSFORMS:
            raise ConfigError(f"unknown colour space {self.color!r}")

    @property
    def transform(self) -> ColorTransform:
        return TRANSFORMS[self.color]

    def named_parameters(self) -> dict[str, np.ndarray]:
        params = {
            "stem.kernels": self.stem.kernels,
            "stem.bias": self.stem.bias,
            "ica.fuse_weight": self.ica.fuse_weight,
            "ica.fuse_bias": self.ica.fuse_bias,
            "ica.w1": self.ica.w1,
            "ica.b1": self.ica.b1,
            "ica.w2": self.ica.w2,
            "ica.b2": self.ica.b2,
        }
        return {k: v for k, v in params.items() if v is not None}

    def with_parameters(self, params: dict[str, np.ndarray]) -> "YcdaBlock":
        """Copy of the block with some or all parameters replaced."""
        cur = self.named_parameters()
        cur.update(params)
        stem = DWConvParams(cur["stem.kernels"], cur["stem.bias"], self.stem.multiplier)
        ica = IcaParams(
            cur["ica.fuse_weight"],
            cur["ica.fuse_bias"],
            cur["ica.w1"],
            cur.get("ica.b1"),
            cur["ica.w2"],
            cur.get("ica.b2"),
            reduction=self.ica.reduction,
            variant=self.ica.variant,
        )
        return dataclasses.replace(self, stem=stem, ica=ica)

    def num_params(self) -> int:
        return self.stem.num_params() + self.ica.num_params()

    def forward(self, img, tape: Optional[Tape] = None, check_range: bool = True):
        return ycda_forward(
            img, self.config, self.stem, self.ica, self.transform, tape, check_range
        )


def init_block(
    config: StemConfig = StemConfig(),
    seed: int = 0,
    reduction: int = 4,
    variant: str = "ica",
    mlp_bias: bool = True,
    color: str = "bt601-full",
) -> YcdaBlock:
    """Deterministic init: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases."""
    c = config.out_channels
    if reduction < 1 or c < reduction or c % reduction:
        raise ConfigError(
            f"channel count {c} must be a positive multiple of reduction {reduction}"
        )
    hidden = c // reduction
    k = config.kernel_size
    rng = np.random.default_rng(seed)

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    stem = DWConvParams(uniform((c, k, k), k * k), np.zeros(c), config.multiplier)
    ica = IcaParams(
        uniform((c, 2 * c), 2 * c),
        np.zeros(c),
        uniform((hidden, c), c),
        np.zeros(hidden) if mlp_bias else None,
        uniform((c, hidden), hidden),
        np.zeros(c) if mlp_bias else None,
        reduction=reduction,
        variant=variant,
    )
    return YcdaBlock(config, stem, ica, seed=seed, color=color)


# -- container I/O ----------------------------------------------------------


def _config_values(block: YcdaBlock) -> tuple[int, ...]:
    cfg = block.config
    return (
        cfg.unshuffle_factor,
        cfg.multiplier,
        cfg.kernel_size,
        cfg.in_channels,
        ACTIVATIONS.index(cfg.activation),
        block.ica.reduction,
        VARIANTS.index(block.ica.variant),
        int(block.ica.has_bias),
        COLOR_SPACES.index(block.color),
        block.seed,
    )


def _decode_config(values: tuple[int, ...], source: str) -> dict:
    raw = dict(zip(_CONFIG_FIELDS, values))
    negative = [k for k, v in raw.items() if v < 0 and k != "seed"]
    if negative:
        raise WeightFileError(f"{source}: invalid config in header: negative {negative}")
    try:
        return {
            "config": StemConfig(
                unshuffle_factor=raw["unshuffle_factor"],
                activation=ACTIVATIONS[raw["activation"]],
                multiplier=raw["multiplier"],
                kernel_size=raw["kernel_size"],
                in_channels=raw["in_channels"],
            ),
            "reduction": raw["reduction"],
            "variant": VARIANTS[raw["variant"]],
            "mlp_bias": bool(raw["mlp_bias"]),
            "color": COLOR_SPACES[raw["color"]],
            "seed": raw["seed"],
        }
    except (IndexError, ConfigError) as exc:
        raise WeightFileError(f"{source}: invalid config in header: {exc}") from exc


def write_container(path, block: YcdaBlock, records: dict[str, np.ndarray], kind: int) -> None:
    parts = [_HEAD.pack(MAGIC, FORMAT_VERSION, kind), _CONFIG.pack(*_config_values(block))]
    parts.append(struct.pack("<I", len(records)))
    for name, arr in records.items():
        arr = np.asarray(arr, dtype="<f8")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.source = source
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(
                f"{self.source}: file ends while reading {what} (need {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos})"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size, what))


def read_container(path) -> tuple[int, dict, dict[str, np.ndarray]]:
    """Parse a container into ``(kind, header, records)`` without shape checks."""
    r = _Reader(Path(path).read_bytes(), str(path))
    if r.data[:4] != MAGIC:
        raise BadMagicError(f"{path}: expected magic {MAGIC!r}, found {r.data[:4]!r}")
    _, version, kind = r.unpack(_HEAD.format, "header")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, this reader supports {FORMAT_VERSION}"
        )
    header = _decode_config(r.unpack(_CONFIG.format, "config"), str(path))
    (count,) = r.unpack("<I", "record count")
    records = {}
    for i in range(count):
        (n,) = r.unpack("<H", f"record {i} name length")
        name = r.take(n, f"record {i} name").decode("utf-8")
        (ndim,) = r.unpack("<B", f"record {name!r} rank")
        shape = r.unpack(f"<{ndim}I", f"record {name!r} shape")
        size = int(np.prod(shape, dtype=np.int64))
        buf = r.take(8 * size, f"record {name!r} data")
        records[name] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(r.data):
        raise WeightFileError(f"{path}: {len(r.data) - r.pos} trailing bytes after last record")
    return kind, header, records


def manifest(block: YcdaBlock, records: dict[str, np.ndarray], kind: int, extra=None) -> dict:
    doc = {
        "format": "YCDA",
        "version": FORMAT_VERSION,
        "kind": "weights" if kind == KIND_WEIGHTS else "features",
        "config": dict(zip(_CONFIG_FIELDS, _config_values(block))),
        "enums": {
            "activation": block.config.activation,
            "variant": block.ica.variant,
            "color": block.color,
        },
        "records": {k: list(np.shape(v)) for k, v in records.items()},
    }
    if extra:
        doc.update(extra)
    return doc


def manifest_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save_block(block: YcdaBlock, path, write_manifest: bool = True) -> None:
    records = block.named_parameters()
    write_container(path, block, records, KIND_WEIGHTS)
    if write_manifest:
        doc = manifest(block, records, KIND_WEIGHTS)
        manifest_path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_block(path) -> YcdaBlock:
    kind, header, records = read_container(path)
    if kind != KIND_WEIGHTS:
        raise WrongKindError(f"{path}: container holds features, not block weights")
    template = init_block(
        header["config"],
        seed=0,
        reduction=header["reduction"],
        variant=header["variant"],
        mlp_bias=header["mlp_bias"],
        color=header["color"],
    )
    expected = template.named_parameters()
    for name, ref in expected.items():
        if name not in records:
            raise WeightShapeError(f"{path}: parameter {name!r} missing")
        if records[name].shape != ref.shape:
            raise WeightShapeError(
                f"{path}: parameter {name!r} has shape {list(records[name].shape)}, "
                f"config requires {list(ref.shape)}"
            )
    extra = set(records) - set(expected)
    if extra:
        raise WeightShapeError(f"{path}: unexpected parameters {sorted(extra)}")
    block = template.with_parameters(records)
    return dataclasses.replace(block, seed=header["seed"])


# -- cost accounting --------------------------------------------------------


@dataclass(frozen=True)
class ConvStem:
    """A plain strided conv first layer, the conventional detector stem."""

    c_in: int = 3
    c_out: int = 64
    kernel_size: int = 3
    stride: int = 2
    bias: bool = True

    def num_params(self) -> int:
        return self.c_in * self.c_out * self.kernel_size**2 + (self.c_out if self.bias else 0)


@dataclass
class CostReport:
    name: str
    params: int
    macs_per_pixel: dict[str, float]
    output_channels: int
    output_stride: int
    next_layer_macs_per_pixel: float
    notes: list[str] = field(default_factory=list)

    @property
    def total_macs_per_pixel(self) -> float:
        return float(sum(self.macs_per_pixel.values()))

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["total_macs_per_pixel"] = self.total_macs_per_pixel
        return d


def _next_layer_macs(width: int, stride: int, next_layer: ConvStem) -> float:
    # next layer sees width channels at 1/stride resolution and downsamples again
    out_pixels = 1.0 / (stride * next_layer.stride) ** 2
    return width * next_layer.c_out * next_layer.kernel_size**2 * out_pixels


def cost_report(
    block: YcdaBlock,
    baseline: ConvStem = ConvStem(),
    image_size: tuple[int, int] = (640, 640),
    next_layer: ConvStem = ConvStem(c_in=64, c_out=128, kernel_size=3, stride=2),
) -> tuple[CostReport, CostReport]:
    """Parameter and multiply-accumulate counts per input pixel.

    Per-image costs (fusion, bottleneck) are amortised over ``image_size``.
    The next-layer figure prices an identical strided conv fed by each stem,
    so only the stem's output width differs between the two.
    """
    cfg = block.config
    r = cfg.unshuffle_factor
    c = cfg.out_channels
    k = cfg.kernel_size
    hidden = c // block.ica.reduction
    pixels = float(image_size[0] * image_size[1])
    per_out = 1.0 / (r * r)
    ycda_stages = {
        "color": 9.0,
        "depthwise": c * k * k * per_out,
        "stats": 2.0 * c * per_out,
        "fuse": c * 2 * c / pixels,
        "mlp": 2.0 * c * hidden / pixels,
        "gating": c * per_out,
    }
    limitation = (
        "stem-scope accounting only; whole-detector params/FLOPs/FPS need the host network"
    )
    ycda = CostReport(
        name="ycda",
        params=block.num_params(),
        macs_per_pixel=ycda_stages,
        output_channels=c,
        output_stride=r,
        next_layer_macs_per_pixel=_next_layer_macs(c, r, next_layer),
        notes=[limitation],
    )
    s = baseline.stride
    base = CostReport(
        name=f"conv{baseline.c_in}->{baseline.c_out}_k{baseline.kernel_size}_s{s}",
        params=baseline.num_params(),
        macs_per_pixel={
            "conv": baseline.c_in * baseline.c_out * baseline.kernel_size**2 / (s * s)
        },
        output_channels=baseline.c_out,
        output_stride=s,
        next_layer_macs_per_pixel=_next_layer_macs(baseline.c_out, s, next_layer),
        notes=[limitation],
    )
    return ycda, base
