"""Seeded salient/camouflaged image pairs.

Each pair shares one luminance field: a value-noise background texture with
a differently textured object pasted in. The two members differ only in the
object's chroma. In the camouflaged image the object takes the background
chroma; in the salient one it is shifted by ``delta_chroma`` (Cb up, Cr
down). Images are built in YCbCr and converted to RGB without clamping, so
converting back reproduces the shared luminance exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .colorspace import rgb_to_ycbcr, ycbcr_to_rgb

SHAPES = ("disk", "patch")


@dataclass(frozen=True)
class SynthSpec:
    size: int = 32
    shape: str = "disk"
    object_radius: int = 4
    texture_contrast: float = 0.08
    delta_chroma: float = 0.15
    noise: float = 0.01
    background_chroma: tuple[float, float] = (0.45, 0.55)
    seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.size < 2:
            raise ValueError(f"image size must be >= 2, got {self.size}")
        if self.object_radius < 1 or 2 * self.object_radius > self.size:
            raise ValueError(
                f"object of radius {self.object_radius} does not fit a {self.size}px image"
            )
        if self.texture_contrast < 0 or self.noise < 0:
            raise ValueError("texture_contrast and noise must be non-negative")


# Training fixture: larger objects and a stronger chroma shift than the
# statistics fixture, so a linear head on pooled features has signal to find.
TOY_SPEC = SynthSpec(size=16, object_radius=7, delta_chroma=0.3, background_chroma=(0.4, 0.6))


def value_noise(size: int, cells: int, rng: np.random.Generator) -> np.ndarray:
    """Bilinearly interpolated lattice noise in [-1, 1], ``cells`` per side."""
    grid = rng.uniform(-1.0, 1.0, size=(cells + 1, cells + 1))
    t = np.linspace(0.0, cells, size, endpoint=False) + cells / (2.0 * size)
    i0 = np.minimum(t.astype(int), cells - 1)
    fr = t - i0
    rows = grid[i0] * (1 - fr)[:, None] + grid[i0 + 1] * fr[:, None]
    return rows[:, i0] * (1 - fr)[None, :] + rows[:, i0 + 1] * fr[None, :]


def object_mask(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    r = spec.object_radius
    cy, cx = rng.integers(r, spec.size - r + 1, size=2)
    yy, xx = np.mgrid[0:spec.size, 0:spec.size]
    if spec.shape == "disk":
        return (yy - cy + 0.5) ** 2 + (xx - cx + 0.5) ** 2 <= r * r
    return (np.abs(yy - cy + 0.5) <= r) & (np.abs(xx - cx + 0.5) <= r)


def synth_pair(spec: SynthSpec = SynthSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(salient, camouflaged)`` RGB images of shape ``(3, S, S)``."""
    rng = np.random.default_rng(spec.seed)
    s = spec.size
    mask = object_mask(spec, rng)
    background = value_noise(s, max(2, s // 8), rng)
    texture = value_noise(s, max(2, s // 3), rng)
    luma = 0.5 + spec.texture_contrast * np.where(mask, texture, background)
    luma = luma + spec.noise * rng.standard_normal((s, s))
    chroma_noise = spec.noise * rng.standard_normal((2, s, s))

    def build(delta: float) -> np.ndarray:
        cb0, cr0 = spec.background_chroma
        cb = cb0 + delta * mask + chroma_noise[0]
        cr = cr0 - delta * mask + chroma_noise[1]
        rgb = ycbcr_to_rgb(np.stack([luma, cb, cr]), clamp=False)
        if rgb.min() < 0.0 or rgb.max() > 1.0:
            raise ValueError(
                "spec produces colours outside the RGB gamut; lower contrast, noise or delta_chroma"
            )
        return rgb

    camouflaged = build(0.0)
    salient = build(spec.delta_chroma) if spec.delta_chroma != 0 else camouflaged.copy()
    return salient, camouflaged


def synth_pairs(n: int, spec: SynthSpec = SynthSpec()) -> tuple[np.ndarray, np.ndarray]:
    """``n`` pairs with per-pair seeds spawned from ``spec.seed``.

    Returns ``(salient, camouflaged)`` stacks of shape ``(n, 3, S, S)``.
    """
    seeds = np.random.SeedSequence(spec.seed).generate_state(n, dtype=np.uint32)
    pairs = [synth_pair(replace(spec, seed=int(sd))) for sd in seeds]
    if not pairs:
        empty = np.zeros((0, 3, spec.size, spec.size))
        return empty, empty.copy()
    sal, cam = zip(*pairs)
    return np.stack(sal), np.stack(cam)


def toy_dataset(n_pairs: int = 256, spec: SynthSpec = TOY_SPEC, seed: int = 0):
    """Interleaved images ``(2n, 3, S, S)`` and labels (1 salient, 0 camouflaged)."""
    sal, cam = synth_pairs(n_pairs, replace(spec, seed=seed))
    images = np.empty((2 * n_pairs, 3, spec.size, spec.size))
    images[0::2] = sal
    images[1::2] = cam
    labels = np.tile(np.array([1, 0]), n_pairs)
    return images, labels


def luminance(img: np.ndarray) -> np.ndarray:
    return rgb_to_ycbcr(img)[..., 0, :, :]
