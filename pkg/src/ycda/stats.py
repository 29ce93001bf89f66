"""Per-image Y/Cb/Cr mean and variance table, and group comparisons."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .colorspace import BT601_FULL, ColorTransform, rgb_to_ycbcr
from .tensor import spatial_mean, spatial_var

CHANNELS = ("Y", "Cb", "Cr")
COLUMNS = ("id", "label", "Y_mean", "Cb_mean", "Cr_mean", "Y_var", "Cb_var", "Cr_var")


@dataclass(frozen=True)
class StatsRow:
    image_id: str
    label: str
    mean: tuple[float, float, float]
    var: tuple[float, float, float]

    def values(self) -> list:
        return [self.image_id, self.label, *self.mean, *self.var]


def image_stats(
    img, image_id: str, label: str = "", transform: ColorTransform = BT601_FULL
) -> StatsRow:
    ycc = rgb_to_ycbcr(img, transform)
    mean = tuple(float(v) for v in spatial_mean(ycc))
    var = tuple(float(v) for v in spatial_var(ycc))
    return StatsRow(image_id, label, mean, var)


def stats_report(
    images: Sequence[np.ndarray],
    ids: Optional[Sequence[str]] = None,
    labels: Optional[Sequence[str]] = None,
    transform: ColorTransform = BT601_FULL,
) -> list[StatsRow]:
    """One :class:`StatsRow` per image, in input order."""
    if len(images) == 0:
        raise ValueError("need at least one image")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(images))]
    labels = list(labels) if labels is not None else [""] * len(images)
    if not len(ids) == len(labels) == len(images):
        raise ValueError("images, ids and labels must have the same length")
    return [image_stats(im, i, lab, transform) for im, i, lab in zip(images, ids, labels)]


def group_summary(rows: Sequence[StatsRow]) -> dict[str, StatsRow]:
    """Average row per non-empty label, in first-seen label order."""
    groups: dict[str, list[StatsRow]] = {}
    for row in rows:
        if row.label:
            groups.setdefault(row.label, []).append(row)
    out = {}
    for label, members in groups.items():
        mean = tuple(float(np.mean([r.mean[i] for r in members])) for i in range(3))
        var = tuple(float(np.mean([r.var[i] for r in members])) for i in range(3))
        out[label] = StatsRow(f"summary[n={len(members)}]", label, mean, var)
    return out


def compare_groups(a: StatsRow, b: StatsRow) -> dict[str, dict[str, float]]:
    """How statistics move from group ``a`` to group ``b``.

    ``gap_abs_diff`` is ``|mean_b - mean_a|``; ``var_rel_change`` is
    ``(var_b - var_a) / var_a`` (negative when variance drops).
    """
    out: dict[str, dict[str, float]] = {"gap_abs_diff": {}, "var_rel_change": {}}
    for i, ch in enumerate(CHANNELS):
        out["gap_abs_diff"][ch] = abs(b.mean[i] - a.mean[i])
        denom = a.var[i]
        out["var_rel_change"][ch] = (b.var[i] - denom) / denom if denom > 0 else float("nan")
    return out


def _fmt(v) -> str:
    return format(v, ".10g") if isinstance(v, float) else str(v)


def to_csv(rows: Sequence[StatsRow], summary: bool = True) -> str:
    """CSV text with fixed columns; summary rows (one per label) follow the data."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(v) for v in row.values()])
    if summary:
        for row in group_summary(rows).values():
            writer.writerow([_fmt(v) for v in row.values()])
    return buf.getvalue()
