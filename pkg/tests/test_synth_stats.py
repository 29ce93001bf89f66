import csv
import io
from dataclasses import replace

import numpy as np
import pytest

from corpus import FROZEN_DEFAULT_PAIR
from ycda.colorspace import rgb_to_ycbcr
from ycda.stats import COLUMNS, compare_groups, group_summary, stats_report, to_csv
from ycda.synth import SynthSpec, TOY_SPEC, luminance, synth_pair, synth_pairs, toy_dataset


def test_pair_shapes_and_range():
    sal, cam = synth_pair()
    assert sal.shape == cam.shape == (3, 32, 32)
    assert 0 <= min(sal.min(), cam.min()) and max(sal.max(), cam.max()) <= 1


def test_luminance_identical_across_pair():
    for seed in range(10):
        sal, cam = synth_pair(SynthSpec(seed=seed))
        assert np.abs(luminance(sal) - luminance(cam)).max() < 1e-9


def test_zero_delta_gives_identical_pair():
    sal, cam = synth_pair(SynthSpec(delta_chroma=0.0))
    assert sal.tobytes() == cam.tobytes()


def test_camouflaged_object_chroma_matches_background():
    spec = SynthSpec(noise=0.0)
    sal, cam = synth_pair(spec)
    diff = rgb_to_ycbcr(sal) - rgb_to_ycbcr(cam)
    mask = np.abs(diff[1]) > 1e-9
    assert mask.any()
    np.testing.assert_allclose(diff[1][mask], spec.delta_chroma, atol=1e-12)
    np.testing.assert_allclose(diff[2][mask], -spec.delta_chroma, atol=1e-12)
    np.testing.assert_allclose(rgb_to_ycbcr(cam)[1], spec.background_chroma[0], atol=1e-12)


def test_seeded_determinism():
    a = synth_pairs(3, SynthSpec(seed=11))
    b = synth_pairs(3, SynthSpec(seed=11))
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()
    assert a[0][0].tobytes() != a[0][1].tobytes()


@pytest.mark.parametrize(
    "kwargs", [{"object_radius": 17}, {"object_radius": 0}, {"shape": "star"}, {"size": 1}, {"noise": -1.0}]
)
def test_degenerate_specs(kwargs):
    with pytest.raises(ValueError):
        SynthSpec(**kwargs)


def test_out_of_gamut_spec_is_rejected():
    with pytest.raises(ValueError, match="gamut"):
        synth_pair(SynthSpec(delta_chroma=0.9))


def test_patch_shape():
    sal, cam = synth_pair(SynthSpec(shape="patch", object_radius=5))
    diff = np.abs(rgb_to_ycbcr(sal)[1] - rgb_to_ycbcr(cam)[1]) > 1e-9
    rows, cols = np.nonzero(diff)
    assert diff.sum() == (rows.max() - rows.min() + 1) * (cols.max() - cols.min() + 1)


def test_default_pair_regression_values():
    sal, cam = synth_pair()
    rows = stats_report([sal, cam], ["s", "c"], ["salient", "camouflaged"])
    s, c = rows
    f = FROZEN_DEFAULT_PAIR
    assert s.mean[0] == pytest.approx(f["Y_mean"], abs=1e-12)
    assert s.var[0] == c.var[0] == pytest.approx(f["Y_var"], abs=1e-12)
    assert s.var[1] == pytest.approx(f["Cb_var_salient"], abs=1e-12)
    assert c.var[1] == pytest.approx(f["Cb_var_camouflaged"], abs=1e-12)
    assert s.var[2] == pytest.approx(f["Cr_var_salient"], abs=1e-12)
    assert c.var[2] == pytest.approx(f["Cr_var_camouflaged"], abs=1e-12)
    assert s.var[1] >= 2 * c.var[1]


def test_solid_image_has_zero_variance():
    (row,) = stats_report([np.full((3, 4, 4), 0.3)])
    assert row.var == (0.0, 0.0, 0.0)


def test_csv_schema_and_summary():
    sal, cam = synth_pairs(2)
    rows = stats_report([sal[0], cam[0], sal[1], cam[1]], list("abcd"),
                        ["salient", "camouflaged"] * 2)
    text = to_csv(rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert tuple(parsed[0]) == COLUMNS
    assert [r[0] for r in parsed[1:]] == ["a", "b", "c", "d", "summary[n=2]", "summary[n=2]"]
    assert "," not in "".join(parsed[1][2:]) and all("." in v or "e" in v for v in parsed[1][2:])
    g = group_summary(rows)
    np.testing.assert_allclose(g["salient"].var, np.mean([rows[0].var, rows[2].var], axis=0))


def test_compare_groups_signs():
    rows = stats_report([*synth_pair()], labels=["salient", "camouflaged"])
    g = group_summary(rows)
    cmp = compare_groups(g["salient"], g["camouflaged"])
    assert cmp["var_rel_change"]["Cb"] < -0.5 and cmp["var_rel_change"]["Y"] == 0


def test_stats_report_validation():
    with pytest.raises(ValueError):
        stats_report([])
    with pytest.raises(ValueError):
        stats_report([np.zeros((3, 2, 2))], ids=["a", "b"])


def test_toy_dataset_layout():
    images, labels = toy_dataset(3, seed=4)
    assert images.shape == (6, 3, TOY_SPEC.size, TOY_SPEC.size)
    assert list(labels) == [1, 0, 1, 0, 1, 0]
    sal, cam = synth_pairs(3, replace(TOY_SPEC, seed=4))
    np.testing.assert_array_equal(images[0::2], sal)
    np.testing.assert_array_equal(images[1::2], cam)
