"""Shared fixtures: the weight-file config matrix and the corrupted-file corpus."""

import itertools
import struct

from ycda.model import (
    BadMagicError,
    TruncatedFileError,
    VersionMismatchError,
    WeightFileError,
    WeightShapeError,
    WrongKindError,
    KIND_FEATURES,
    init_block,
    save_block,
    write_container,
)
from ycda.stem import StemConfig

# statistics of the default seeded pair, measured once and frozen
FROZEN_DEFAULT_PAIR = {
    "Y_mean": 0.5014571229832098,
    "Y_var": 0.0011319399029107646,
    "Cb_var_salient": 0.0011943589575854436,
    "Cb_var_camouflaged": 0.00010498995411344112,
    "Cr_var_salient": 0.001175540531497196,
    "Cr_var_camouflaged": 0.00010101684593202436,
}


def config_matrix():
    """Every block configuration the round-trip tests cover."""
    blocks = []
    shapes = [(2, 2, 3), (2, 1, 3), (1, 4, 1), (3, 4, 5), (4, 1, 3)]
    for (r, m, k), act in itertools.product(shapes, ("identity", "silu")):
        blocks.append(init_block(StemConfig(r, act, m, k), seed=r * 100 + m * 10 + k))
    for variant, bias, color in itertools.product(
        ("ica", "gap_only", "var_only"), (True, False), ("bt601-full", "bt709-full")
    ):
        blocks.append(init_block(seed=7 if bias else 2**40, variant=variant, mlp_bias=bias, color=color))
    blocks.append(init_block(StemConfig(), seed=5, reduction=2))
    blocks.append(init_block(StemConfig(), seed=6, reduction=24))
    return blocks


# byte offsets in the container layout
_VERSION_AT = 4
_KIND_AT = 6
_CONFIG_AT = 7
_RECORDS_AT = _CONFIG_AT + 8 * 10 + 4


def corrupted_weight_files(directory):
    """Write the negative corpus; returns ``[(label, path, expected_error)]``."""
    good = directory / "good.ycda"
    save_block(init_block(seed=1), good, write_manifest=False)
    data = good.read_bytes()
    cases = []

    def emit(label, blob, error):
        path = directory / f"{label}.ycda"
        path.write_bytes(blob)
        cases.append((label, path, error))

    emit("bad_magic", b"YCDB" + data[4:], BadMagicError)
    emit("png_magic", b"\x89PNG" + data[4:], BadMagicError)
    emit("empty", b"", BadMagicError)
    emit("version_2", data[:_VERSION_AT] + struct.pack("<H", 2) + data[_VERSION_AT + 2:], VersionMismatchError)
    emit("version_0", data[:_VERSION_AT] + struct.pack("<H", 0) + data[_VERSION_AT + 2:], VersionMismatchError)
    emit("truncated_header", data[:5], TruncatedFileError)
    emit("truncated_config", data[:_CONFIG_AT + 20], TruncatedFileError)
    emit("truncated_record_name", data[:_RECORDS_AT + 5], TruncatedFileError)
    emit("truncated_data", data[:-1], TruncatedFileError)
    emit("truncated_half", data[: len(data) // 2], TruncatedFileError)
    emit("trailing_bytes", data + b"\x00", WeightFileError)
    emit("features_kind", data[:_KIND_AT] + bytes([KIND_FEATURES]) + data[_KIND_AT + 1:], WrongKindError)

    # header says k=5 but the records hold 3x3 kernels
    k_field = _CONFIG_AT + 8 * 2
    emit("kernel_size_mismatch", data[:k_field] + struct.pack("<q", 5) + data[k_field + 8:], WeightShapeError)
    # header says multiplier 1 while records are for 24 channels
    m_field = _CONFIG_AT + 8
    emit("multiplier_mismatch", data[:m_field] + struct.pack("<q", 1) + data[m_field + 8:], WeightShapeError)
    emit("bad_activation_enum", data[:_CONFIG_AT + 32] + struct.pack("<q", 9) + data[_CONFIG_AT + 40:], WeightFileError)

    block = init_block(seed=1)
    records = block.named_parameters()
    records["ica.w1"] = records["ica.w1"].T
    path = directory / "transposed_w1.ycda"
    write_container(path, block, records, 0)
    cases.append(("transposed_w1", path, WeightShapeError))

    records = block.named_parameters()
    del records["ica.b2"]
    path = directory / "missing_b2.ycda"
    write_container(path, block, records, 0)
    cases.append(("missing_b2", path, WeightShapeError))

    records = dict(block.named_parameters(), extra=records["ica.b1"])
    path = directory / "extra_record.ycda"
    write_container(path, block, records, 0)
    cases.append(("extra_record", path, WeightShapeError))
    return cases


def malformed_ppm_files(directory):
    """Negative image corpus; returns ``[(label, path, expected_error)]``."""
    from ycda.ppm import (
        MalformedHeaderError,
        TruncatedImageError,
        UnreadableImageError,
        UnsupportedMaxValueError,
    )

    blobs = {
        "wrong_magic_p3": (b"P3\n2 2\n255\n" + b"0 " * 12, MalformedHeaderError),
        "wrong_magic_text": (b"hello world", MalformedHeaderError),
        "empty": (b"", MalformedHeaderError),
        "missing_maxval": (b"P6\n2 2\n", MalformedHeaderError),
        "non_numeric_width": (b"P6\nab 2\n255\n" + bytes(12), MalformedHeaderError),
        "negative_height": (b"P6\n2 -2\n255\n" + bytes(12), MalformedHeaderError),
        "zero_width": (b"P6\n0 2\n255\n", MalformedHeaderError),
        "zero_maxval": (b"P6\n2 2\n0\n" + bytes(12), MalformedHeaderError),
        "no_separator": (b"P6\n1 1\n255", MalformedHeaderError),
        "maxval_16bit": (b"P6\n2 2\n65535\n" + bytes(24), UnsupportedMaxValueError),
        "maxval_256": (b"P6\n2 2\n256\n" + bytes(24), UnsupportedMaxValueError),
        "truncated_pixels": (b"P6\n2 2\n255\n" + bytes(11), TruncatedImageError),
        "header_only": (b"P6\n4 4\n255\n", TruncatedImageError),
    }
    cases = []
    for label, (blob, error) in blobs.items():
        path = directory / f"{label}.ppm"
        path.write_bytes(blob)
        cases.append((label, path, error))
    cases.append(("missing_file", directory / "does_not_exist.ppm", UnreadableImageError))
    cases.append(("directory", directory, UnreadableImageError))
    return cases
