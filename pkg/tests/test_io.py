import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangeseg.errors import DataError, FormatError
from rangeseg.pointcloud_io import (
    LabelSet,
    PointCloud,
    RemapTable,
    load_remap_table,
    read_labels,
    read_scan,
    remap_labels,
    write_labels,
    write_scan,
)


class TestReadScan:
    def test_sixteen_zero_bytes_is_one_origin_point(self):
        cloud = read_scan(b"\x00" * 16)
        assert len(cloud) == 1
        assert cloud.xyz.tolist() == [[0.0, 0.0, 0.0]]
        assert cloud.remission.tolist() == [0.0]

    def test_empty_bytes_is_empty_cloud(self):
        assert len(read_scan(b"")) == 0

    def test_reference_ieee754_encoding(self):
        # Expected bytes produced with the stdlib struct encoder.
        data = struct.pack("<4f", 1.0, 2.0, 3.0, 0.5)
        cloud = read_scan(data)
        assert cloud.xyz.tolist() == [[1.0, 2.0, 3.0]]
        assert cloud.remission.tolist() == [0.5]

    def test_bad_length_is_format_error(self):
        with pytest.raises(FormatError):
            read_scan(b"\x00" * 15)

    def test_nan_names_point_index(self):
        data = struct.pack("<8f", 1, 2, 3, 4, float("nan"), 0, 0, 0)
        with pytest.raises(DataError, match="point 1"):
            read_scan(data)

    def test_length_relation(self, rng):
        data = rng.random(4 * 7, dtype=np.float32).tobytes()
        assert len(read_scan(data)) * 16 == len(data)


class TestReadLabels:
    def test_zero_word(self):
        labels = read_labels(struct.pack("<I", 0))
        assert labels.semantic.tolist() == [0]
        assert labels.instance.tolist() == [0]

    def test_bit_split(self):
        labels = read_labels(struct.pack("<I", 0x0001000A))
        assert labels.semantic.tolist() == [10]
        assert labels.instance.tolist() == [1]

    def test_three_bytes_is_format_error(self):
        with pytest.raises(FormatError):
            read_labels(b"\x00\x00\x00")


class TestRoundTrip:
    def test_empty_cloud(self):
        assert write_scan(read_scan(b"")) == b""

    def test_random_points_byte_exact(self, rng):
        raw = rng.normal(0, 50, size=(1000, 4)).astype(np.float32).tobytes()
        assert write_scan(read_scan(raw)) == raw

    def test_labels_max_ids(self):
        labels = LabelSet(
            semantic=np.array([0xFFFF, 0], dtype=np.uint16),
            instance=np.array([0xFFFF, 0xFFFF], dtype=np.uint16),
        )
        assert read_labels(write_labels(labels)).semantic.tolist() == [0xFFFF, 0]
        assert write_labels(read_labels(write_labels(labels))) == write_labels(labels)

    @given(st.binary(max_size=400).map(lambda b: b[: len(b) - len(b) % 4]))
    @settings(max_examples=50)
    def test_any_label_words_round_trip(self, data):
        assert write_labels(read_labels(data)) == data

    @given(
        st.lists(
            st.floats(allow_nan=False, allow_infinity=False, width=32),
            max_size=80,
        ).map(lambda v: v[: len(v) - len(v) % 4])
    )
    @settings(max_examples=50)
    def test_any_finite_scan_round_trips(self, values):
        data = np.array(values, dtype="<f4").tobytes()
        assert write_scan(read_scan(data)) == data


class TestRemap:
    def test_identity_mapping(self):
        labels = LabelSet(
            semantic=np.array([0, 1, 2], dtype=np.uint16),
            instance=np.array([5, 6, 7], dtype=np.uint16),
        )
        table = RemapTable(mapping={0: 0, 1: 1, 2: 2}, num_classes=3)
        result = remap_labels(labels, table)
        assert result.labels.semantic.tolist() == [0, 1, 2]
        assert result.labels.instance.tolist() == [5, 6, 7]
        assert result.unmapped_count == 0

    def test_unlisted_goes_to_ignore_and_is_counted(self):
        labels = LabelSet(
            semantic=np.array([10, 10, 7], dtype=np.uint16),
            instance=np.zeros(3, dtype=np.uint16),
        )
        table = RemapTable(mapping={10: 0}, num_classes=1, ignore_id=255)
        result = remap_labels(labels, table)
        assert result.labels.semantic.tolist() == [0, 0, 255]
        assert result.unmapped_count == 1
        assert result.unmapped_ids == [7]

    def test_empty_labels(self):
        labels = LabelSet(
            semantic=np.array([], dtype=np.uint16), instance=np.array([], dtype=np.uint16)
        )
        result = remap_labels(labels, RemapTable(mapping={1: 0}, num_classes=1))
        assert len(result.labels) == 0

    def test_never_produces_out_of_range_ids(self, rng):
        labels = LabelSet(
            semantic=rng.integers(0, 300, 500).astype(np.uint16),
            instance=np.zeros(500, dtype=np.uint16),
        )
        table = RemapTable(mapping={10: 0, 44: 3, 251: 18}, num_classes=19)
        sem = remap_labels(labels, table).labels.semantic
        assert (((0 <= sem) & (sem < 19)) | (sem == 255)).all()

    def test_table_parser(self):
        table = load_remap_table("# comment\n10 0\n44 3  # inline\n\n99 255\n")
        assert table.mapping == {10: 0, 44: 3, 99: 255}
        assert table.num_classes == 4

    def test_table_parser_rejects_garbage(self):
        with pytest.raises(FormatError):
            load_remap_table("10 0 extra\n")
