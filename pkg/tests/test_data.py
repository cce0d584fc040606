import gzip

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asdcd import Dataset, ParseError, fold_labels, load_dataset, parse_libsvm, partition_indices
from asdcd.data import read_text

from conftest import TOYS, toy_path


def test_parse_single_row():
    rows, labels, d = parse_libsvm("+1 1:0.5 3:-2\n")
    assert d == 3
    assert labels.tolist() == [1.0]
    idx, val = rows[0]
    assert idx.tolist() == [0, 2]
    assert val.tolist() == [0.5, -2.0]


def test_parse_empty_input():
    rows, labels, d = parse_libsvm("")
    assert rows == [] and len(labels) == 0 and d == 0
    ds = fold_labels(rows, labels)
    assert ds.n == 0 and ds.d == 0


def test_parse_skips_comments_and_blank_lines():
    text = "# header\n\n-1 2:1.5  # trailing\n   \n+1 1:1\n"
    rows, labels, d = parse_libsvm(text)
    assert labels.tolist() == [-1.0, 1.0]
    assert d == 2


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("-1 2:1 1:1\n", 1),
        ("+1 1:1\n-1 3:1 3:2\n", 2),
        ("+1 1:1\n+1 0:1\n", 2),
        ("+1 1:abc\n", 1),
        ("+1 1\n", 1),
        ("+1 x:1\n", 1),
        ("yes 1:1\n", 1),
        ("+1 1:nan\n", 1),
        ("+1 1:1\n\n# c\n+1 2:inf\n", 4),
    ],
)
def test_parse_errors_carry_line_number(text, lineno):
    with pytest.raises(ParseError) as info:
        parse_libsvm(text)
    assert info.value.lineno == lineno
    assert f"line {lineno}" in str(info.value)


def test_explicit_zeros_dropped():
    rows, _, d = parse_libsvm("+1 1:0 2:3 4:0\n")
    assert rows[0][0].tolist() == [1]
    assert d == 4


def test_fold_flips_sign():
    ds = fold_labels([(np.array([0]), np.array([0.5]))], [-1])
    assert ds.row(0).values.tolist() == [-0.5]
    assert ds.norm_sq.tolist() == [0.25]
    assert ds.labels.tolist() == [-1.0]


def test_fold_norm_3_4_5():
    ds = fold_labels([(np.array([1, 4]), np.array([3.0, 4.0]))], [1])
    assert ds.norm_sq[0] == 25.0


def test_fold_rejects_non_binary_label():
    with pytest.raises(ValueError, match="hinge"):
        fold_labels([(np.array([0]), np.array([1.0]))], [0], loss="hinge")


def test_fold_rejects_empty_row():
    with pytest.raises(ValueError, match="no nonzero"):
        fold_labels(*parse_libsvm("+1 1:0\n")[:2])


def test_dimension_override():
    rows, labels, d = parse_libsvm("+1 2:1\n")
    assert fold_labels(rows, labels, 7).d == 7
    with pytest.raises(ValueError):
        fold_labels(rows, labels, 1)


def test_dataset_is_read_only():
    ds = fold_labels(*parse_libsvm("+1 1:1 2:2\n")[:2])
    with pytest.raises(ValueError):
        ds.values[0] = 3.0


def test_normalized_rows_have_unit_norm():
    ds = load_dataset(toy_path("toy200"), normalize=True)
    np.testing.assert_allclose(ds.norm_sq, 1.0, rtol=1e-14)


@pytest.mark.parametrize("name", TOYS)
def test_committed_toy_round_trip(name):
    ds = load_dataset(toy_path(name))
    rows, labels, d = parse_libsvm(ds.to_libsvm())
    assert fold_labels(rows, labels, d) == ds


def test_gzip_input(tmp_path):
    raw = toy_path("toy40").read_bytes()
    gz = tmp_path / "toy40.svm.gz"
    gz.write_bytes(gzip.compress(raw))
    assert read_text(gz) == raw
    assert load_dataset(gz) == load_dataset(toy_path("toy40"))


finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6).filter(lambda v: abs(v) >= 1e-150)  # squares stay normal


@st.composite
def raw_datasets(draw):
    n = draw(st.integers(1, 8))
    d = draw(st.integers(1, 10))
    rows = []
    for _ in range(n):
        idx = sorted(draw(st.sets(st.integers(0, d - 1), min_size=1, max_size=d)))
        vals = [draw(finite) for _ in idx]
        rows.append((np.array(idx, dtype=np.int64), np.array(vals)))
    labels = draw(st.lists(st.sampled_from([1.0, -1.0]), min_size=n, max_size=n))
    return rows, labels, d


@settings(max_examples=200, deadline=None)
@given(raw_datasets())
def test_round_trip_is_bit_identical(raw):
    rows, labels, d = raw
    ds = fold_labels(rows, labels, d)
    again_rows, again_labels, inferred = parse_libsvm(ds.to_libsvm())
    again = fold_labels(again_rows, again_labels, d)
    assert again == ds
    assert inferred <= d


@settings(max_examples=200, deadline=None)
@given(raw_datasets())
def test_row_invariants(raw):
    ds = fold_labels(*raw)
    for i in range(ds.n):
        row = ds.row(i)
        assert np.all(np.diff(row.indices) > 0)
        assert np.all(row.values != 0.0)
        assert len(row) > 0
        np.testing.assert_allclose(row.norm_sq, np.sum(row.values**2), rtol=1e-12)
    assert ds.indices.max() < ds.d


def test_partition_single_block():
    part = partition_indices(4, 1, seed=3)
    assert len(part) == 1
    assert sorted(part.blocks[0].tolist()) == [0, 1, 2, 3]


def test_partition_two_blocks():
    part = partition_indices(5, 2, seed=0)
    assert sorted(len(b) for b in part.blocks) == [2, 3]
    assert set(part.blocks[0]).isdisjoint(part.blocks[1])


def test_partition_deterministic():
    a = partition_indices(1000, 4, seed=11)
    b = partition_indices(1000, 4, seed=11)
    assert all(np.array_equal(x, y) for x, y in zip(a.blocks, b.blocks))


def test_partition_rejects_zero_threads():
    with pytest.raises(ValueError):
        partition_indices(10, 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 300), st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_partition_covers(n, p, seed):
    part = partition_indices(n, p, seed)
    flat = np.sort(np.concatenate(part.blocks))
    assert np.array_equal(flat, np.arange(n))
    sizes = [len(b) for b in part.blocks]
    assert len(sizes) == p and max(sizes) - min(sizes) <= 1


@pytest.mark.parametrize("value", [1e200, 1e-200])
def test_row_norm_outside_float_range_rejected(value):
    with pytest.raises(ValueError, match="row 1"):
        fold_labels([(np.array([0]), np.array([1.0])), (np.array([0]), np.array([value]))], [1, -1])
