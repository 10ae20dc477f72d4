import numpy as np
import pytest

from redungroup.datastore import (
    Dataset,
    export_lengths_csv,
    import_distance_matrix,
    import_lengths_csv,
    normalize,
    denormalize,
    select_channels,
    split_train_test,
    subsample,
)
from redungroup.errors import ParseError, ValidationError


def make_dataset(values):
    values = np.asarray(values, dtype=float)
    return Dataset(values=values, muscle_ids=tuple(range(values.shape[1])))


def test_normalize_constant_column_zeroed_and_flagged():
    ds = make_dataset([[1.0, 0.0], [1.0, 2.0], [1.0, 1.0]])
    out, stats = normalize(ds)
    assert np.all(out.values[:, 0] == 0.0)
    assert stats.constant.tolist() == [True, False]


def test_normalize_two_point_column():
    # population std of [0, 2] is 1, so values map to -1, +1
    ds = make_dataset([[0.0], [2.0]])
    out, _ = normalize(ds)
    assert np.allclose(out.values[:, 0], [-1.0, 1.0])


def test_normalize_round_trip():
    rng = np.random.default_rng(0)
    ds = make_dataset(rng.uniform(0.1, 2.0, size=(50, 6)))
    out, stats = normalize(ds)
    back = denormalize(out, stats)
    assert np.allclose(back.values, ds.values, atol=1e-9)


def test_normalize_rejects_double_normalization():
    ds = make_dataset([[0.0], [2.0]])
    out, _ = normalize(ds)
    with pytest.raises(ValidationError):
        normalize(out)


def test_normalized_columns_are_zscored():
    rng = np.random.default_rng(1)
    ds = make_dataset(rng.normal(3.0, 0.5, size=(200, 4)))
    out, _ = normalize(ds)
    assert np.all(np.abs(out.values.mean(axis=0)) < 1e-6)
    assert np.all(np.abs(out.values.std(axis=0) - 1.0) < 1e-6)


def test_split_sizes_80_20():
    ds = make_dataset(np.arange(20.0).reshape(10, 2))
    train, test = split_train_test(ds, 0.8, seed=0)
    assert train.n_rows == 8
    assert test.n_rows == 2


def test_split_partitions_rows_exactly():
    rng = np.random.default_rng(2)
    ds = make_dataset(rng.normal(size=(37, 3)))
    train, test = split_train_test(ds, 0.6, seed=5)
    merged = np.vstack([train.values, test.values])
    assert sorted(map(tuple, merged)) == sorted(map(tuple, ds.values))


def test_split_deterministic_per_seed():
    ds = make_dataset(np.random.default_rng(3).normal(size=(30, 2)))
    a1, b1 = split_train_test(ds, 0.5, seed=9)
    a2, b2 = split_train_test(ds, 0.5, seed=9)
    assert np.array_equal(a1.values, a2.values)
    assert np.array_equal(b1.values, b2.values)


def test_split_rejects_empty_side():
    ds = make_dataset([[1.0], [2.0]])
    with pytest.raises(ValidationError):
        split_train_test(ds, 0.95, seed=0)  # rounds to 2 train, 0 test


def test_csv_round_trip_lossless(tmp_path):
    rng = np.random.default_rng(4)
    ds = make_dataset(rng.normal(size=(20, 5)) * np.pi)
    path = tmp_path / "lengths.csv"
    export_lengths_csv(ds, path)
    back = import_lengths_csv(path)
    assert back.muscle_ids == ds.muscle_ids
    assert np.array_equal(back.values, ds.values)


def test_csv_shape(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text("0,1,2\n1.0,2.0,3.0\n4.0,5.0,6.0\n")
    ds = import_lengths_csv(path)
    assert ds.values.shape == (2, 3)


def test_csv_non_numeric_cell_names_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0,1\n1.0,abc\n")
    with pytest.raises(ParseError, match="row 2"):
        import_lengths_csv(path)


def test_csv_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("0,0\n1.0,2.0\n")
    with pytest.raises(ParseError):
        import_lengths_csv(path)


def test_csv_ragged_row_rejected(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("0,1\n1.0,2.0\n3.0\n")
    with pytest.raises(ParseError, match="row 3"):
        import_lengths_csv(path)


def test_distance_import_symmetric_unchanged(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0,1\n1,0\n")
    d = import_distance_matrix(path)
    assert np.array_equal(d, [[0.0, 1.0], [1.0, 0.0]])


def test_distance_import_symmetrizes_with_warning(tmp_path):
    path = tmp_path / "asym.csv"
    path.write_text("0,1\n3,0\n")
    with pytest.warns(UserWarning, match="asymmetric"):
        d = import_distance_matrix(path)
    assert d[0, 1] == d[1, 0] == 2.0


def test_distance_import_size_mismatch(tmp_path):
    path = tmp_path / "d2.csv"
    path.write_text("0,1\n1,0\n")
    with pytest.raises(ValidationError):
        import_distance_matrix(path, expected_size=3)


def test_distance_import_non_square(tmp_path):
    path = tmp_path / "rect.csv"
    path.write_text("0,1,2\n1,0,3\n")
    with pytest.raises(ValidationError):
        import_distance_matrix(path)


def test_subsample_and_select_channels():
    ds = make_dataset(np.arange(40.0).reshape(10, 4))
    sub = subsample(ds, 4, seed=0)
    assert sub.n_rows == 4
    sel = select_channels(ds, [2, 0])
    assert sel.muscle_ids == (2, 0)
    assert np.array_equal(sel.values[:, 0], ds.values[:, 2])
    with pytest.raises(ValidationError):
        select_channels(ds, [99])


def test_dataset_validation():
    with pytest.raises(ValidationError):
        Dataset(values=np.zeros((2, 2)), muscle_ids=(0,))
    with pytest.raises(ValidationError):
        Dataset(values=np.zeros((2, 2)), muscle_ids=(0, 0))
