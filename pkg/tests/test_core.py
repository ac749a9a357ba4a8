import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occkit.core import (
    Dataset,
    FeatureScaler,
    SplitSpec,
    apply_scaler,
    dataset_from_arrays,
    fit_scaler,
    load_csv,
    load_dataset,
    load_libsvm,
    n_train_targets,
    save_csv,
    split_one_class,
)
from occkit.exceptions import (
    DimensionMismatch,
    DomainError,
    EmptyDataset,
    IndexOrderError,
    NoTargetSamples,
    ParseError,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCSV:
    def test_unlabelled(self, tmp_path):
        ds = load_csv(write(tmp_path, "a.csv", "x,y\n1,2\n3,4\n5,6\n"))
        assert ds.n_samples == 3 and ds.n_features == 2
        assert ds.labels is None

    def test_label_column(self, tmp_path):
        ds = load_csv(write(tmp_path, "a.csv", "x,y,class\n1,2,1\n3,4,0\n5,6,2\n"), label_column="class")
        assert ds.n_features == 2
        np.testing.assert_array_equal(ds.labels, [True, False, False])

    def test_target_label_numeric_match(self, tmp_path):
        ds = load_csv(write(tmp_path, "a.csv", "x,class\n1,1.0\n2,0\n"), label_column="class")
        np.testing.assert_array_equal(ds.labels, [True, False])

    def test_nan_reports_row(self, tmp_path):
        with pytest.raises(ParseError, match="row 3"):
            load_csv(write(tmp_path, "a.csv", "x,y\n1,2\n3,NaN\n"))

    def test_garbage_reports_column(self, tmp_path):
        with pytest.raises(ParseError, match="column 1"):
            load_csv(write(tmp_path, "a.csv", "x,y\nfoo,2\n"))

    def test_ragged(self, tmp_path):
        with pytest.raises(DimensionMismatch):
            load_csv(write(tmp_path, "a.csv", "x,y\n1,2\n3\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_csv(tmp_path / "nope.csv")

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyDataset):
            load_csv(write(tmp_path, "a.csv", "x,y\n"))

    def test_roundtrip_exact(self, tmp_path):
        src = write(tmp_path, "a.csv", "x,y,class\n0.1,1e-300,1\n-2.5,3.141592653589793,0\n")
        ds = load_csv(src, label_column="class")
        out = tmp_path / "b.csv"
        save_csv(ds, out)
        again = load_csv(out, label_column="class")
        assert again == ds
        assert b"\r\n" not in out.read_bytes()


class TestLibsvm:
    def test_padding(self, tmp_path):
        ds = load_libsvm(write(tmp_path, "a.svm", "1 1:0.5 3:2.0\n"))
        np.testing.assert_array_equal(ds.X, [[0.5, 0.0, 2.0]])
        assert ds.labels[0]

    def test_minus_sign_outlier(self, tmp_path):
        ds = load_libsvm(write(tmp_path, "a.svm", "−1 2:1.0\n"))
        np.testing.assert_array_equal(ds.X, [[0.0, 1.0]])
        assert not ds.labels[0]

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyDataset):
            load_libsvm(write(tmp_path, "a.svm", ""))

    def test_non_increasing(self, tmp_path):
        with pytest.raises(IndexError):
            load_libsvm(write(tmp_path, "a.svm", "1 3:1 2:1\n"))
        with pytest.raises(IndexOrderError):
            load_libsvm(write(tmp_path, "a.svm", "1 2:1 2:1\n"))

    def test_dispatch(self, tmp_path):
        ds = load_dataset(write(tmp_path, "a.libsvm", "1 1:1\n-1 1:2\n"))
        assert ds.n_samples == 2


def labelled(n_target, n_outlier, d=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_target + n_outlier, d))
    return dataset_from_arrays(X, [True] * n_target + [False] * n_outlier, name="t")


class TestSplit:
    def test_table_counts(self):
        # rounded 80 % of the targets, as in the UCI reference table
        for n_target, n_train in [(178, 142), (77, 62), (70, 56), (147, 118), (356, 285), (111, 89)]:
            assert n_train_targets(n_target, 0.8) == n_train

    def test_blood_transfusion_sizes(self):
        ds = labelled(178, 570)
        train, test = split_one_class(ds, SplitSpec(0.8, 42))
        assert train.n_samples == 142 and test.n_samples == 606
        train, test = split_one_class(ds, SplitSpec(0.8, 42, test_includes_train=True))
        assert train.n_samples == 142 and test.n_samples == 748

    def test_train_is_targets_only(self):
        train, test = split_one_class(labelled(20, 10), SplitSpec(0.5, 1))
        assert train.labels.all()
        assert (~test.labels).sum() == 10

    def test_fraction_one(self):
        train, test = split_one_class(labelled(20, 10), SplitSpec(1.0, 1))
        assert train.n_samples == 20 and test.n_samples == 10

    def test_deterministic(self):
        ds = labelled(30, 5)
        a = split_one_class(ds, SplitSpec(0.8, 7))
        b = split_one_class(ds, SplitSpec(0.8, 7))
        assert a[0] == b[0] and a[1] == b[1]
        c = split_one_class(ds, SplitSpec(0.8, 8))
        assert not a[0] == c[0]

    def test_no_targets(self):
        with pytest.raises(NoTargetSamples):
            split_one_class(labelled(0, 5), SplitSpec())

    def test_bad_fraction(self):
        with pytest.raises(DomainError):
            SplitSpec(0.0)


class TestScaler:
    def test_minmax(self):
        p = fit_scaler(np.array([[1.0], [3.0]]), "minmax")
        np.testing.assert_array_equal(apply_scaler(np.array([[1.0], [3.0], [5.0]]), p), [[0], [1], [2]])

    def test_none_identity(self):
        X = np.array([[1.0, -2.0]])
        np.testing.assert_array_equal(apply_scaler(X, fit_scaler(X, "none")), X)

    def test_constant_zscore(self):
        p = fit_scaler(np.zeros((3, 1)), "zscore")
        assert p.constant[0]
        np.testing.assert_array_equal(apply_scaler(np.zeros((3, 1)), p), 0.0)

    def test_dataset_roundtrip_type(self):
        ds = labelled(5, 2)
        out = apply_scaler(ds, fit_scaler(ds, "minmax"))
        assert isinstance(out, Dataset)
        np.testing.assert_array_equal(out.labels, ds.labels)

    def test_transformer(self):
        X = np.arange(6.0).reshape(3, 2)
        Z = FeatureScaler("minmax").fit(X).transform(X)
        assert Z.min() == 0 and Z.max() == 1

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 30), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_minmax_train_range(self, n, d, seed):
        X = np.random.default_rng(seed).normal(size=(n, d)) * 10
        Z = apply_scaler(X, fit_scaler(X, "minmax"))
        assert Z.min() >= 0 and Z.max() <= 1


def test_dataset_validation():
    with pytest.raises(EmptyDataset):
        Dataset(np.empty((0, 2)))
    with pytest.raises(ParseError):
        Dataset(np.array([[np.inf]]))
    ds = labelled(3, 1)
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0
