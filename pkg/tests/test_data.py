import numpy as np
import pytest

from cglb import data
from cglb.errors import MissingTarget, ParseError, TooFewRows


class TestLoadCsv:
    def test_small_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,target\n1,2,3\n4,5,6\n7,8,9\n")
        ds = data.load_csv(str(path), "target")
        assert ds.n == 3 and ds.d == 2
        assert ds.feature_names == ["a", "b"]
        np.testing.assert_array_equal(ds.y, [3.0, 6.0, 9.0])

    def test_nan_rejected_with_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,target\n1,2\nNaN,4\n")
        with pytest.raises(ParseError, match="row 3"):
            data.load_csv(str(path), "target")

    def test_non_numeric_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,target\n1,2\nfoo,4\n")
        with pytest.raises(ParseError, match="column 'a'"):
            data.load_csv(str(path), "target")

    def test_missing_target(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(MissingTarget):
            data.load_csv(str(path), "target")

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,target\n1,2\n3\n")
        with pytest.raises(ParseError, match="row 3"):
            data.load_csv(str(path), "target")

    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = data.Dataset(X=rng.standard_normal((20, 3)) * 1e3,
                          y=rng.standard_normal(20) / 7.0,
                          feature_names=["a", "b", "c"], target_name="t")
        path = tmp_path / "rt.csv"
        data.write_csv(str(path), ds)
        back = data.load_csv(str(path), "t")
        np.testing.assert_array_equal(back.X, ds.X)
        np.testing.assert_array_equal(back.y, ds.y)


class TestSplitStandardize:
    def test_two_thirds_split(self):
        ds = data.synthetic_sine(9, 1, seed=0)
        train, test, _ = data.split_standardize(ds, 2.0 / 3.0, seed=0)
        assert train.n == 6 and test.n == 3

    def test_same_seed_same_split(self):
        ds = data.synthetic_sine(50, 2, seed=1)
        t1, e1, _ = data.split_standardize(ds, seed=7)
        t2, e2, _ = data.split_standardize(ds, seed=7)
        np.testing.assert_array_equal(t1.X, t2.X)
        np.testing.assert_array_equal(e1.y, e2.y)

    def test_different_seed_differs(self):
        ds = data.synthetic_sine(50, 2, seed=1)
        t1, _, _ = data.split_standardize(ds, seed=1)
        t2, _, _ = data.split_standardize(ds, seed=2)
        assert not np.array_equal(t1.X, t2.X)

    def test_standardisation_invariants(self):
        ds = data.synthetic_sine(200, 3, seed=2)
        train, test, stats = data.split_standardize(ds, seed=3)
        np.testing.assert_allclose(train.X.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(train.X.std(axis=0), 1.0, atol=1e-8)
        assert abs(train.y.mean()) <= 1e-10
        assert abs(train.y.std() - 1.0) <= 1e-8
        # test split re-standardised with train statistics
        raw_idx = None  # reconstruct: destandardise and compare moments
        np.testing.assert_allclose(test.X * stats.x_std + stats.x_mean,
                                   test.X * stats.x_std + stats.x_mean)

    def test_constant_column_clamped_with_warning(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((30, 2))
        X[:, 1] = 4.2
        ds = data.Dataset(X=X, y=rng.standard_normal(30),
                          feature_names=["a", "b"])
        with pytest.warns(UserWarning, match="constant column"):
            train, _, stats = data.split_standardize(ds, seed=0)
        assert stats.x_std[1] == 1.0
        np.testing.assert_allclose(train.X[:, 1], 0.0, atol=1e-12)

    def test_too_few_rows(self):
        ds = data.Dataset(X=np.zeros((2, 1)), y=np.zeros(2), feature_names=["a"])
        with pytest.raises(TooFewRows):
            data.split_standardize(ds)

    def test_bad_fraction(self):
        ds = data.synthetic_sine(10, 1)
        with pytest.raises(ValueError):
            data.split_standardize(ds, fraction=1.5)


class TestSynthetic:
    def test_sine_shapes_and_determinism(self):
        a = data.synthetic_sine(40, 2, noise_std=0.1, seed=5)
        b = data.synthetic_sine(40, 2, noise_std=0.1, seed=5)
        assert a.X.shape == (40, 2)
        np.testing.assert_array_equal(a.y, b.y)

    def test_gp_draw_marginal_scale(self):
        ds = data.synthetic_gp(400, 2, variance=1.0, lengthscale=0.3,
                               noise_variance=0.05, seed=6)
        # marginal variance of the draw is roughly variance + noise
        assert 0.4 <= ds.y.var() <= 2.5
