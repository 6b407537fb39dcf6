import numpy as np
import pytest

from lgprep import features
from lgprep.features import (
    FLATTENED,
    LINE_PROFILE,
    apply_standardizer,
    feature_dim,
    fit_standardizer,
    flatten_baseline,
    lg_preprocess,
    lg_preprocess_batch,
    line_profiles,
    read_features_csv,
    write_features_csv,
)
from lgprep.imagecore import LabeledDataset
from lgprep.lgfilter import laguerre_gauss_filter
from lgprep.spectral import dft2_naive, fftshift

from conftest import rel_error


class TestLineProfiles:
    def test_all_ones(self):
        out = line_profiles(np.ones((6, 6), dtype=complex))
        assert np.array_equal(out, np.ones(12))

    def test_center_delta_appears_twice(self):
        arr = np.zeros((4, 4), dtype=complex)
        arr[2, 2] = 7.0
        out = line_profiles(arr)
        assert out.shape == (8,)
        assert np.count_nonzero(out == 7.0) == 2
        assert np.count_nonzero(out) == 2

    def test_row_then_column(self):
        arr = np.arange(16, dtype=complex).reshape(4, 4)
        out = line_profiles(arr)
        assert np.array_equal(out[:4], np.abs(arr[2, :]))
        assert np.array_equal(out[4:], np.abs(arr[:, 2]))

    def test_length_for_64(self, rng):
        arr = rng.standard_normal((64, 64)) * 1j
        assert line_profiles(arr).shape == (128,)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            line_profiles(np.ones((4, 6), dtype=complex))


class TestLgPreprocess:
    def test_zero_image_zero_vector(self):
        for mode in ("full", "no_convolution", "no_shift"):
            out = lg_preprocess(np.zeros((8, 8)), mode=mode)
            assert np.array_equal(out, np.zeros(16))

    def test_full_output_shape_and_range(self, rng):
        out = lg_preprocess(rng.random((64, 64)))
        assert out.shape == (128,)
        assert np.all(np.isfinite(out)) and np.all(out >= 0)

    def test_full_matches_step_by_step_naive_oracle(self, rng):
        # independently coded composition of the published steps using
        # the naive transform, against the production pipeline
        img = rng.random((8, 8))
        spec_img = dft2_naive(img)
        spec_filt = dft2_naive(laguerre_gauss_filter(0.9, 8))
        shifted = fftshift(spec_img * spec_filt)
        mid = 4
        want = np.concatenate([np.abs(shifted[mid, :]), np.abs(shifted[:, mid])])
        got = lg_preprocess(img, omega=0.9, mode="full")
        assert rel_error(got, want) < 1e-8

    def test_no_convolution_skips_filter(self, rng):
        img = rng.random((8, 8))
        shifted = fftshift(dft2_naive(img))
        want = np.concatenate([np.abs(shifted[4, :]), np.abs(shifted[:, 4])])
        assert rel_error(lg_preprocess(img, mode="no_convolution"), want) < 1e-8

    def test_no_shift_skips_shift(self, rng):
        img = rng.random((8, 8))
        unshifted = dft2_naive(img) * dft2_naive(laguerre_gauss_filter(0.9, 8))
        want = np.concatenate([np.abs(unshifted[4, :]), np.abs(unshifted[:, 4])])
        assert rel_error(lg_preprocess(img, mode="no_shift"), want) < 1e-8

    def test_no_shift_multiset_differs_from_full(self, rng):
        img = rng.random((16, 16))
        full = np.sort(lg_preprocess(img, mode="full"))
        noshift = np.sort(lg_preprocess(img, mode="no_shift"))
        assert not np.allclose(full, noshift)

    def test_scaling_equivariance(self, rng):
        img = rng.random((16, 16))
        base = lg_preprocess(img)
        for alpha in (0.0, 0.5, 3.0):
            assert rel_error(lg_preprocess(alpha * img), alpha * base) < 1e-9

    def test_deterministic(self, rng):
        img = rng.random((32, 32))
        assert np.array_equal(lg_preprocess(img), lg_preprocess(img))

    def test_validation(self, rng):
        with pytest.raises(ValueError):
            lg_preprocess(rng.random((4, 6)))
        with pytest.raises(ValueError):
            lg_preprocess(rng.random((8, 8)), mode="half")
        with pytest.raises(ValueError):
            lg_preprocess(rng.random((8, 8)), omega=-1.0)


class TestBatch:
    def test_batch_equals_single(self, rng):
        imgs = [rng.random((16, 16)) for _ in range(5)]
        ds = LabeledDataset(
            items=[(im, 0) for im in imgs], class_names=["x"], split="train"
        )
        for mode in ("full", "no_convolution", "no_shift"):
            mat = lg_preprocess_batch(ds, mode=mode)
            for i, im in enumerate(imgs):
                assert np.array_equal(mat[i], lg_preprocess(im, mode=mode))

    def test_worker_count_does_not_change_bits(self, rng):
        ds = LabeledDataset(
            items=[(rng.random((16, 16)), 0) for _ in range(9)],
            class_names=["x"],
            split="train",
        )
        a = lg_preprocess_batch(ds, workers=1)
        b = lg_preprocess_batch(ds, workers=4)
        assert np.array_equal(a, b)

    def test_chunk_boundaries(self, rng, monkeypatch):
        monkeypatch.setattr(features, "_CHUNK", 4)
        imgs = [rng.random((8, 8)) for _ in range(10)]
        ds = LabeledDataset(
            items=[(im, 0) for im in imgs], class_names=["x"], split="train"
        )
        mat = lg_preprocess_batch(ds, workers=3)
        for i, im in enumerate(imgs):
            assert np.array_equal(mat[i], lg_preprocess(im))

    def test_size_homogeneity_checked(self, rng):
        ds = LabeledDataset(
            items=[(rng.random((8, 8)), 0), (rng.random((16, 16)), 0)],
            class_names=["x"],
            split="train",
        )
        with pytest.raises(ValueError):
            lg_preprocess_batch(ds)


class TestFlatten:
    def test_row_major(self):
        img = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(flatten_baseline(img), np.array([1.0, 2.0, 3.0, 4.0]))

    def test_round_trips(self, rng):
        img = rng.random((6, 6))
        assert np.array_equal(flatten_baseline(img).reshape(6, 6), img)

    def test_copies(self, rng):
        img = rng.random((3, 3))
        out = flatten_baseline(img)
        out[0] = 99.0
        assert img[0, 0] != 99.0


def test_feature_dims():
    assert feature_dim(LINE_PROFILE, 64) == 128
    assert feature_dim(FLATTENED, 64) == 4096
    with pytest.raises(ValueError):
        feature_dim("bogus", 64)


class TestStandardizer:
    def test_train_set_becomes_zero_mean_unit_std(self, rng):
        mat = rng.random((40, 7)) * 10 + 3
        s = fit_standardizer(mat)
        out = apply_standardizer(s, mat)
        assert np.abs(out.mean(axis=0)).max() < 1e-9
        assert np.abs(out.std(axis=0) - 1.0).max() < 1e-6

    def test_constant_dimension_maps_to_zero(self, rng):
        mat = rng.random((10, 3))
        mat[:, 1] = 4.2
        s = fit_standardizer(mat)
        out = apply_standardizer(s, mat)
        assert np.all(out[:, 1] == 0.0)

    def test_affine(self, rng):
        mat = rng.random((12, 4))
        s = fit_standardizer(mat)
        x = rng.random(4)
        lhs = apply_standardizer(s, 2.0 * x)
        rhs = 2.0 * apply_standardizer(s, x) - apply_standardizer(s, np.zeros(4))
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_row_order_invariant_bitwise(self, rng):
        mat = rng.random((30, 5))
        s1 = fit_standardizer(mat)
        s2 = fit_standardizer(mat[rng.permutation(30)])
        assert np.array_equal(s1.mean, s2.mean)
        assert np.array_equal(s1.std, s2.std)

    def test_accepts_dataset(self, rng):
        ds = LabeledDataset(
            items=[(rng.random(5), 0) for _ in range(8)], class_names=["x"], split="train"
        )
        s = fit_standardizer(ds)
        assert s.mean.shape == (5,)

    def test_dimension_mismatch(self, rng):
        s = fit_standardizer(rng.random((5, 4)))
        with pytest.raises(ValueError):
            apply_standardizer(s, rng.random(3))


class TestCsv:
    def test_round_trip_is_exact(self, rng, tmp_path):
        mat = rng.standard_normal((12, 6)) * 1e-17  # tiny values stress %.17g
        labels = rng.integers(0, 3, 12)
        ds = LabeledDataset(
            items=[(mat[i], int(labels[i])) for i in range(12)],
            class_names=["a", "b", "c"],
            split="train",
        )
        path = tmp_path / "f.csv"
        assert write_features_csv(path, ds) == 12
        back = read_features_csv(path, class_names=["a", "b", "c"])
        assert np.array_equal(back.stack(), mat)
        assert np.array_equal(back.labels(), labels)
        assert back.class_names == ["a", "b", "c"]

    def test_rewrite_is_byte_identical(self, rng, tmp_path):
        ds = LabeledDataset(
            items=[(rng.random(4), 0) for _ in range(5)], class_names=["x"], split="train"
        )
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_features_csv(p1, ds)
        write_features_csv(p2, ds)
        assert p1.read_bytes() == p2.read_bytes()

    def test_placeholder_class_names(self, rng, tmp_path):
        ds = LabeledDataset(
            items=[(rng.random(3), i) for i in range(2)], class_names=["p", "q"], split="train"
        )
        path = tmp_path / "f.csv"
        write_features_csv(path, ds)
        back = read_features_csv(path)
        assert back.class_names == ["class_0", "class_1"]

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1.0,2.0\n1,oops,3.0\n")
        with pytest.raises(ValueError, match=":2:"):
            read_features_csv(path)

    def test_inconsistent_dim_rejected(self, tmp_path):
        path = tmp_path / "dim.csv"
        path.write_text("0,1.0,2.0\n1,3.0\n")
        with pytest.raises(ValueError):
            read_features_csv(path)

    def test_class_names_must_cover_labels(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("0,1.0\n3,2.0\n")
        with pytest.raises(ValueError):
            read_features_csv(path, class_names=["only", "two"])
