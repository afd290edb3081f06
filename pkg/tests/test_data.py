import numpy as np
import pandas as pd
import pytest

from mcaa.data import (Dataset, flip_labels_near_boundary, gen_synthetic_2d, load_csv, load_elliptic,
                       load_ethereum, preprocess_ethereum, split_random, split_temporal_elliptic,
                       standardize_apply, standardize_fit)
from mcaa.errors import DomainError


class TestSynthetic:
    def test_sizes(self):
        ds = gen_synthetic_2d(12000, 0.25, seed=0)
        assert len(ds) == 12000 and np.sum(ds.labels == 1) == 6000

    def test_small_std(self):
        ds = gen_synthetic_2d(100, 1e-9, seed=0)
        np.testing.assert_allclose(ds.features, np.repeat(ds.labels[:, None], 2, 1).astype(float), atol=1e-7)

    def test_class_mean(self):
        ds = gen_synthetic_2d(12000, 0.25, seed=5)
        ones = ds.features[ds.labels == 1]
        assert np.all(np.abs(ones.mean(axis=0) - 1.0) < 3 * 0.25 / np.sqrt(6000))

    def test_reproducible(self):
        a, b = gen_synthetic_2d(50, 0.3, 9), gen_synthetic_2d(50, 0.3, 9)
        assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)

    @pytest.mark.parametrize("n,std", [(1, 0.25), (11, 0.25), (10, 0.0)])
    def test_domain(self, n, std):
        with pytest.raises(DomainError):
            gen_synthetic_2d(n, std)

    def test_label_flips_stay_in_band(self):
        ds = gen_synthetic_2d(4000, 0.25, 0)
        noisy, flipped = flip_labels_near_boundary(ds, 0.35, 0.05, seed=1)
        changed = np.flatnonzero(noisy.labels != ds.labels)
        assert np.array_equal(changed, flipped) and len(flipped) > 0
        assert np.all(np.abs(ds.features[flipped].sum(1) - 1) / np.sqrt(2) < 0.35)


class TestCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.normal(size=(8, 3)), rng.integers(0, 2, 8), feature_names=("a", "b", "c"))
        ds.to_csv(tmp_path / "d.csv")
        back, dropped = load_csv(tmp_path / "d.csv", "label")
        assert dropped == 0 and back.feature_names == ("a", "b", "c")
        assert np.array_equal(back.features, ds.features) and np.array_equal(back.labels, ds.labels)

    def test_empty_file(self, tmp_path):
        (tmp_path / "e.csv").write_text("")
        ds, dropped = load_csv(tmp_path / "e.csv", "label")
        assert len(ds) == 0 and dropped == 0

    def test_drops_bad_labels(self, tmp_path):
        (tmp_path / "d.csv").write_text("x,label\n1,0\n2,\n3,unknown\n4,1\n")
        ds, dropped = load_csv(tmp_path / "d.csv", "label")
        assert dropped == 2 and list(ds.features[:, 0]) == [1, 4]

    def test_errors_name_location(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv", "label")
        (tmp_path / "d.csv").write_text("x,label\n1,0\nabc,1\n")
        with pytest.raises(ValueError, match="line 3"):
            load_csv(tmp_path / "d.csv", "label")
        with pytest.raises(ValueError, match="lacks"):
            load_csv(tmp_path / "d.csv", "y")

    def test_timestep_column(self, tmp_path):
        (tmp_path / "d.csv").write_text("t,x,label\n1,0.5,0\n30,0.1,1\n")
        ds, _ = load_csv(tmp_path / "d.csv", "label", ["x"], "t")
        assert list(ds.timestep) == [1, 30] and ds.features.shape == (2, 1)


def write_elliptic(tmp_path, n_feat=4):
    rng = np.random.default_rng(0)
    rows, classes = [], []
    for i, step in enumerate([1, 5, 29, 30, 34, 35, 49, 12]):
        rows.append([1000 + i, step, *rng.normal(size=n_feat)])
        classes.append([1000 + i, ["1", "2", "unknown"][i % 3]])
    pd.DataFrame(rows).to_csv(tmp_path / "feat.csv", header=False, index=False)
    pd.DataFrame(classes, columns=["txId", "class"]).to_csv(tmp_path / "cls.csv", index=False)
    return tmp_path / "feat.csv", tmp_path / "cls.csv"


class TestElliptic:
    def test_load(self, tmp_path):
        ds = load_elliptic(*write_elliptic(tmp_path))
        # every third row is unknown and dropped; timestep is not a feature
        assert len(ds) == 6 and ds.features.shape[1] == 4
        assert list(ds.timestep) == [1, 5, 30, 34, 49, 12]
        assert list(ds.labels) == [1, 0, 1, 0, 1, 0]

    def test_temporal_split(self):
        steps = np.arange(1, 50)
        ds = Dataset(np.zeros((49, 1)), np.zeros(49), steps)
        tr, va, te = split_temporal_elliptic(ds)
        assert list(tr.timestep) == list(range(1, 30))
        assert list(va.timestep) == list(range(30, 35))
        assert list(te.timestep) == list(range(35, 50))

    def test_temporal_split_needs_timestep(self):
        with pytest.raises(DomainError):
            split_temporal_elliptic(Dataset(np.zeros((3, 1)), [0, 1, 0]))


class TestRandomSplit:
    def test_sizes(self):
        parts = split_random(Dataset(np.arange(10.0), np.zeros(10)), seed=0)
        assert [len(p) for p in parts] == [7, 1, 2]

    def test_partition_and_determinism(self):
        ds = Dataset(np.arange(97.0), np.zeros(97))
        a = split_random(ds, seed=3)
        b = split_random(ds, seed=3)
        vals = np.concatenate([p.features[:, 0] for p in a])
        assert sorted(vals) == list(range(97))
        assert all(np.array_equal(x.features, y.features) for x, y in zip(a, b))
        for part, r in zip(a, (0.7, 0.1, 0.2)):
            assert abs(len(part) - r * 97) < 1

    def test_domain(self):
        with pytest.raises(DomainError):
            split_random(Dataset(np.zeros(2), np.zeros(2)))
        with pytest.raises(DomainError):
            split_random(Dataset(np.zeros(5), np.zeros(5)), (0.5, 0.5, 0.5))


class TestStandardize:
    def test_train_moments(self):
        ds = Dataset(np.random.default_rng(0).normal(3, 7, size=(200, 4)), np.zeros(200))
        z = standardize_apply(standardize_fit(ds), ds).features
        assert np.abs(z.mean(axis=0)).max() < 1e-9
        np.testing.assert_allclose(z.std(axis=0), 1.0)

    def test_shift_invariance(self):
        X = np.random.default_rng(1).normal(size=(30, 2))
        a, b = Dataset(X, np.zeros(30)), Dataset(X + 100.0, np.zeros(30))
        np.testing.assert_allclose(standardize_apply(standardize_fit(a), a).features,
                                   standardize_apply(standardize_fit(b), b).features, atol=1e-12)

    def test_no_leakage(self):
        rng = np.random.default_rng(2)
        tr = Dataset(rng.normal(size=(50, 2)), np.zeros(50))
        te = Dataset(rng.normal(5, 1, size=(50, 2)), np.zeros(50))
        stats = standardize_fit(tr)
        assert np.all(standardize_apply(stats, te).features.mean(axis=0) > 1)

    def test_zero_variance(self):
        with pytest.raises(DomainError, match="zero-variance"):
            standardize_fit(Dataset(np.ones((4, 1)), np.zeros(4)))


def eth_frame(n=60, seed=0):
    rng = np.random.default_rng(seed)
    base = rng.normal(size=n)
    return pd.DataFrame({
        "Index": np.arange(n), "Address": [f"0x{i:04x}" for i in range(n)],
        "FLAG": rng.integers(0, 2, n),
        "a": base, "a_copy": 2 * base + 1, "const": 5.0,
        "nine": np.arange(n) % 9, "ten": np.arange(n) % 10,
        "b": rng.normal(size=n), "gappy": np.where(np.arange(n) % 7 == 0, np.nan, rng.normal(size=n)),
        "token": rng.choice(["x", "y", None], n),
    })


class TestEthereum:
    def test_load_and_preprocess(self, tmp_path):
        eth_frame().to_csv(tmp_path / "eth.csv", index=False)
        ds, report = load_ethereum(tmp_path / "eth.csv")
        assert {r["column"]: r["reason"] for r in report} == {
            "Index": "identifier", "Address": "identifier", "token": "categorical"}
        out, more = preprocess_ethereum(ds)
        reasons = {r["column"]: r["reason"] for r in more}
        assert reasons["gappy"] == "missing values"
        assert reasons["const"] == "zero variance"
        assert reasons["a_copy"].startswith("|r|")
        assert reasons["nine"].startswith("fewer than 10")
        assert out.feature_names == ("a", "ten", "b")

    def test_fill_missing_keeps_column(self):
        df = eth_frame()
        ds = Dataset(df[["b", "gappy"]].to_numpy(), df["FLAG"], feature_names=("b", "gappy"))
        out, _ = preprocess_ethereum(ds, fill_missing=0.0)
        assert out.feature_names == ("b", "gappy") and np.isfinite(out.features).all()

    def test_everything_removed(self):
        with pytest.raises(DomainError):
            preprocess_ethereum(Dataset(np.ones((5, 2)), np.zeros(5)))
