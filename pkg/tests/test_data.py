"""CSV ingestion, preprocessing and synthetic blobs."""

from __future__ import annotations

import numpy as np
import pytest

from discount.data import load_csv, make_synthetic, preprocess, table_from_arrays
from discount.errors import CSVParseError, InvalidArgumentError, InvalidDatasetError
from discount.models import ModelSpec, train


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def mixed_table(tmp_path, rng):
    rows = ["age,city,income,label"]
    cities = ["oslo", "rome", "lima"]
    for i in range(100):
        rows.append(f"{rng.integers(18, 80)},{cities[i % 3]},{rng.normal(50, 10):.4f},{'yes' if i % 2 else 'no'}")
    return load_csv(write(tmp_path / "mixed.csv", "\n".join(rows) + "\n"))


class TestLoadCsv:
    def test_well_formed(self, tmp_path):
        body = "a,b,c\n" + "".join(f"{i},{i * 2},x{i}\n" for i in range(5))
        t = load_csv(write(tmp_path / "t.csv", body))
        assert t.shape == (5, 3)
        assert t.kinds == {"a": "numeric", "b": "numeric", "c": "categorical"}
        assert t.columns["b"] == [0.0, 2.0, 4.0, 6.0, 8.0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv")

    def test_bad_cell_cites_row(self, tmp_path):
        body = "a,b\n1,2\n3,4\n5,6\n7,abc\n9,10\n"
        with pytest.raises(CSVParseError) as info:
            load_csv(write(tmp_path / "t.csv", body), schema={"b": "numeric"})
        assert info.value.row == 4 and info.value.column == "b"
        assert "row 4" in str(info.value)

    def test_ragged(self, tmp_path):
        with pytest.raises(CSVParseError) as info:
            load_csv(write(tmp_path / "t.csv", "a,b\n1,2\n3\n"))
        assert info.value.row == 2

    def test_quoted_fields(self, tmp_path):
        t = load_csv(write(tmp_path / "t.csv", 'name,v\n"Smith, J",1\n"say ""hi""",2\n'))
        assert t.columns["name"] == ["Smith, J", 'say "hi"']

    def test_empty_and_bad_schema(self, tmp_path):
        with pytest.raises(CSVParseError):
            load_csv(write(tmp_path / "e.csv", ""))
        with pytest.raises(CSVParseError):
            load_csv(write(tmp_path / "s.csv", "a\n1\n"), schema={"z": "numeric"})


class TestPreprocess:
    def test_split_sizes(self, mixed_table):
        train_s, test_s, _ = preprocess(mixed_table, "label", seed=0)
        assert train_s.x.n == 80 and test_s.x.n == 20
        assert train_s.y.shape == (80,) and set(np.unique(train_s.y)) <= {0.0, 1.0}

    def test_standardized(self, mixed_table):
        train_s, _, prep = preprocess(mixed_table, "label", seed=1)
        idx = [train_s.x.feature_names.index(c) for c in prep.numeric]
        cols = train_s.x.points[:, idx]
        assert np.all(np.abs(cols.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(cols.std(axis=0) - 1) < 1e-9)

    def test_one_hot_layout(self, mixed_table):
        train_s, _, prep = preprocess(mixed_table, "label")
        assert train_s.x.feature_names == ["age", "city=lima", "city=oslo", "city=rome", "income"]
        block = train_s.x.points[:, 1:4]
        assert np.all(block.sum(axis=1) == 1.0)
        assert train_s.x.one_hot_groups() == {"city": [1, 2, 3]}
        assert prep.classes == ["no", "yes"]

    def test_round_trip(self, mixed_table):
        train_s, _, prep = preprocess(mixed_table, "label", seed=3)
        back = prep.inverse_transform(train_s.x)
        perm = np.random.default_rng(3).permutation(100)[:80]
        for name in ("age", "income"):
            assert np.max(np.abs(np.array(back[name]) - np.array(mixed_table.columns[name])[perm])) < 1e-9
        assert back["city"] == [mixed_table.columns["city"][i] for i in perm]

    def test_numeric_raw(self, mixed_table):
        train_s, _, prep = preprocess(mixed_table, "label")
        raw = prep.numeric_raw(train_s.x)
        assert np.allclose(raw[:, 0], prep.inverse_transform(train_s.x)["age"])

    def test_deterministic(self, mixed_table):
        a = preprocess(mixed_table, "label", seed=5)[0].x.points
        b = preprocess(mixed_table, "label", seed=5)[0].x.points
        assert np.array_equal(a, b)

    def test_single_class(self):
        t = table_from_arrays(np.zeros((10, 2)), np.ones(10))
        with pytest.raises(InvalidDatasetError):
            preprocess(t, "label")

    def test_multiclass(self):
        t = table_from_arrays(np.zeros((9, 1)), np.arange(9) % 3)
        with pytest.raises(InvalidDatasetError):
            preprocess(t, "label")

    def test_constant_column(self):
        pts = np.column_stack([np.ones(10), np.arange(10.0)])
        train_s, _, prep = preprocess(table_from_arrays(pts, np.arange(10) % 2), "label")
        assert prep.stds[0] == 1.0 and np.all(train_s.x.points[:, 0] == 0.0)

    def test_missing_label(self, mixed_table):
        with pytest.raises(InvalidArgumentError):
            preprocess(mixed_table, "target")


class TestSynthetic:
    @staticmethod
    def held_out_accuracy(sep):
        pts, labels = make_synthetic(100, 2, sep, seed=0)
        model, _ = train(ModelSpec("logistic", [2, 1]), pts, labels, epochs=500, seed=0)
        test_pts, test_labels = make_synthetic(2000, 2, sep, seed=99)
        return np.mean((model.predict(test_pts.points) >= 0.5) == test_labels)

    def test_separable(self):
        assert self.held_out_accuracy(4.0) >= 0.95

    def test_indistinguishable(self):
        assert abs(self.held_out_accuracy(0.0) - 0.5) <= 0.1

    def test_balanced_and_deterministic(self):
        a, la = make_synthetic(101, 3, 2.0, seed=4)
        b, lb = make_synthetic(101, 3, 2.0, seed=4)
        assert np.array_equal(a.points, b.points) and np.array_equal(la, lb)
        assert la.sum() == 51

    def test_separation(self):
        pts, labels = make_synthetic(20_000, 4, 3.0, seed=1)
        gap = pts.points[labels == 1].mean(axis=0) - pts.points[labels == 0].mean(axis=0)
        assert np.linalg.norm(gap) == pytest.approx(3.0, rel=0.03)

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            make_synthetic(1, 2, 1.0)
