import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from miembed.semantic_space import (
    LabelSpace,
    load_label_space,
    rank_labels_by_distance,
    read_label_file,
    squared_distance,
    write_label_file,
)


class TestLoadLabelSpace:
    def test_normalizes_vectors(self):
        space = load_label_space([("a", (3.0, 4.0))])
        assert np.allclose(space.vector("a"), [0.6, 0.8], atol=1e-15)

    def test_unit_vectors_unchanged(self):
        space = load_label_space([("a", (1.0, 0.0)), ("b", (0.0, 1.0))])
        assert np.array_equal(space.vector("a"), [1.0, 0.0])
        assert np.array_equal(space.vector("b"), [0.0, 1.0])

    def test_duplicate_name_rejected(self):
        with pytest.raises(ValueError, match="'a'"):
            load_label_space([("a", (1.0, 0.0)), ("a", (0.0, 1.0))])

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="'bad'"):
            load_label_space([("ok", (1.0, 0.0)), ("bad", (0.0, 0.0))])

    def test_ragged_dimensions_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            load_label_space([("a", (1.0, 0.0)), ("b", (1.0, 0.0, 0.0))])

    def test_empty_name_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            load_label_space([("", (1.0, 0.0))])

    def test_insertion_order_preserved(self):
        space = load_label_space([("z", (1.0,)), ("a", (-1.0,)), ("m", (2.0,))])
        assert space.names == ("z", "a", "m")

    def test_idempotent_within_1e12(self):
        rng = np.random.default_rng(7)
        space = load_label_space([(f"l{i}", rng.normal(size=5)) for i in range(10)])
        again = load_label_space(list(zip(space.names, space.vectors)))
        assert np.max(np.abs(again.vectors - space.vectors)) <= 1e-12


class TestSquaredDistance:
    def test_identical_points(self):
        assert squared_distance((1.0, 0.0), (1.0, 0.0)) == 0.0

    def test_antipodal_unit_vectors(self):
        assert squared_distance((1.0, 0.0), (-1.0, 0.0)) == 4.0

    def test_hand_case(self):
        # 0.4^2 + 0.8^2
        assert squared_distance((0.6, 0.8), (1.0, 0.0)) == pytest.approx(0.8, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            squared_distance((1.0, 0.0), (1.0, 0.0, 0.0))

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        p, q = rng.normal(size=4), rng.normal(size=4)
        assert squared_distance(p, q) == squared_distance(q, p)

    @given(st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3),
           st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3))
    def test_unit_vector_range(self, p, q):
        p, q = np.asarray(p), np.asarray(q)
        if np.linalg.norm(p) < 1e-6 or np.linalg.norm(q) < 1e-6:
            return
        p = p / np.linalg.norm(p)
        q = q / np.linalg.norm(q)
        d = squared_distance(p, q)
        assert -1e-12 <= d <= 4.0 + 1e-12


class TestRankLabels:
    def test_two_element_sort(self):
        space = load_label_space([("a", (1.0, 0.0)), ("b", (0.0, 1.0))])
        assert rank_labels_by_distance(space, {"a": 0.3, "b": 0.1}) == ["b", "a"]

    def test_tie_breaks_by_vocabulary_order(self):
        space = load_label_space([("a", (1.0, 0.0)), ("b", (0.0, 1.0))])
        assert rank_labels_by_distance(space, {"a": 0.2, "b": 0.2}) == ["a", "b"]

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(3)
        names = [f"l{i}" for i in range(5)]
        space = load_label_space([(n, rng.normal(size=4)) for n in names])
        distances = {n: float(d) for n, d in zip(names, rng.permutation(5) + 0.5)}
        expected = [n for n, _ in sorted(distances.items(), key=lambda kv: kv[1])]
        assert rank_labels_by_distance(space, distances) == expected

    def test_missing_entry_rejected(self):
        space = load_label_space([("a", (1.0, 0.0)), ("b", (0.0, 1.0))])
        with pytest.raises(ValueError, match="'b'"):
            rank_labels_by_distance(space, {"a": 0.1})

    def test_output_is_permutation(self):
        rng = np.random.default_rng(4)
        names = [f"l{i}" for i in range(8)]
        space = load_label_space([(n, rng.normal(size=3)) for n in names])
        out = rank_labels_by_distance(space, {n: float(rng.uniform()) for n in names})
        assert sorted(out) == sorted(names)


class TestLabelSpaceInvariants:
    def test_rows_must_be_unit(self):
        with pytest.raises(ValueError, match="unit norm"):
            LabelSpace(("a",), np.array([[2.0, 0.0]]))

    def test_dim_and_len(self):
        space = load_label_space([("a", (1.0, 0.0, 0.0)), ("b", (0.0, 2.0, 0.0))])
        assert space.dim == 3
        assert len(space) == 2
        assert "a" in space and "c" not in space


class TestLabelFile:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(5)
        space = load_label_space([(f"l{i}", rng.normal(size=4)) for i in range(6)])
        path = tmp_path / "labels.tsv"
        write_label_file(path, space)
        again = load_label_space(read_label_file(path))
        assert again.names == space.names
        assert np.max(np.abs(again.vectors - space.vectors)) <= 1e-12

    def test_field_count_mismatch_names_line(self, tmp_path):
        path = tmp_path / "labels.tsv"
        path.write_text("a\t1.0\t2.0\nb\t1.0\n", encoding="utf-8")
        with pytest.raises(ValueError, match=":2"):
            read_label_file(path)

    def test_non_numeric_rejected(self, tmp_path):
        path = tmp_path / "labels.tsv"
        path.write_text("a\t1.0\tx\n", encoding="utf-8")
        with pytest.raises(ValueError, match="non-numeric"):
            read_label_file(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "labels.tsv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ValueError, match="empty"):
            read_label_file(path)
