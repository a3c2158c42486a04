import json

import numpy as np
import pytest

from miembed.bags import (
    InstanceBag,
    RegionGeometry,
    WHOLE_IMAGE,
    build_bag,
    grid_subregion_geometries,
    passes_region_filter,
    read_bags_jsonl,
    write_bags_jsonl,
)


class TestRegionGeometry:
    def test_valid(self):
        g = RegionGeometry(0.1, 0.2, 0.6, 0.9)
        assert g.width == pytest.approx(0.5)
        assert g.height == pytest.approx(0.7)

    @pytest.mark.parametrize(
        "coords",
        [(0.5, 0.0, 0.5, 1.0), (0.6, 0.0, 0.5, 1.0), (-0.1, 0.0, 0.5, 1.0), (0.0, 0.0, 1.1, 1.0)],
    )
    def test_invalid(self, coords):
        with pytest.raises(ValueError, match="invalid geometry"):
            RegionGeometry(*coords)


class TestRegionFilter:
    def test_whole_image_passes(self):
        assert passes_region_filter(WHOLE_IMAGE) is True

    def test_narrow_side_fails(self):
        # width 0.2 is below the 0.3 minimum side
        assert passes_region_filter(RegionGeometry(0, 0, 0.2, 0.5)) is False

    def test_boundary_side_passes(self):
        assert passes_region_filter(RegionGeometry(0, 0, 0.3, 0.3)) is True

    def test_extreme_aspect_fails(self):
        assert passes_region_filter(RegionGeometry(0, 0, 0.9, 0.1)) is False

    def test_aspect_clause_with_relaxed_min_side(self):
        wide = RegionGeometry(0, 0, 0.8, 0.1)
        assert passes_region_filter(wide, min_side=0.05, max_aspect=4.0) is False
        assert passes_region_filter(wide, min_side=0.05, max_aspect=8.0) is True

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            passes_region_filter(WHOLE_IMAGE, min_side=0.0)
        with pytest.raises(ValueError):
            passes_region_filter(WHOLE_IMAGE, max_aspect=0.5)


class TestBuildBag:
    def test_no_regions_gives_single_instance(self):
        bag = build_bag("b", [1.0, 2.0])
        assert bag.num_instances == 1
        assert bag.geometries[0] == WHOLE_IMAGE

    def test_filter_drops_failing_region(self):
        regions = [
            ([1.0, 0.0], RegionGeometry(0, 0, 0.5, 0.5)),
            ([0.0, 1.0], RegionGeometry(0, 0, 0.1, 0.5)),  # too narrow
            ([1.0, 1.0], RegionGeometry(0.2, 0.2, 0.8, 0.8)),
        ]
        bag = build_bag("b", [1.0, 2.0], regions)
        assert bag.num_instances == 3

    def test_wrong_length_names_region_index(self):
        regions = [([1.0, 0.0], RegionGeometry(0, 0, 0.5, 0.5)),
                   ([1.0, 0.0, 2.0], RegionGeometry(0, 0, 0.5, 0.5))]
        with pytest.raises(ValueError, match="region 1"):
            build_bag("b", [1.0, 2.0], regions)

    def test_count_is_one_plus_passes(self):
        rng = np.random.default_rng(0)
        geoms = [RegionGeometry(0, 0, 0.5, 0.5), RegionGeometry(0, 0, 0.2, 0.2),
                 RegionGeometry(0.1, 0.1, 0.9, 0.9), RegionGeometry(0, 0, 0.25, 1.0)]
        regions = [(rng.normal(size=3), g) for g in geoms]
        passes = sum(passes_region_filter(g) for g in geoms)
        bag = build_bag("b", rng.normal(size=3), regions)
        assert bag.num_instances == 1 + passes

    def test_filtering_is_stable(self):
        rng = np.random.default_rng(1)
        keep1 = (rng.normal(size=2), RegionGeometry(0, 0, 0.5, 0.5))
        keep2 = (rng.normal(size=2), RegionGeometry(0.3, 0.3, 0.9, 0.9))
        drop1 = (rng.normal(size=2), RegionGeometry(0, 0, 0.1, 0.5))
        drop2 = (rng.normal(size=2), RegionGeometry(0, 0, 0.5, 0.1))
        whole = rng.normal(size=2)
        a = build_bag("b", whole, [drop1, keep1, drop2, keep2])
        b = build_bag("b", whole, [drop2, keep1, drop1, keep2])
        assert np.array_equal(a.features, b.features)
        assert a.geometries == b.geometries

    def test_labels_stored_as_set(self):
        bag = build_bag("b", [1.0], labels=["x", "y", "x"])
        assert bag.labels == frozenset({"x", "y"})


class TestInstanceBagInvariants:
    def test_instance0_must_be_whole_image(self):
        with pytest.raises(ValueError, match="whole image"):
            InstanceBag("b", np.ones((1, 2)), (RegionGeometry(0, 0, 0.5, 0.5),), frozenset())

    def test_geometry_count_must_match(self):
        with pytest.raises(ValueError, match="per instance"):
            InstanceBag("b", np.ones((2, 2)), (WHOLE_IMAGE,), frozenset())

    def test_empty_id_rejected(self):
        with pytest.raises(ValueError, match="bag_id"):
            InstanceBag("", np.ones((1, 2)), (WHOLE_IMAGE,), frozenset())


class TestGridSubregions:
    def test_exactly_36(self):
        assert len(grid_subregion_geometries()) == 36

    def test_contains_full_rectangle(self):
        assert WHOLE_IMAGE in grid_subregion_geometries()

    def test_matches_enumeration_oracle(self):
        # every axis-aligned rectangle on the 4x4 grid with both sides >= 2 cells
        expected = set()
        for x0 in range(4):
            for y0 in range(4):
                for w in range(2, 5):
                    for h in range(2, 5):
                        if x0 + w <= 4 and y0 + h <= 4:
                            expected.add((x0 / 4, y0 / 4, (x0 + w) / 4, (y0 + h) / 4))
        got = {(g.x0, g.y0, g.x1, g.y1) for g in grid_subregion_geometries()}
        assert got == expected
        # 3 + 2 + 1 placements per axis
        assert len(expected) == 36

    def test_all_pass_default_filter(self):
        assert all(passes_region_filter(g) for g in grid_subregion_geometries())

    def test_deterministic_order(self):
        assert grid_subregion_geometries() == grid_subregion_geometries()


class TestBagsJsonl:
    def _bags(self):
        rng = np.random.default_rng(2)
        out = []
        for i in range(3):
            regions = [(rng.normal(size=4), RegionGeometry(0, 0, 0.5, 0.5)),
                       (rng.normal(size=4), RegionGeometry(0.25, 0.25, 1.0, 1.0))]
            out.append(build_bag(f"bag{i}", rng.normal(size=4), regions, labels=[f"l{i}", "c"]))
        return out

    def test_roundtrip(self, tmp_path):
        bags = self._bags()
        path = tmp_path / "bags.jsonl"
        write_bags_jsonl(path, bags)
        again = read_bags_jsonl(path)
        assert len(again) == len(bags)
        for a, b in zip(again, bags):
            assert a.bag_id == b.bag_id
            assert a.labels == b.labels
            assert a.geometries == b.geometries
            assert np.array_equal(a.features, b.features)

    def test_loader_applies_filter(self, tmp_path):
        path = tmp_path / "bags.jsonl"
        obj = {
            "id": "b",
            "labels": [],
            "instances": [
                {"geom": [0, 0, 1, 1], "feat": [1.0, 2.0]},
                {"geom": [0, 0, 0.1, 0.5], "feat": [3.0, 4.0]},
                {"geom": [0, 0, 0.5, 0.5], "feat": [5.0, 6.0]},
            ],
        }
        path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
        (bag,) = read_bags_jsonl(path)
        assert bag.num_instances == 2

    def test_instance0_geometry_enforced(self, tmp_path):
        path = tmp_path / "bags.jsonl"
        obj = {"id": "b", "labels": [],
               "instances": [{"geom": [0, 0, 0.5, 1], "feat": [1.0]}]}
        path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
        with pytest.raises(ValueError, match="full frame"):
            read_bags_jsonl(path)

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "bags.jsonl"
        good = {"id": "b", "labels": [], "instances": [{"geom": [0, 0, 1, 1], "feat": [1.0]}]}
        path.write_text(json.dumps(good) + "\n{broken\n", encoding="utf-8")
        with pytest.raises(ValueError, match=":2"):
            read_bags_jsonl(path)
