import json

import pytest

import trijoin


@pytest.fixture(scope="module")
def indexed(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    data = root / "data"
    gen = trijoin.generate(
        str(data), shape="mixed", facets=90, count=8, spacing=3.4, jitter=0.2, seed=7
    )
    assert len(gen["files"]) == 8
    assert gen["total_facets"] > 0
    index = root / "objects.idx"
    count = trijoin.preprocess(str(data), str(index), seed=7)
    assert count == 8
    return str(index)


def test_off_round_trip(tmp_path):
    out = tmp_path / "one"
    gen = trijoin.generate(str(out), shape="torus", facets=120, count=1, seed=3)
    text = (out / gen["files"][0]).read_text()
    vertices, facets = trijoin.parse_off(text)
    assert len(facets) == gen["total_facets"]
    again = trijoin.write_off(vertices, facets)
    assert trijoin.parse_off(again) == (vertices, facets)


def test_within_matches_oracle(indexed):
    res = trijoin.join(indexed, tau=1.0, seed=5)
    ref = trijoin.oracle(indexed, tau=1.0, seed=5)
    assert {(r, s) for r, s, *_ in res["records"]} == {
        (r, s) for r, s, *_ in ref["records"]
    }
    assert res["records"], "tau=1.0 on the smoke grid should produce results"
    pairs = {(r, s) for r, s, *_ in res["records"]}
    assert all((i, i) in pairs for i in range(8)), "self-join keeps identity pairs"
    for r, s, lb, ub, stage, rank in res["records"]:
        assert lb <= ub <= 1.0 + 1e-9 and rank == 0
    stats = res["stats"]
    assert stats["query"] == "within" and stats["results"] == len(res["records"])
    assert stats["stages"][0]["pairs_in"] == 8 * 8


def test_intersect_is_within_zero(indexed):
    inter = trijoin.join(indexed, type="intersect")
    within = trijoin.join(indexed, type="within", tau=0.0)
    assert inter["records"] == within["records"]
    assert inter["stats"]["query"] == "intersect"


def test_knn_ranks(indexed):
    res = trijoin.join(indexed, type="knn", k=2)
    ref = trijoin.oracle(indexed, type="knn", k=2)
    assert len(res["records"]) == 8 * 2
    by_query = {}
    for r, s, lb, ub, stage, rank in res["records"]:
        by_query.setdefault(r, []).append((s, rank))
    for r, hits in by_query.items():
        assert sorted(rank for _, rank in hits) == [1, 2]
        assert {s for s, _ in hits} == {
            s for q, s, *_ in ref["records"] if q == r
        }


def test_invalid_spec_raises(indexed):
    with pytest.raises(ValueError):
        trijoin.join(indexed, tau=-1.0)
    with pytest.raises(ValueError):
        trijoin.join(indexed, type="knn", k=0)
    with pytest.raises(ValueError):
        trijoin.join(indexed, type="nearest")


def test_stats_json_is_self_consistent(indexed):
    raw = trijoin._core.join(indexed)
    stats = json.loads(raw[1])
    for stage in stats["stages"]:
        assert (
            stage["pairs_in"] - stage["confirmed"] - stage["removed"]
            == stage["pairs_out"]
        )
