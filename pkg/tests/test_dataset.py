import numpy as np
import pytest

from multiea.dataset import (MultiKgDataset, induce_subgraph, join_pairwise_labels,
                             label_ratio, load_dataset_dir, split_labels,
                             write_dataset)
from multiea.errors import DataError
from multiea.kg import KnowledgeGraph


def make_kg(entity_count, relation_count, triples):
    return KnowledgeGraph(entity_count=entity_count, relation_count=relation_count,
                          triples=list(triples))


def test_join_full_intersection():
    labels = join_pairwise_labels([[(0, 5)], [(0, 7)], [(0, 9)]], num_kgs=4)
    assert labels == [(0, 5, 7, 9)]


def test_join_pivot_missing_from_one_file():
    labels = join_pairwise_labels([[(0, 5)], [], [(0, 9)]], num_kgs=4)
    assert labels == []


def test_join_conflicting_pivot_rejected():
    with pytest.raises(DataError, match="pivot"):
        join_pairwise_labels([[(0, 5), (0, 6)], [(0, 7)]], num_kgs=3)


def test_join_shared_partner_rejected():
    with pytest.raises(DataError, match="partner"):
        join_pairwise_labels([[(0, 5), (1, 5)], [(0, 7), (1, 8)]], num_kgs=3)


def test_join_sorted_by_pivot_and_bounded_by_smallest_file():
    rng = np.random.default_rng(3)
    for _ in range(20):
        tables = []
        for _ in range(2):
            pivots = rng.choice(50, size=rng.integers(0, 20), replace=False)
            tables.append([(int(p), int(p) + 100) for p in pivots])
        labels = join_pairwise_labels(tables, num_kgs=3)
        assert len(labels) <= min(len(t) for t in tables)
        pivots = [l[0] for l in labels]
        assert pivots == sorted(pivots)


def star_kg(center, leaves, extra_edges_per_leaf):
    """Entity 0 = center; leaf i gets extra filler neighbors to raise its degree."""
    triples = []
    next_ent = 1 + len(leaves)
    for leaf_pos, extra in enumerate(extra_edges_per_leaf):
        leaf = 1 + leaf_pos
        triples.append((center, 0, leaf))
        for _ in range(extra):
            triples.append((leaf, 0, next_ent))
            next_ent += 1
    return make_kg(next_ent, 1, triples)


def test_induce_keeps_high_degree_neighbors_only():
    # n1 degree 20, n2 degree 10, threshold 15: only n1 survives beside the seed
    kg = star_kg(0, [1, 2], [19, 9])
    sub, ent_map, _ = induce_subgraph(kg, {0}, 15)
    assert set(ent_map) == {0, 1}
    assert sub.entity_count == 2
    assert sub.triples == [(ent_map[0], 0, ent_map[1])]


def test_induce_threshold_zero_keeps_all_neighbors():
    kg = star_kg(0, [1, 2], [19, 9])
    sub, ent_map, _ = induce_subgraph(kg, {0}, 0)
    assert set(ent_map) == {0, 1, 2}
    assert sub.entity_count == 3


def test_induce_one_hop_only():
    # chain s-a-b with deg(a)=16: a kept, b is two hops out and dropped
    triples = [(0, 0, 1), (1, 0, 2)]
    triples += [(1, 0, 3 + i) for i in range(14)]
    kg = make_kg(17, 1, triples)
    sub, ent_map, _ = induce_subgraph(kg, {0}, 15)
    assert set(ent_map) == {0, 1}
    assert 2 not in ent_map


def test_induce_rejects_unknown_seed():
    with pytest.raises(DataError, match="seed"):
        induce_subgraph(make_kg(2, 1, [(0, 0, 1)]), {5}, 15)


def test_induce_triples_are_subset_after_inverse_mapping():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = int(rng.integers(4, 20))
        raw = {(int(rng.integers(n)), int(rng.integers(2)), int(rng.integers(n)))
               for _ in range(40)}
        kg = make_kg(n, 2, sorted(raw))
        seeds = set(int(s) for s in rng.choice(n, size=2, replace=False))
        sub, ent_map, rel_map = induce_subgraph(kg, seeds, int(rng.integers(0, 4)))
        inv_ent = {v: k for k, v in ent_map.items()}
        inv_rel = {v: k for k, v in rel_map.items()}
        for h, r, t in sub.triples:
            assert (inv_ent[h], inv_rel[r], inv_ent[t]) in raw


def test_split_sizes_round_half_up():
    labels = [(i, i) for i in range(2539)]
    train, test = split_labels(labels, 0.3, rng_seed=1)
    assert len(train) == 762
    assert len(test) == 1777


def test_split_deterministic_and_partition():
    labels = [(i, i) for i in range(10)]
    a = split_labels(labels, 0.3, rng_seed=9)
    b = split_labels(labels, 0.3, rng_seed=9)
    assert a == b
    train, test = a
    assert sorted(train + test) == labels
    assert not (set(train) & set(test))


def test_split_requires_nonempty_test():
    with pytest.raises(DataError):
        split_labels([(0, 0), (1, 1)], 0.999, rng_seed=0)


def test_split_rejects_empty_input():
    with pytest.raises(DataError):
        split_labels([], 0.3, rng_seed=0)


def dataset_with_counts(counts, num_labels):
    kgs = [make_kg(c, 1, [(0, 0, min(1, c - 1))]) for c in counts]
    labels = [tuple(i for _ in counts) for i in range(num_labels)]
    return MultiKgDataset(kgs=kgs, train_labels=[], test_labels=labels)


def test_label_ratio_reference_value():
    ds = dataset_with_counts([8901, 3545, 4326, 3893], 2539)
    assert abs(label_ratio(ds) - 0.4915) < 1e-4


def test_label_ratio_full_coverage_is_one():
    ds = dataset_with_counts([5, 5, 5], 5)
    assert label_ratio(ds) == 1.0


def test_label_ratio_no_labels():
    ds = dataset_with_counts([5, 5], 0)
    assert label_ratio(ds) == 0.0


def test_dataset_validate_catches_duplicate_entity():
    ds = dataset_with_counts([5, 5], 3)
    ds.validate()
    ds.test_labels.append((0, 4))  # entity 0 already used in graph 0
    with pytest.raises(DataError):
        ds.validate()


def test_dataset_roundtrip(tmp_path):
    kgs = [make_kg(3, 2, [(0, 0, 1), (1, 1, 2)]), make_kg(2, 1, [(0, 0, 1)])]
    labels = [(0, 0), (2, 1)]
    write_dataset(tmp_path, ["left", "right"], kgs, labels, pivot="left")
    names, loaded, loaded_labels, pivot = load_dataset_dir(tmp_path)
    assert names == ["left", "right"]
    assert pivot == "left"
    assert loaded_labels == labels
    for orig, back in zip(kgs, loaded):
        assert back.entity_count == orig.entity_count
        assert back.relation_count == orig.relation_count
        assert back.triples == orig.triples
