"""Multi-way alignment dataset construction.

Pair-wise label files are joined through a pivot graph into M-way labels,
subgraphs are induced around labeled entities with a degree threshold, and
labels are split into train/test partitions.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError
from .kg import KnowledgeGraph, read_dense_triples, read_id_map, write_id_map, write_triples

AlignmentLabel = tuple  # length-M tuple of entity indices, one per graph


@dataclass
class MultiKgDataset:
    kgs: list                      # M KnowledgeGraphs, label column m indexes kgs[m]
    train_labels: list             # list of AlignmentLabel
    test_labels: list
    anchor_index: Optional[int] = None
    names: list = field(default_factory=list)  # optional KG names for reporting

    @property
    def num_kgs(self) -> int:
        return len(self.kgs)

    @property
    def labels(self) -> list:
        return self.train_labels + self.test_labels

    def validate(self):
        m = self.num_kgs
        if m < 2:
            raise DataError(f"need at least 2 graphs, got {m}")
        if set(self.train_labels) & set(self.test_labels):
            raise DataError("train and test labels overlap")
        seen = [set() for _ in range(m)]
        for label in self.labels:
            if len(label) != m:
                raise DataError(f"label arity {len(label)} != number of graphs {m}")
            for col, e in enumerate(label):
                if not (0 <= e < self.kgs[col].entity_count):
                    raise DataError(f"label entity {e} out of range for graph {col}")
                if e in seen[col]:
                    raise DataError(f"entity {e} appears in two labels for graph {col}")
                seen[col].add(e)
        if self.anchor_index is not None and not (0 <= self.anchor_index < m):
            raise DataError(f"anchor index {self.anchor_index} out of range")


def join_pairwise_labels(pair_files: list, num_kgs: int) -> list:
    """Join M-1 (pivot, other) pair tables into M-way labels.

    A label is emitted for each pivot entity present in every table, ordered
    (pivot, table 1 partner, ..., table M-1 partner) and sorted by pivot index.
    A pivot mapped to two different partners within one table, or two pivots
    sharing a partner, are inconsistent and rejected.
    """
    if len(pair_files) != num_kgs - 1:
        raise DataError(f"expected {num_kgs - 1} pair tables, got {len(pair_files)}")
    maps = []
    for t, pairs in enumerate(pair_files):
        table = {}
        partners = set()
        for pivot, other in pairs:
            if pivot in table:
                if table[pivot] != other:
                    raise DataError(
                        f"pair table {t}: pivot {pivot} mapped to both "
                        f"{table[pivot]} and {other}"
                    )
                continue
            if other in partners:
                raise DataError(f"pair table {t}: partner {other} mapped to two pivots")
            table[pivot] = other
            partners.add(other)
        maps.append(table)

    if not maps:
        return []
    common = set(maps[0])
    for table in maps[1:]:
        common &= set(table)
    return [tuple([pivot] + [table[pivot] for table in maps])
            for pivot in sorted(common)]


def entity_degrees(kg: KnowledgeGraph) -> np.ndarray:
    """Number of incident triples per entity, counting both directions."""
    deg = np.zeros(kg.entity_count, dtype=np.int64)
    for h, _, t in kg.triples:
        deg[h] += 1
        if t != h:
            deg[t] += 1
    return deg


def induce_subgraph(kg: KnowledgeGraph, seed_entities, degree_threshold: int):
    """Keep seeds plus their neighbors whose degree exceeds the threshold.

    Returns (subgraph, entity_map, relation_map) where the maps send old dense
    ids to new dense ids (ascending old-id order).  Kept triples are those with
    both endpoints retained; relations are re-indexed to those that survive.
    """
    if kg.augmented:
        raise DataError("induce subgraphs before self-relation augmentation")
    seeds = set(int(e) for e in seed_entities)
    for e in seeds:
        if not (0 <= e < kg.entity_count):
            raise DataError(f"seed entity {e} not in graph")

    deg = entity_degrees(kg)
    keep = set(seeds)
    for h, _, t in kg.triples:
        if h in seeds and deg[t] > degree_threshold:
            keep.add(t)
        if t in seeds and deg[h] > degree_threshold:
            keep.add(h)

    kept_triples = [(h, r, t) for h, r, t in kg.triples if h in keep and t in keep]
    ent_map = {old: new for new, old in enumerate(sorted(keep))}
    kept_rels = sorted({r for _, r, _ in kept_triples})
    rel_map = {old: new for new, old in enumerate(kept_rels)}

    sub = KnowledgeGraph(
        entity_count=len(ent_map),
        relation_count=len(rel_map),
        triples=[(ent_map[h], rel_map[r], ent_map[t]) for h, r, t in kept_triples],
        entity_names={new: kg.entity_names.get(old, old) for old, new in ent_map.items()},
        relation_names={new: kg.relation_names.get(old, old) for old, new in rel_map.items()},
    )
    return sub, ent_map, rel_map


def split_labels(labels: list, train_ratio: float, rng_seed: int):
    """Deterministic shuffle-split; train size is round-half-up of ratio*N."""
    n = len(labels)
    if n == 0:
        raise DataError("cannot split an empty label set")
    if not (0.0 < train_ratio < 1.0):
        raise DataError(f"train ratio must be in (0, 1), got {train_ratio}")
    train_size = int(np.floor(train_ratio * n + 0.5))
    if train_size >= n:
        raise DataError(
            f"split leaves no test labels (N={n}, ratio={train_ratio})"
        )
    perm = np.random.default_rng(rng_seed).permutation(n)
    train = [labels[i] for i in perm[:train_size]]
    test = [labels[i] for i in perm[train_size:]]
    return train, test


def label_ratio(dataset: MultiKgDataset) -> float:
    """(number of labels * M) / total entity count across graphs."""
    total_entities = sum(kg.entity_count for kg in dataset.kgs)
    n = len(dataset.labels)
    if n == 0:
        return 0.0
    return (n * dataset.num_kgs) / total_entities


def load_pair_file(path) -> list:
    """Read `pivot<TAB>other` lines of raw string ids."""
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise DataError(f"{path}: line {lineno}: expected 2 fields")
            pairs.append((fields[0], fields[1]))
    return pairs


def write_labels(labels: list, path):
    with open(path, "w", encoding="utf-8") as f:
        for label in labels:
            f.write("\t".join(str(e) for e in label) + "\n")


def read_labels(path, num_kgs=None) -> list:
    labels = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if num_kgs is not None and len(fields) != num_kgs:
                raise DataError(f"{path}: line {lineno}: expected {num_kgs} columns")
            labels.append(tuple(int(e) for e in fields))
    return labels


def write_dataset(out_dir, names, kgs, labels, pivot=None):
    """Write triples, id-map sidecars, multi-way labels, and a descriptor."""
    os.makedirs(out_dir, exist_ok=True)
    descriptor = {"names": list(names), "labels": "labels.tsv", "kgs": {}}
    if pivot is not None:
        descriptor["pivot"] = pivot
    for name, kg in zip(names, kgs):
        files = {
            "triples": f"kg_{name}_triples.tsv",
            "ent_ids": f"kg_{name}_ent_ids.tsv",
            "rel_ids": f"kg_{name}_rel_ids.tsv",
        }
        write_triples(kg, os.path.join(out_dir, files["triples"]))
        write_id_map(kg.entity_names, kg.entity_count,
                     os.path.join(out_dir, files["ent_ids"]))
        write_id_map(kg.relation_names, kg.relation_count,
                     os.path.join(out_dir, files["rel_ids"]))
        descriptor["kgs"][name] = files
    write_labels(labels, os.path.join(out_dir, "labels.tsv"))
    with open(os.path.join(out_dir, "dataset.json"), "w", encoding="utf-8") as f:
        json.dump(descriptor, f, indent=2, sort_keys=True)
        f.write("\n")


def load_dataset_dir(path):
    """Load a built dataset directory; returns (names, kgs, labels, pivot).

    Triple files hold dense indices, so entity/relation counts come from the
    id-map sidecars and no re-numbering happens on reload.
    """
    desc_path = os.path.join(path, "dataset.json")
    if not os.path.exists(desc_path):
        raise DataError(f"no dataset.json in {path}")
    with open(desc_path, "r", encoding="utf-8") as f:
        descriptor = json.load(f)
    names = descriptor["names"]
    kgs = []
    for name in names:
        files = descriptor["kgs"][name]
        ent_names = read_id_map(os.path.join(path, files["ent_ids"]))
        rel_names = read_id_map(os.path.join(path, files["rel_ids"]))
        kg = read_dense_triples(os.path.join(path, files["triples"]),
                                entity_count=len(ent_names),
                                relation_count=len(rel_names))
        kg.entity_names = ent_names
        kg.relation_names = rel_names
        kgs.append(kg)
    labels = read_labels(os.path.join(path, descriptor["labels"]), num_kgs=len(names))
    return names, kgs, labels, descriptor.get("pivot")
