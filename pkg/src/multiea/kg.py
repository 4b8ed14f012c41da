"""Single knowledge graph data model.

A graph is a set of (head, relation, tail) triples over dense integer ids.
Before encoding, every graph is augmented with one virtual self-relation and
one self-triple per entity, and a per-entity neighbor index is built that
treats relations as bi-directed.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DataError


@dataclass
class KnowledgeGraph:
    entity_count: int
    relation_count: int
    triples: list  # list of (head, relation, tail) int tuples, deduplicated
    self_relation_id: Optional[int] = None
    entity_names: dict = field(default_factory=dict)  # dense index -> original id
    relation_names: dict = field(default_factory=dict)

    @property
    def augmented(self) -> bool:
        return self.self_relation_id is not None

    def validate(self):
        for h, r, t in self.triples:
            if not (0 <= h < self.entity_count and 0 <= t < self.entity_count):
                raise DataError(f"entity index out of range in triple ({h},{r},{t})")
            if not (0 <= r < self.relation_count):
                raise DataError(f"relation index out of range in triple ({h},{r},{t})")


@dataclass
class NeighborIndex:
    """Per-entity segments of (relation, neighbor) tuples over a flat axis.

    Segment i holds every (k, j) with (i,k,j) or (j,k,i) in the triple set,
    deduplicated and sorted by (k, j) so iteration order is deterministic.
    """

    offsets: np.ndarray   # (entity_count + 1,) int64, offsets[i]:offsets[i+1] is segment i
    relations: np.ndarray  # (total,) int64
    neighbors: np.ndarray  # (total,) int64

    @property
    def entity_count(self) -> int:
        return len(self.offsets) - 1

    @property
    def total(self) -> int:
        return int(self.offsets[-1])

    def segment(self, i):
        """List of (relation, neighbor) tuples for entity i."""
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return list(zip(self.relations[lo:hi].tolist(), self.neighbors[lo:hi].tolist()))

    @property
    def entity_ids(self) -> np.ndarray:
        """Flat (total,) array giving the owning entity of each tuple."""
        lengths = np.diff(self.offsets)
        return np.repeat(np.arange(self.entity_count, dtype=np.int64), lengths)


def load_kg(source) -> KnowledgeGraph:
    """Parse a triple stream, one `head<TAB>relation<TAB>tail` per line.

    String ids are mapped to dense indices in first-appearance order
    (head, relation, tail within each line).  Duplicate triples are dropped.
    `source` is a text stream, a path, or a string of lines.
    """
    if isinstance(source, str) and source and "\n" not in source and "\t" not in source:
        stream = open(source, "r", encoding="utf-8")
        close = True
    elif isinstance(source, str):
        stream = io.StringIO(source)
        close = False
    else:
        stream = source
        close = False

    ent_ids: dict = {}
    rel_ids: dict = {}
    triples = []
    seen = set()
    try:
        for lineno, line in enumerate(stream, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataError(
                    f"line {lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            h_raw, r_raw, t_raw = fields
            h = ent_ids.setdefault(h_raw, len(ent_ids))
            r = rel_ids.setdefault(r_raw, len(rel_ids))
            t = ent_ids.setdefault(t_raw, len(ent_ids))
            if (h, r, t) not in seen:
                seen.add((h, r, t))
                triples.append((h, r, t))
    finally:
        if close:
            stream.close()

    return KnowledgeGraph(
        entity_count=len(ent_ids),
        relation_count=len(rel_ids),
        triples=triples,
        entity_names={v: k for k, v in ent_ids.items()},
        relation_names={v: k for k, v in rel_ids.items()},
    )


def augment_self_relations(kg: KnowledgeGraph) -> KnowledgeGraph:
    """Append the virtual self-relation and one (i, r_self, i) triple per entity."""
    if kg.augmented:
        raise DataError("knowledge graph is already augmented")
    self_id = kg.relation_count
    triples = list(kg.triples) + [(i, self_id, i) for i in range(kg.entity_count)]
    names = dict(kg.relation_names)
    if names:
        names[self_id] = "__self__"
    return replace(
        kg,
        relation_count=kg.relation_count + 1,
        triples=triples,
        self_relation_id=self_id,
        relation_names=names,
    )


def build_neighbor_index(kg: KnowledgeGraph) -> NeighborIndex:
    """Build the bi-directed (relation, neighbor) index over an augmented graph."""
    if not kg.augmented:
        raise DataError("augment the graph before building the neighbor index")
    per_entity = [set() for _ in range(kg.entity_count)]
    for h, r, t in kg.triples:
        per_entity[h].add((r, t))
        per_entity[t].add((r, h))

    lengths = np.fromiter((len(s) for s in per_entity), dtype=np.int64,
                          count=kg.entity_count)
    offsets = np.zeros(kg.entity_count + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    relations = np.empty(int(offsets[-1]), dtype=np.int64)
    neighbors = np.empty(int(offsets[-1]), dtype=np.int64)
    for i, seg in enumerate(per_entity):
        lo = offsets[i]
        for pos, (r, j) in enumerate(sorted(seg)):
            relations[lo + pos] = r
            neighbors[lo + pos] = j
    return NeighborIndex(offsets=offsets, relations=relations, neighbors=neighbors)


def write_triples(kg: KnowledgeGraph, path):
    """Write triples as dense indices; original ids live in the id-map sidecars."""
    with open(path, "w", encoding="utf-8") as f:
        for h, r, t in kg.triples:
            f.write(f"{h}\t{r}\t{t}\n")


def read_dense_triples(path, entity_count: int, relation_count: int) -> KnowledgeGraph:
    """Read a dense-index triple file with counts supplied by the sidecars.

    Counts cannot be inferred from the triples alone: induced subgraphs may
    keep labeled entities that have no surviving triples.
    """
    triples = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataError(f"{path}: line {lineno}: expected 3 fields")
            try:
                h, r, t = int(fields[0]), int(fields[1]), int(fields[2])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-integer index")
            if (h, r, t) not in seen:
                seen.add((h, r, t))
                triples.append((h, r, t))
    kg = KnowledgeGraph(entity_count=entity_count, relation_count=relation_count,
                        triples=triples)
    kg.validate()
    return kg


def write_id_map(names: dict, count: int, path):
    """Sidecar `index<TAB>original_id`, one line per id in dense order."""
    with open(path, "w", encoding="utf-8") as f:
        for i in range(count):
            f.write(f"{i}\t{names.get(i, i)}\n")


def read_id_map(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\r\n")
            if not line:
                continue
            idx, name = line.split("\t", 1)
            out[int(idx)] = name
    return out
