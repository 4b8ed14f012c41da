"""Shared relational graph attention encoder.

One encoder embeds the entities of every candidate graph into a common space.
Each relation contributes a parameter-free orthogonal projection derived from
its embedding vector g, applied as the rank-1 reflection x - 2g(g.x) rather
than a materialized matrix.  Neighbor messages are mixed with segment-softmax
attention; the virtual self-relation keeps each entity among its own
neighbors, so stacked layers can weight arbitrary hops.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DataError
from .kg import KnowledgeGraph, augment_self_relations, build_neighbor_index

UNIT_TOL = 1e-8


@dataclass
class ModelParams:
    entity_embeddings: list     # per KG (entity_count, d) float64
    relation_embeddings: list   # per KG (relation_count, d) float64
    attn_head: np.ndarray       # (d,) shared across KGs
    attn_rel: np.ndarray
    attn_tail: np.ndarray
    layer_count: int

    @property
    def dim(self) -> int:
        return int(self.attn_head.shape[0])

    @property
    def num_kgs(self) -> int:
        return len(self.entity_embeddings)

    def tables(self):
        """All trainable arrays in a fixed, documented order."""
        out = [(f"entity_{m}", t) for m, t in enumerate(self.entity_embeddings)]
        out += [(f"relation_{m}", t) for m, t in enumerate(self.relation_embeddings)]
        out += [("attn_head", self.attn_head), ("attn_rel", self.attn_rel),
                ("attn_tail", self.attn_tail)]
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            entity_embeddings=[t.copy() for t in self.entity_embeddings],
            relation_embeddings=[t.copy() for t in self.relation_embeddings],
            attn_head=self.attn_head.copy(),
            attn_rel=self.attn_rel.copy(),
            attn_tail=self.attn_tail.copy(),
            layer_count=self.layer_count,
        )


def xavier_uniform(rng, shape) -> np.ndarray:
    """Xavier/Glorot uniform init; 1-D vectors are treated as a single row."""
    if len(shape) == 1:
        fan_in, fan_out = 1, shape[0]
    else:
        fan_in, fan_out = shape[0], shape[1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(kgs, dim, layer_count, rng) -> ModelParams:
    """Initialize all tables with Xavier uniform draws in a fixed order."""
    entity = [xavier_uniform(rng, (kg.entity_count, dim)) for kg in kgs]
    relation = [xavier_uniform(rng, (kg.relation_count, dim)) for kg in kgs]
    return ModelParams(
        entity_embeddings=entity,
        relation_embeddings=relation,
        attn_head=xavier_uniform(rng, (dim,)),
        attn_rel=xavier_uniform(rng, (dim,)),
        attn_tail=xavier_uniform(rng, (dim,)),
        layer_count=layer_count,
    )


@dataclass
class EncoderInput:
    """Augmented graph flattened into the arrays one encoder layer consumes."""

    entity_count: int
    relation_count: int
    segments: ad.SegmentSpec   # neighbor-tuple segment per entity
    entity_ids: np.ndarray     # (total,) owning entity of each tuple
    relations: np.ndarray      # (total,) relation of each tuple
    neighbors: np.ndarray      # (total,) neighbor entity of each tuple

    @classmethod
    def from_kg(cls, kg: KnowledgeGraph) -> "EncoderInput":
        if not kg.augmented:
            kg = augment_self_relations(kg)
        index = build_neighbor_index(kg)
        return cls(
            entity_count=kg.entity_count,
            relation_count=kg.relation_count,
            segments=ad.SegmentSpec(index.offsets),
            entity_ids=index.entity_ids,
            relations=index.relations,
            neighbors=index.neighbors,
        )


def relation_projection(g) -> np.ndarray:
    """Materialize the reflection I - 2 g g^T for a unit vector g."""
    g = np.asarray(g, dtype=np.float64)
    norm = np.linalg.norm(g)
    if abs(norm - 1.0) > UNIT_TOL:
        raise DataError(f"relation vector must be unit norm, got {norm}")
    return np.eye(g.shape[0]) - 2.0 * np.outer(g, g)


def attention_logit(h_i, g_k, h_j, attn_head, attn_rel, attn_tail) -> float:
    """Raw proximity of one neighbor tuple before segment normalization."""
    g_k = np.asarray(g_k, dtype=np.float64)
    projected = relation_projection(g_k) @ np.asarray(h_j, dtype=np.float64)
    pre = (np.dot(attn_head, h_i) + np.dot(attn_rel, g_k)
           + np.dot(attn_tail, projected))
    return ad.elu(ad.constant(pre)).item()


def encode_layer(graph: EncoderInput, h_in, g_unit, attn_head, attn_rel, attn_tail):
    """One aggregation layer; all arguments are tensors on a common tape."""
    gk = ad.gather_rows(g_unit, graph.relations)
    hj = ad.gather_rows(h_in, graph.neighbors)
    hi = ad.gather_rows(h_in, graph.entity_ids)
    # reflection action: W_k h_j = h_j - 2 g_k (g_k . h_j)
    projected = ad.sub(hj, ad.scale_rows(gk, ad.scale(ad.rowwise_dot(gk, hj), 2.0)))
    logits = ad.add(ad.add(ad.matvec(hi, attn_head), ad.matvec(gk, attn_rel)),
                    ad.matvec(projected, attn_tail))
    attention = ad.segment_softmax(ad.elu(logits), graph.segments)
    aggregated = ad.segment_sum(ad.scale_rows(projected, attention), graph.segments)
    return ad.elu(aggregated)


class BoundParams:
    """ModelParams wrapped as tensors: tape leaves during training, plain
    constants for inference.  Leaf order matches ModelParams.tables()."""

    def __init__(self, params: ModelParams, tape=None):
        wrap = tape.leaf if tape is not None else ad.constant
        self.entity = [wrap(t) for t in params.entity_embeddings]
        self.relation = [wrap(t) for t in params.relation_embeddings]
        self.attn_head = wrap(params.attn_head)
        self.attn_rel = wrap(params.attn_rel)
        self.attn_tail = wrap(params.attn_tail)
        self.layer_count = params.layer_count

    def leaves(self):
        return (self.entity + self.relation
                + [self.attn_head, self.attn_rel, self.attn_tail])

    def gradients(self):
        return [t.grad for t in self.leaves()]


def encode(graphs, bound: BoundParams):
    """Run the stacked encoder over every graph; rows of each output are
    L2-normalized.  Returns one tensor per graph."""
    outputs = []
    for graph, ent, rel in zip(graphs, bound.entity, bound.relation):
        if graph.entity_count != ent.shape[0]:
            raise DataError("entity table does not match graph size")
        if graph.relation_count != rel.shape[0]:
            raise DataError("relation table does not match graph size")
        h = ent
        g_unit = ad.l2_normalize(rel)
        for _ in range(bound.layer_count):
            h = encode_layer(graph, h, g_unit, bound.attn_head, bound.attn_rel,
                             bound.attn_tail)
        outputs.append(ad.l2_normalize(h))
    return outputs


def encode_arrays(graphs, params: ModelParams):
    """Tape-free forward pass returning plain (entity_count, d) arrays."""
    return [t.values for t in encode(graphs, BoundParams(params))]


def export_embeddings(path, embeddings: np.ndarray):
    """TSV export `entity<TAB>v1<TAB>...<TAB>vd` with 6 decimal places."""
    with open(path, "w", encoding="utf-8") as f:
        for i, row in enumerate(embeddings):
            f.write(str(i) + "\t" + "\t".join(f"{v:.6f}" for v in row) + "\n")


def read_embeddings(path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            rows.append([float(v) for v in fields[1:]])
    return np.asarray(rows, dtype=np.float64)
