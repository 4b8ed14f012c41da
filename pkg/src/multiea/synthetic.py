"""Planted-alignment benchmark generator.

Builds M isomorphic copies of one random graph through entity permutations;
the permutations define the ground-truth alignment tuples, so end-to-end
accuracy can be verified at desk scale without any external data.
"""
from __future__ import annotations

import numpy as np

from .dataset import MultiKgDataset, split_labels
from .errors import DataError
from .kg import KnowledgeGraph


def random_kg(rng, num_entities, num_relations, num_triples) -> KnowledgeGraph:
    """Uniform random distinct triples with head != tail."""
    if num_entities < 2:
        raise DataError("need at least 2 entities")
    triples = set()
    attempts = 0
    while len(triples) < num_triples:
        attempts += 1
        if attempts > 50 * num_triples:
            raise DataError("triple budget unreachable, graph too dense")
        h = int(rng.integers(num_entities))
        t = int(rng.integers(num_entities))
        if h == t:
            continue
        triples.add((h, int(rng.integers(num_relations)), t))
    return KnowledgeGraph(entity_count=num_entities, relation_count=num_relations,
                          triples=sorted(triples))


def permuted_copy(kg: KnowledgeGraph, perm) -> KnowledgeGraph:
    triples = sorted((int(perm[h]), r, int(perm[t])) for h, r, t in kg.triples)
    return KnowledgeGraph(entity_count=kg.entity_count,
                          relation_count=kg.relation_count, triples=triples)


def planted_instance(num_kgs, num_entities, num_relations, num_triples,
                     rng_seed=0, train_ratio=0.3) -> MultiKgDataset:
    """M isomorphic graphs plus a train/test split of the true alignment."""
    rng = np.random.default_rng(rng_seed)
    base = random_kg(rng, num_entities, num_relations, num_triples)
    kgs = [base]
    perms = [np.arange(num_entities)]
    for _ in range(num_kgs - 1):
        perm = rng.permutation(num_entities)
        perms.append(perm)
        kgs.append(permuted_copy(base, perm))
    labels = [tuple(int(perm[i]) for perm in perms) for i in range(num_entities)]
    train, test = split_labels(labels, train_ratio, rng_seed=rng_seed)
    return MultiKgDataset(kgs=kgs, train_labels=train, test_labels=test,
                          names=[f"kg{m}" for m in range(num_kgs)])
