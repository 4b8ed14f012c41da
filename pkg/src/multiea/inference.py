"""Cross-graph similarity matrices and high-order enhancement.

First-order similarity between unit embeddings is 1 - dist/2, which lands in
[0, 1] and makes matrix products meaningful as two-hop similarity routed
through an intermediate graph.  Enhanced values may leave [0, 1]; only the
ranking matters, so they are not clamped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

WEIGHT_TOL = 1e-9


@dataclass
class SimilarityMatrix:
    rows: list      # candidate entity ids of the row graph
    cols: list      # candidate entity ids of the column graph
    values: np.ndarray  # (len(rows), len(cols)) float64

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.rows), len(self.cols)):
            raise DataError("similarity values do not match candidate lists")

    def transpose(self) -> "SimilarityMatrix":
        return SimilarityMatrix(rows=list(self.cols), cols=list(self.rows),
                                values=self.values.T.copy())

    def row_position(self):
        return {e: i for i, e in enumerate(self.rows)}

    def col_position(self):
        return {e: j for j, e in enumerate(self.cols)}


def similarity_matrix(emb_a, emb_b, candidates_a, candidates_b) -> SimilarityMatrix:
    """S[i, j] = 1 - ||a_i - b_j|| / 2 over the declared candidate sets."""
    candidates_a = list(candidates_a)
    candidates_b = list(candidates_b)
    a = np.asarray(emb_a, dtype=np.float64)[candidates_a]
    b = np.asarray(emb_b, dtype=np.float64)[candidates_b]
    for name, block in (("row", a), ("column", b)):
        norms = np.linalg.norm(block, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise DataError(f"{name} embedding {bad} is not unit norm")
    # ||a - b||^2 = 2 - 2 a.b for unit vectors; clip guards fp noise at 0
    sq = np.clip(2.0 - 2.0 * (a @ b.T), 0.0, None)
    return SimilarityMatrix(rows=candidates_a, cols=candidates_b,
                            values=1.0 - np.sqrt(sq) / 2.0)


def validate_weights(weights, num_paths) -> list:
    weights = [float(w) for w in weights]
    if len(weights) != 1 + num_paths:
        raise ConfigError(
            f"need {1 + num_paths} weights (first-order + paths), got {len(weights)}")
    if any(w < 0.0 or w > 1.0 for w in weights):
        raise ConfigError(f"weights must lie in [0, 1], got {weights}")
    if abs(sum(weights) - 1.0) > WEIGHT_TOL:
        raise ConfigError(f"weights must sum to 1, got sum {sum(weights)}")
    return weights


def default_weights(first_order_weight, num_paths) -> list:
    """First-order weight plus an even split of the remainder over paths."""
    if num_paths == 0:
        return validate_weights([1.0], 0)
    rest = (1.0 - first_order_weight) / num_paths
    return validate_weights([first_order_weight] + [rest] * num_paths, num_paths)


def enhance(target: SimilarityMatrix, paths, weights) -> SimilarityMatrix:
    """Blend the first-order matrix with two-hop products S_a @ S_b."""
    weights = validate_weights(weights, len(paths))
    values = weights[0] * target.values
    for t, (s_a, s_b) in enumerate(paths):
        if s_a.cols != s_b.rows:
            raise DataError(f"path {t}: inner candidate sets do not match")
        if s_a.rows != target.rows or s_b.cols != target.cols:
            raise DataError(f"path {t}: product shape does not match target")
        values = values + weights[t + 1] * (s_a.values @ s_b.values)
    return SimilarityMatrix(rows=list(target.rows), cols=list(target.cols),
                            values=values)


def rank_candidates(s: SimilarityMatrix, row: int, k: int) -> list:
    """Top-k column entities of one row, ties broken by ascending entity id."""
    if k <= 0:
        raise ConfigError(f"k must be positive, got {k}")
    if k > len(s.cols):
        raise DataError(f"k={k} exceeds candidate pool of {len(s.cols)}")
    values = s.values[row]
    cols = np.asarray(s.cols)
    order = np.lexsort((cols, -values))
    return [int(cols[i]) for i in order[:k]]


def build_similarities(embeddings, pools) -> dict:
    """All M(M-1) directional first-order matrices over per-graph pools."""
    m = len(embeddings)
    out = {}
    for m1 in range(m):
        for m2 in range(m):
            if m1 == m2:
                continue
            out[(m1, m2)] = similarity_matrix(embeddings[m1], embeddings[m2],
                                              pools[m1], pools[m2])
    return out


def enhance_all(similarities: dict, num_kgs: int, first_order_weight: float) -> dict:
    """Enhance every directional matrix through all intermediate graphs."""
    out = {}
    for m1 in range(num_kgs):
        for m2 in range(num_kgs):
            if m1 == m2:
                continue
            intermediates = [m3 for m3 in range(num_kgs) if m3 not in (m1, m2)]
            paths = [(similarities[(m1, m3)], similarities[(m3, m2)])
                     for m3 in intermediates]
            weights = default_weights(first_order_weight, len(paths))
            out[(m1, m2)] = enhance(similarities[(m1, m2)], paths, weights)
    return out


def dump_top_similarities(s: SimilarityMatrix, path, limit=100):
    """TSV `row_entity<TAB>col_entity<TAB>value` for the top columns per row."""
    k = min(limit, len(s.cols))
    col_pos = s.col_position()
    with open(path, "w", encoding="utf-8") as f:
        for i, row_entity in enumerate(s.rows):
            for col_entity in rank_candidates(s, i, k):
                j = col_pos[col_entity]
                f.write(f"{row_entity}\t{col_entity}\t{s.values[i, j]:.6f}\n")
