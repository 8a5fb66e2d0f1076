"""Attention-matrix analysis: scaling, node importance, influential nodes,
per-node top influencers and cross-period comparison.

The convention throughout: in an attention weight matrix A, the entry at row
i, column j is read as the impact of node i on node j, so the influencers of
a target node are ranked by the target's column.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DataError, DegenerateScaleError
from .model import AttentionRecord


@dataclass(frozen=True)
class ImportanceVector:
    """Per-node importance scores and the matrix they came from."""

    values: np.ndarray
    source: str = ""


@dataclass(frozen=True)
class InfluenceQuery:
    """Which node to explain, from which attention matrix, and how many names."""

    target: int
    kind: str = "mem"
    layer: int | None = None  # 1-based; None = last
    k: int = 10


def scale_unit_interval(matrix) -> np.ndarray:
    """Min-max scale all entries into [0, 1]."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise DataError("matrix contains non-finite entries")
    low = matrix.min()
    high = matrix.max()
    if high == low:
        raise DegenerateScaleError("constant matrix cannot be min-max scaled")
    return (matrix - low) / (high - low)


def node_importance(matrix, source: str = "") -> ImportanceVector:
    """Importance of node k: sum of column k plus sum of row k."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    values = matrix.sum(axis=0) + matrix.sum(axis=1)
    return ImportanceVector(values=values, source=source)


def influential_nodes(importance: ImportanceVector) -> set[int]:
    """Nodes whose importance exceeds mean + one (population) standard deviation."""
    values = importance.values
    if values.size < 2:
        raise ValueError("need at least 2 nodes")
    threshold = values.mean() + values.std()
    return {int(k) for k in np.nonzero(values > threshold)[0]}


def top_influencers(matrix, query: InfluenceQuery) -> list[tuple[int, float]]:
    """The k nodes with the largest weight in the target's column.

    The target itself is excluded; ties break toward the lower node index.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    n = matrix.shape[0]
    if matrix.ndim != 2 or matrix.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    if not 0 <= query.target < n:
        raise ValueError(f"target {query.target} out of range for {n} nodes")
    k = query.k
    if k >= n:
        warnings.warn(f"k={k} >= {n} nodes; truncating to {n - 1}", stacklevel=2)
        k = n - 1
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    column = matrix[:, query.target]
    candidates = [i for i in range(n) if i != query.target]
    candidates.sort(key=lambda i: (-column[i], i))
    return [(i, float(column[i])) for i in candidates[:k]]


def select_matrix(record: AttentionRecord, query: InfluenceQuery) -> np.ndarray:
    return record.select(query.kind, query.layer)


def jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class PeriodComparison:
    """Per-period top-influencer lists and pairwise overlap of the sets."""

    per_period: dict
    jaccard: dict

    def influencer_sets(self) -> dict:
        return {label: {node for node, _ in pairs}
                for label, pairs in self.per_period.items()}


def compare_periods(records: dict, query: InfluenceQuery) -> PeriodComparison:
    """Run top_influencers per period and measure how much the sets agree.

    Low Jaccard overlap across periods means the learned dependencies are
    time-varying rather than static.
    """
    if len(records) < 2:
        raise ValueError("need at least 2 periods to compare")
    sizes = {select_matrix(rec, query).shape[0] for rec in records.values()}
    if len(sizes) != 1:
        raise DataError(f"records disagree on node count: {sorted(sizes)}")
    per_period = {label: top_influencers(select_matrix(rec, query), query)
                  for label, rec in records.items()}
    sets = {label: {node for node, _ in pairs} for label, pairs in per_period.items()}
    overlaps = {(a, b): jaccard(sets[a], sets[b])
                for a, b in combinations(sorted(sets), 2)}
    return PeriodComparison(per_period=per_period, jaccard=overlaps)


# ---------------------------------------------------------------------------
# coordinate join for external mapping
# ---------------------------------------------------------------------------

def load_coordinates(path) -> dict[str, tuple[float, float]]:
    """Read a node_id,lon,lat table (header optional)."""
    coords = {}
    with open(str(path), "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            if len(cells) != 3:
                raise DataError(f"{path}: expected node_id,lon,lat rows")
            try:
                coords[cells[0]] = (float(cells[1]), float(cells[2]))
            except ValueError:
                continue  # header row
    return coords


def join_coordinates(nodes, node_ids, coords: dict) -> list[dict]:
    """Attach lon/lat to (node, weight) pairs; nodes without coordinates are kept
    with null position so the caller can see the gap."""
    rows = []
    for node, weight in nodes:
        node_id = node_ids[node]
        lonlat = coords.get(node_id)
        rows.append({
            "node": int(node),
            "node_id": node_id,
            "weight": float(weight),
            "lon": None if lonlat is None else lonlat[0],
            "lat": None if lonlat is None else lonlat[1],
        })
    return rows


def save_matrix_csv(path, matrix) -> None:
    matrix = np.asarray(matrix)
    with open(str(path), "w", encoding="utf-8") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
