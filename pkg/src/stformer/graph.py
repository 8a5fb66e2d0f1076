"""Sensor graphs and the K-hop locality mask used by masked attention.

The adjacency row/column ordering fixes node positions for every downstream
component (positional terms, attention records, reports), so it is loaded
once and treated as immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError


def _default_node_ids(n: int) -> tuple[str, ...]:
    return tuple(f"s{i}" for i in range(n))


@dataclass(frozen=True)
class SensorGraph:
    """A sensor network: ordered node ids plus a non-negative adjacency matrix."""

    node_ids: tuple[str, ...]
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.float64)
        n = len(self.node_ids)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise FormatError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] != n:
            raise DataError(
                f"adjacency side {adj.shape[0]} does not match {n} node ids")
        if not np.all(np.isfinite(adj)):
            raise DataError("adjacency contains non-finite entries")
        if np.any(adj < 0):
            raise DataError("adjacency contains negative entries")
        if len(set(self.node_ids)) != n:
            raise DataError("node ids are not unique")
        adj = adj.copy()
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "node_ids", tuple(self.node_ids))

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    @classmethod
    def from_adjacency(cls, adjacency, node_ids=None) -> "SensorGraph":
        adjacency = np.asarray(adjacency, dtype=np.float64)
        if node_ids is None:
            node_ids = _default_node_ids(adjacency.shape[0] if adjacency.ndim == 2 else 0)
        return cls(tuple(node_ids), adjacency)


@dataclass(frozen=True)
class KHopMask:
    """Boolean attention mask: allowed[i][j] iff j is within `hops` of i (or i == j)."""

    allowed: np.ndarray
    hops: int

    def __post_init__(self):
        allowed = np.asarray(self.allowed, dtype=bool)
        if allowed.ndim != 2 or allowed.shape[0] != allowed.shape[1]:
            raise DataError(f"mask must be square, got shape {allowed.shape}")
        if not np.all(np.diagonal(allowed)):
            raise DataError("mask diagonal must be all true")
        allowed = allowed.copy()
        allowed.setflags(write=False)
        object.__setattr__(self, "allowed", allowed)


def build_khop_mask(graph: SensorGraph, hops: int) -> KHopMask:
    """Union of the nonzero patterns of the first `hops` adjacency powers, plus I.

    Only the boolean nonzero pattern of the adjacency matters; edge weights
    are ignored.
    """
    if hops < 1:
        raise ValueError(f"hops must be >= 1, got {hops}")
    edges = graph.adjacency != 0
    n = graph.node_count
    allowed = np.eye(n, dtype=bool)
    frontier = np.eye(n, dtype=bool)
    for _ in range(hops):
        # one more hop: rows of `frontier` advance along the edge pattern
        frontier = (frontier.astype(np.uint8) @ edges.astype(np.uint8)) > 0
        new = frontier & ~allowed
        if not new.any():
            break
        allowed |= new
    return KHopMask(allowed=allowed, hops=hops)


def _parse_numeric_row(cells: list[str], path: str, row: int) -> list[float]:
    out = []
    for col, cell in enumerate(cells):
        try:
            value = float(cell)
        except ValueError:
            raise FormatError(
                f"{path}: row {row}, column {col}: not a number: {cell!r}") from None
        if not math.isfinite(value):
            raise DataError(f"{path}: row {row}, column {col}: non-finite entry {cell!r}")
        out.append(value)
    return out


def _looks_like_header(cells: list[str]) -> bool:
    for cell in cells:
        try:
            float(cell)
        except ValueError:
            return True
    return False


def load_adjacency(path) -> SensorGraph:
    """Load an N x N comma-separated adjacency table, optional node-id header row."""
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty adjacency file")
    rows = [[c.strip() for c in line.split(",")] for line in lines]
    node_ids = None
    if _looks_like_header(rows[0]):
        node_ids = tuple(rows[0])
        rows = rows[1:]
        if not rows:
            raise FormatError(f"{path}: header but no data rows")
    width = len(rows[0])
    values = []
    for i, cells in enumerate(rows):
        if len(cells) != width:
            raise FormatError(
                f"{path}: row {i} has {len(cells)} columns, expected {width}")
        values.append(_parse_numeric_row(cells, path, i))
    matrix = np.array(values, dtype=np.float64)
    if matrix.shape[0] != matrix.shape[1]:
        raise FormatError(
            f"{path}: adjacency must be square, got {matrix.shape[0]}x{matrix.shape[1]}")
    if node_ids is not None and len(node_ids) != matrix.shape[1]:
        raise FormatError(
            f"{path}: header has {len(node_ids)} ids for {matrix.shape[1]} columns")
    if node_ids is None:
        node_ids = _default_node_ids(matrix.shape[0])
    return SensorGraph(node_ids=node_ids, adjacency=matrix)


def save_adjacency(path, graph: SensorGraph) -> None:
    """Write the adjacency with a node-id header row (inverse of load_adjacency)."""
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write(",".join(graph.node_ids) + "\n")
        for row in graph.adjacency:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def path_graph(node_count: int, node_ids=None) -> SensorGraph:
    """Symmetric path graph 0-1-2-...-(N-1) with unit weights."""
    adj = np.zeros((node_count, node_count), dtype=np.float64)
    for i in range(node_count - 1):
        adj[i, i + 1] = 1.0
        adj[i + 1, i] = 1.0
    return SensorGraph.from_adjacency(adj, node_ids)
