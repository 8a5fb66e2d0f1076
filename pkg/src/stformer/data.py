"""Feature tensors: loading, synthesis, normalization and sliding windows.

The canonical array layout is (T, N, C): timesteps x nodes x channels, with
channel 0 always the speed being forecast. Normalization statistics are fit
on the training partition only and reused everywhere else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .errors import DataError, FormatError, InsufficientDataError
from .graph import SensorGraph, path_graph

STD_FLOOR = 1e-8

#: start of the synthetic clock; a Monday, so day-of-week starts at 0
SYNTHETIC_EPOCH = datetime(2022, 1, 3, 0, 0)


@dataclass(frozen=True)
class FeatureTensor:
    """(T, N, C) evolution of traffic states; channel 0 is the speed channel."""

    values: np.ndarray
    timestep_minutes: float = 5.0
    channel_names: tuple[str, ...] = ("speed",)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise DataError(f"feature tensor must be (T, N, C), got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("feature tensor contains non-finite entries")
        names = tuple(self.channel_names)
        if len(names) != values.shape[2] or len(names) < 1:
            raise DataError(
                f"{len(names)} channel names for {values.shape[2]} channels")
        if names[0] != "speed":
            raise DataError("first channel must be 'speed'")
        if self.timestep_minutes <= 0:
            raise DataError("timestep_minutes must be positive")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", names)

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    @property
    def node_count(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class NormalizationStats:
    """Z-score statistics of the speed channel (population std, floored)."""

    mean: float
    std: float

    def __post_init__(self):
        object.__setattr__(self, "std", max(float(self.std), STD_FLOOR))
        object.__setattr__(self, "mean", float(self.mean))


@dataclass(frozen=True)
class WindowSample:
    """`input` holds m consecutive steps; `target` the n speed rows right after."""

    input: np.ndarray   # (m, N, C)
    target: np.ndarray  # (n, N), speed channel only


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/validation/test fractions; must sum to 1."""

    train_fraction: float = 0.7
    validation_fraction: float = 0.1
    test_fraction: float = 0.2

    def __post_init__(self):
        fracs = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(f <= 0 for f in fracs):
            raise DataError(f"split fractions must be positive, got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise DataError(f"split fractions must sum to 1, got {sum(fracs)}")


def zscore_fit(tensor: FeatureTensor) -> NormalizationStats:
    """Mean/std of the speed channel. Call on the training partition only."""
    if tensor.steps == 0:
        raise DataError("cannot fit normalization on an empty tensor")
    speeds = tensor.values[:, :, 0]
    return NormalizationStats(mean=float(speeds.mean()), std=float(speeds.std()))


def zscore_apply(tensor: FeatureTensor, stats: NormalizationStats) -> FeatureTensor:
    """Standardize the speed channel; other channels pass through untouched."""
    values = tensor.values.copy()
    values[:, :, 0] = (values[:, :, 0] - stats.mean) / stats.std
    return FeatureTensor(values, tensor.timestep_minutes, tensor.channel_names)


def zscore_invert(matrix: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """Map normalized speeds back to physical units."""
    return np.asarray(matrix, dtype=np.float64) * stats.std + stats.mean


def make_windows(tensor: FeatureTensor, m: int, n: int) -> list[WindowSample]:
    """All stride-1 (input, target) pairs; exactly T - m - n + 1 of them."""
    if m < 1 or n < 1:
        raise ValueError(f"window lengths must be >= 1, got m={m}, n={n}")
    total = tensor.steps
    if total < m + n:
        raise InsufficientDataError(
            f"need at least m+n={m + n} timesteps, have {total}")
    values = tensor.values
    samples = []
    for k in range(total - m - n + 1):
        samples.append(WindowSample(
            input=values[k:k + m],
            target=values[k + m:k + m + n, :, 0],
        ))
    return samples


def windows_to_arrays(samples: list[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into (S, m, N, C) inputs and (S, n, N) targets."""
    if not samples:
        raise DataError("no window samples")
    x = np.stack([s.input for s in samples])
    y = np.stack([s.target for s in samples])
    return x, y


def split_lengths(total: int, spec: SplitSpec) -> tuple[int, int, int]:
    train = int(math.floor(total * spec.train_fraction))
    val = int(math.floor(total * spec.validation_fraction))
    return train, val, total - train - val


def chronological_split(
    tensor: FeatureTensor, spec: SplitSpec = SplitSpec()
) -> tuple[FeatureTensor, FeatureTensor, FeatureTensor]:
    """Contiguous, ordered train/validation/test partitions of the raw tensor."""
    total = tensor.steps
    if total < 3:
        raise InsufficientDataError(f"need at least 3 timesteps to split, have {total}")
    tr, va, _ = split_lengths(total, spec)
    parts = (tensor.values[:tr], tensor.values[tr:tr + va], tensor.values[tr + va:])
    return tuple(
        FeatureTensor(part, tensor.timestep_minutes, tensor.channel_names)
        for part in parts
    )


def add_calendar_channels(tensor: FeatureTensor, timestamps) -> FeatureTensor:
    """Append time-of-day (minutes/1440) and day-of-week (day index/7) channels."""
    timestamps = list(timestamps)
    if len(timestamps) != tensor.steps:
        raise DataError(
            f"{len(timestamps)} timestamps for {tensor.steps} timesteps")
    tod = np.array(
        [(ts.hour * 60 + ts.minute + ts.second / 60.0) / 1440.0 for ts in timestamps])
    dow = np.array([ts.weekday() / 7.0 for ts in timestamps])
    n = tensor.node_count
    extra = np.stack(
        [np.repeat(tod[:, None], n, axis=1), np.repeat(dow[:, None], n, axis=1)],
        axis=2,
    )
    values = np.concatenate([tensor.values, extra], axis=2)
    return FeatureTensor(
        values, tensor.timestep_minutes,
        tensor.channel_names + ("time_of_day", "day_of_week"),
    )


def synthetic_timestamps(steps: int, timestep_minutes: float = 5.0,
                         start: datetime = SYNTHETIC_EPOCH) -> list[datetime]:
    return [start + timedelta(minutes=timestep_minutes * t) for t in range(steps)]


def generate_synthetic(
    nodes: int,
    steps: int,
    planted: list[tuple[int, int, int]],
    noise_std: float,
    seed: int,
    timestep_minutes: float = 5.0,
) -> tuple[FeatureTensor, SensorGraph]:
    """Daily-periodic per-node signals with optional planted lagged copies.

    Each node carries a node-specific mixture of harmonics of the daily cycle
    plus Gaussian noise. For every planted (driver, follower, lag) triple the
    follower's series is replaced by the driver's series delayed by `lag`
    steps (clamped at t=0), plus fresh noise — a cross-node dependency that
    is deliberately absent from the returned path-graph adjacency.
    """
    if nodes < 2:
        raise ValueError(f"need at least 2 nodes, got {nodes}")
    planted = [(int(i), int(j), int(lag)) for i, j, lag in planted]
    for i, j, lag in planted:
        if lag < 1:
            raise ValueError(f"planted lag must be >= 1, got {lag}")
        if steps <= lag:
            raise ValueError(f"steps={steps} must exceed planted lag {lag}")
        if not (0 <= i < nodes and 0 <= j < nodes) or i == j:
            raise ValueError(f"bad planted pair ({i}, {j}) for {nodes} nodes")
    followers = [j for _, j, _ in planted]
    if len(set(followers)) != len(followers):
        raise ValueError("a node may be the follower of at most one planted link")

    rng = np.random.default_rng(seed)
    steps_per_day = 1440.0 / timestep_minutes
    t = np.arange(steps, dtype=np.float64)
    phase = t / steps_per_day  # in days

    base = np.empty((steps, nodes), dtype=np.float64)
    for node in range(nodes):
        offset = rng.uniform(40.0, 60.0)
        series = np.full(steps, offset)
        for harmonic, amp_range in ((1, (6.0, 12.0)), (2, (2.0, 5.0)), (3, (1.0, 3.0))):
            amp = rng.uniform(*amp_range)
            shift = rng.uniform(0.0, 1.0)
            series = series + amp * np.sin(2.0 * np.pi * (harmonic * phase + shift))
        base[:, node] = series
    noise = rng.normal(0.0, noise_std, size=(steps, nodes)) if noise_std > 0 else 0.0
    speeds = base + noise

    for i, j, lag in planted:
        shifted = np.concatenate([np.full(lag, speeds[0, i]), speeds[:steps - lag, i]])
        extra = rng.normal(0.0, noise_std, size=steps) if noise_std > 0 else 0.0
        speeds[:, j] = shifted + extra

    tensor = FeatureTensor(speeds[:, :, None], timestep_minutes, ("speed",))
    return tensor, path_graph(nodes)


# ---------------------------------------------------------------------------
# speeds file I/O
# ---------------------------------------------------------------------------

def _parse_timestamp(cell: str):
    try:
        return datetime.fromisoformat(cell)
    except ValueError:
        return None


def load_speeds(path) -> tuple[FeatureTensor, tuple[str, ...] | None, list[datetime] | None]:
    """Load a T x N speeds table.

    Optional first header row of node ids, optional first column of ISO-8601
    timestamps. Returns (tensor with C=1, node ids or None, timestamps or None).
    """
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty speeds file")
    rows = [[c.strip() for c in line.split(",")] for line in lines]

    node_ids = None
    first = rows[0]
    non_numeric = sum(1 for c in first if _try_float(c) is None)
    if non_numeric:
        header = first
        rows = rows[1:]
        if not rows:
            raise FormatError(f"{path}: header but no data rows")
        node_ids = tuple(header[1:]) if header[0].lower() in ("", "timestamp", "time") \
            else tuple(header)

    has_timestamps = _parse_timestamp(rows[0][0]) is not None
    timestamps = [] if has_timestamps else None
    data = []
    width = len(rows[0])
    for r, cells in enumerate(rows):
        if len(cells) != width:
            raise FormatError(f"{path}: row {r} has {len(cells)} columns, expected {width}")
        if has_timestamps:
            ts = _parse_timestamp(cells[0])
            if ts is None:
                raise FormatError(f"{path}: row {r}: bad timestamp {cells[0]!r}")
            timestamps.append(ts)
            cells = cells[1:]
        values = []
        for col, cell in enumerate(cells):
            value = _try_float(cell)
            if value is None:
                raise FormatError(f"{path}: row {r}, column {col}: not a number: {cell!r}")
            if not math.isfinite(value):
                raise DataError(f"{path}: row {r}, column {col}: non-finite entry")
            values.append(value)
        data.append(values)
    matrix = np.array(data, dtype=np.float64)
    if node_ids is not None and len(node_ids) != matrix.shape[1]:
        raise FormatError(
            f"{path}: header has {len(node_ids)} ids for {matrix.shape[1]} columns")
    tensor = FeatureTensor(matrix[:, :, None], channel_names=("speed",))
    return tensor, node_ids, timestamps


def _try_float(cell: str):
    try:
        return float(cell)
    except ValueError:
        return None


def save_speeds(path, tensor: FeatureTensor, node_ids=None, timestamps=None) -> None:
    """Write the speed channel as CSV (inverse of load_speeds)."""
    speeds = tensor.values[:, :, 0]
    if node_ids is None:
        node_ids = tuple(f"s{i}" for i in range(tensor.node_count))
    if timestamps is not None and len(timestamps) != tensor.steps:
        raise DataError("timestamp count does not match tensor length")
    with open(str(path), "w", encoding="utf-8") as fh:
        header = list(node_ids)
        if timestamps is not None:
            header = ["timestamp"] + header
        fh.write(",".join(header) + "\n")
        for r in range(tensor.steps):
            cells = [repr(float(v)) for v in speeds[r]]
            if timestamps is not None:
                cells = [timestamps[r].isoformat()] + cells
            fh.write(",".join(cells) + "\n")


def save_synthetic_metadata(path, *, nodes, steps, planted, noise_std, seed,
                            timestep_minutes=5.0, start=SYNTHETIC_EPOCH) -> None:
    meta = {
        "nodes": nodes,
        "steps": steps,
        "planted": [list(p) for p in planted],
        "noise_std": noise_std,
        "seed": seed,
        "timestep_minutes": timestep_minutes,
        "start": start.isoformat(),
    }
    with open(str(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
