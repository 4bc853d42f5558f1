"""Event series ingestion, inter-event durations and rate estimates.

Timestamps are held as float64 seconds (or abstract time units). Inputs at
day resolution map to midnight UTC, which is exact in float64, and produce
zero inter-event times for same-day events unless a jitter policy is used.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Iterable, Literal, Optional, TextIO, Tuple, Union

import numpy as np

from .errors import IngestError, InsufficientDataError

__all__ = [
    "DAY",
    "EventSeries",
    "IngestConfig",
    "InterEventSeries",
    "KEEP_ZEROS",
    "TiePolicy",
    "inter_event_times",
    "jitter",
    "mle_rate",
    "parse_events",
]

DAY = 86400.0

TimestampFormat = Literal["auto", "iso", "epoch"]


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EventSeries:
    """Ordered event timestamps observed over ``window = (t_start, t_end)``.

    ``resolution`` is the time quantum of the source data (one day for
    date-only input); the jitter tie policy spreads events over it.
    """

    network_id: str
    timestamps: np.ndarray
    window: Tuple[float, float]
    resolution: float = 1.0

    def __post_init__(self):
        ts = _frozen(self.timestamps)
        object.__setattr__(self, "timestamps", ts)
        t0, t1 = (float(self.window[0]), float(self.window[1]))
        object.__setattr__(self, "window", (t0, t1))
        if ts.ndim != 1:
            raise ValueError("timestamps must be one-dimensional")
        if not np.all(np.isfinite(ts)):
            raise ValueError("timestamps must be finite")
        if ts.size and np.any(np.diff(ts) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if ts.size:
            if not t0 < t1:
                raise ValueError(f"window must satisfy t_start < t_end, got {self.window}")
            if ts[0] < t0 or ts[-1] > t1:
                raise ValueError("window excludes some events")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")

    @classmethod
    def from_times(cls, times, window=None, network_id="", resolution=1.0):
        """Build a series from unsorted times; window defaults to the data span."""
        ts = np.sort(np.asarray(times, dtype=np.float64))
        if window is None:
            if ts.size == 0:
                raise InsufficientDataError("cannot infer a window from zero events")
            window = (ts[0], ts[-1])
        return cls(network_id, ts, window, resolution)

    @property
    def n(self) -> int:
        return int(self.timestamps.size)

    @property
    def span(self) -> float:
        return self.window[1] - self.window[0]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class TiePolicy:
    """How coincident timestamps are treated when forming durations.

    ``keep-zeros`` differences the data as is. ``jitter`` adds an independent
    uniform offset on ``[0, resolution)`` to each timestamp, drawn from
    ``seed``, and re-sorts. When ``resolution`` is None the series' own
    resolution is used.
    """

    kind: Literal["keep-zeros", "jitter"] = "keep-zeros"
    seed: Optional[int] = None
    resolution: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("keep-zeros", "jitter"):
            raise ValueError(f"unknown tie policy {self.kind!r}")
        if self.kind == "jitter" and self.seed is None:
            raise ValueError("jitter policy requires a seed")

    def describe(self) -> str:
        if self.kind == "jitter":
            return f"jitter(seed={self.seed})"
        return self.kind


KEEP_ZEROS = TiePolicy()


def jitter(seed: int, resolution: Optional[float] = None) -> TiePolicy:
    return TiePolicy("jitter", seed, resolution)


@dataclass(frozen=True)
class InterEventSeries:
    durations: np.ndarray
    source_count: int
    tie_policy: TiePolicy = field(default=KEEP_ZEROS)

    def __post_init__(self):
        d = _frozen(self.durations)
        object.__setattr__(self, "durations", d)
        if d.size != max(self.source_count - 1, 0):
            raise ValueError("durations length must equal source_count - 1")
        if np.any(d < 0):
            raise ValueError("durations must be non-negative")

    @classmethod
    def from_durations(cls, durations, tie_policy=KEEP_ZEROS):
        d = np.asarray(durations, dtype=np.float64)
        return cls(d, d.size + 1, tie_policy)

    def __len__(self):
        return int(self.durations.size)


def inter_event_times(series: EventSeries, policy: TiePolicy = KEEP_ZEROS) -> InterEventSeries:
    """Differences between successive timestamps.

    >>> s = EventSeries.from_times([0, 10, 25])
    >>> inter_event_times(s).durations.tolist()
    [10.0, 15.0]
    """
    if series.n < 2:
        raise InsufficientDataError(f"need at least 2 events for inter-event times, got {series.n}")
    ts = series.timestamps
    if policy.kind == "jitter":
        res = series.resolution if policy.resolution is None else float(policy.resolution)
        rng = np.random.default_rng(policy.seed)
        ts = np.sort(ts + rng.uniform(0.0, res, size=ts.size))
    return InterEventSeries(np.diff(ts), series.n, policy)


def mle_rate(series: EventSeries) -> float:
    """Events per unit time, ``n / (t_end - t_start)``."""
    if series.n == 0:
        raise InsufficientDataError("rate undefined for an empty series")
    if not series.span > 0:
        raise InsufficientDataError("rate undefined for a zero-length window")
    return series.n / series.span


# ----------------------------------------------------------------- ingestion


@dataclass(frozen=True)
class IngestConfig:
    """Selects one network from a ``network_id,timestamp`` table.

    ``timestamp_format`` is ``"iso"`` (``YYYY-MM-DD[THH:MM:SS]``, naive times
    read as UTC), ``"epoch"`` (numeric seconds) or ``"auto"`` (numeric if it
    parses as a float, ISO otherwise).
    """

    network_id: str
    delimiter: str = ","
    timestamp_format: TimestampFormat = "auto"
    window: Optional[Tuple[float, float]] = None


def _parse_iso(text: str) -> Tuple[float, bool]:
    """Return (epoch seconds, is_date_only)."""
    if len(text) == 10:
        d = date.fromisoformat(text)
        dt = datetime(d.year, d.month, d.day, tzinfo=timezone.utc)
        return dt.timestamp(), True
    if text[-1:] in ("Z", "z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp(), False


def _parse_timestamp(raw: str, fmt: str, row: int) -> Tuple[float, bool]:
    raw = raw.strip()
    if fmt in ("epoch", "auto"):
        try:
            value = float(raw)
        except ValueError:
            if fmt == "epoch":
                raise IngestError(f"cannot parse numeric timestamp {raw!r}", row) from None
        else:
            if not math.isfinite(value):
                raise IngestError(f"non-finite timestamp {raw!r}", row)
            return value, False
    try:
        return _parse_iso(raw)
    except ValueError:
        raise IngestError(f"cannot parse timestamp {raw!r}", row) from None


def _rows(text: Union[str, TextIO], delimiter: str) -> Iterable[Tuple[int, list]]:
    stream = io.StringIO(text) if isinstance(text, str) else text
    for lineno, row in enumerate(csv.reader(stream, delimiter=delimiter), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        yield lineno, row


def parse_events(text: Union[str, TextIO], config: IngestConfig) -> EventSeries:
    """Read a delimiter-separated ``network_id,timestamp`` table.

    Rows may appear in any order; the header line is optional. Every row is
    validated, not only the selected network's. Raises :class:`IngestError`
    with the 1-based row number on malformed input.
    """
    times = []
    date_only = True
    for lineno, row in _rows(text, config.delimiter):
        cells = [c.strip() for c in row]
        if lineno == 1 and [c.lower() for c in cells] == ["network_id", "timestamp"]:
            continue
        if len(cells) != 2:
            raise IngestError(f"expected 2 columns, got {len(cells)}", lineno)
        network, raw = cells
        value, is_date = _parse_timestamp(raw, config.timestamp_format, lineno)
        if network == config.network_id:
            times.append(value)
            date_only = date_only and is_date
    if not times:
        raise IngestError(f"no events for network {config.network_id!r}")
    ts = np.sort(np.asarray(times, dtype=np.float64))
    if config.window is None:
        window = (float(ts[0]), float(ts[-1]))
        if not window[0] < window[1]:
            raise InsufficientDataError(
                f"{ts.size} event(s) at a single instant; pass an explicit window"
            )
    else:
        window = (float(config.window[0]), float(config.window[1]))
    if ts[0] < window[0] or ts[-1] > window[1]:
        raise IngestError(f"window {window} excludes some events")
    if not window[0] < window[1]:
        raise IngestError(f"degenerate window {window}")
    return EventSeries(config.network_id, ts, window, DAY if date_only else 1.0)
