"""Privacy-preserving aggregate release: per-stop tap counts in fixed time
blocks, perturbed with calibrated noise.

Instead of longitudinal per-card records, the safe release publishes the
number of touch-on / touch-off events per (stop, time block), then adds
independent noise with scale sensitivity/epsilon.  Noise covers the full
stop-by-block lattice of the period (absent cells would otherwise leak
exact zeros) and is derived per cell from the seed and the cell's own
coordinates, so any evaluation order produces the same release.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import IO, Iterator, Optional, Tuple, Union

import numpy as np

from .core import (
    SECONDS_PER_DAY,
    Period,
    TapDataError,
    from_epoch_seconds,
    to_epoch_seconds,
)
from .ingest import EventStore
from .seeding import mix64_vec, uniform01_vec


class InvalidBlock(TapDataError):
    """The block length does not divide an hour."""


class Mechanism(Enum):
    GEOMETRIC = "geometric"
    LAPLACE = "laplace"


class PostProcess(Enum):
    NONE = "none"
    ROUND_AND_CLAMP_TO_ZERO = "roundAndClampToZero"


@dataclass(frozen=True)
class EventLevel:
    """Adjacency protecting one event; sensitivity 1."""


@dataclass(frozen=True)
class CardLevel:
    """Adjacency protecting a card's whole (clamped) contribution."""

    max_contribution: int

    def __post_init__(self):
        if self.max_contribution < 1:
            raise ValueError("maxContribution must be >= 1")


Adjacency = Union[EventLevel, CardLevel]


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    seed: int
    adjacency: Adjacency = EventLevel()
    mechanism: Mechanism = Mechanism.GEOMETRIC
    post_process: PostProcess = PostProcess.NONE

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")

    @property
    def sensitivity(self) -> int:
        if isinstance(self.adjacency, CardLevel):
            return self.adjacency.max_contribution
        return 1

    def public_metadata(self) -> dict:
        """Release sidecar content; deliberately excludes the seed."""
        meta = {
            "epsilon": self.epsilon,
            "mechanism": self.mechanism.value,
            "postProcess": self.post_process.value,
            "adjacency": {"level": "card", "maxContribution": self.adjacency.max_contribution}
            if isinstance(self.adjacency, CardLevel) else {"level": "event"},
            "seedPolicy": "seed withheld from published artifacts",
        }
        return meta


DIRECTION_ON = "on"
DIRECTION_OFF = "off"


class AggregateTable:
    """Counts per (stopId, blockStart, direction).

    True-count tables carry only occupied cells; noisy tables carry the
    full stop-by-block lattice (and may hold negative or non-integer
    values unless post-processed).
    """

    def __init__(self, block_minutes: int, period: Period, stops: np.ndarray,
                 stop_idx: np.ndarray, block_idx: np.ndarray, dir_off: np.ndarray,
                 values: np.ndarray, noisy: bool = False):
        self.block_minutes = block_minutes
        self.period = period
        self.stops = np.asarray(stops, np.int64)
        self._stop_idx = stop_idx    # index into stops, per cell
        self._block_idx = block_idx  # block ordinal within period, per cell
        self._dir_off = dir_off      # bool per cell: True = touch-off
        self.values = values
        self.noisy = noisy

    @property
    def block_seconds(self) -> int:
        return self.block_minutes * 60

    @property
    def blocks_per_day(self) -> int:
        return SECONDS_PER_DAY // self.block_seconds

    @property
    def n_blocks(self) -> int:
        days = (self.period.end - self.period.start).days + 1
        return days * self.blocks_per_day

    def __len__(self) -> int:
        return len(self.values)

    def block_start(self, block_ordinal: int) -> datetime:
        return from_epoch_seconds(self.period.start_second
                                  + block_ordinal * self.block_seconds)

    def cells(self) -> Iterator[Tuple[int, datetime, str, float]]:
        for i in range(len(self.values)):
            yield (int(self.stops[self._stop_idx[i]]),
                   self.block_start(int(self._block_idx[i])),
                   DIRECTION_OFF if self._dir_off[i] else DIRECTION_ON,
                   self.values[i].item())

    def get(self, stop_id: int, block_start: datetime, direction: str) -> float:
        """Cell value; absent cells read as zero."""
        i_s = int(np.searchsorted(self.stops, stop_id))
        if i_s >= len(self.stops) or self.stops[i_s] != stop_id:
            return 0.0
        ordinal = (to_epoch_seconds(block_start) - self.period.start_second) // self.block_seconds
        flat = (self._stop_idx.astype(np.int64) * self.n_blocks + self._block_idx) * 2 \
            + self._dir_off
        want = (i_s * self.n_blocks + ordinal) * 2 + (1 if direction == DIRECTION_OFF else 0)
        j = int(np.searchsorted(flat, want))
        if j < len(flat) and flat[j] == want:
            return self.values[j].item()
        return 0.0

    def total(self, direction: str) -> float:
        m = self._dir_off if direction == DIRECTION_OFF else ~self._dir_off
        return self.values[m].sum().item()

    def write_csv(self, sink: IO) -> None:
        sink.write("stopId,blockStart,direction,count\n")
        starts = np.datetime_as_string(
            (self.period.start_second
             + self._block_idx.astype(np.int64) * self.block_seconds
             ).astype("datetime64[s]"), unit="s")
        vals = self.values
        as_int = np.issubdtype(vals.dtype, np.integer)
        for i in range(len(vals)):
            stop = self.stops[self._stop_idx[i]]
            d = DIRECTION_OFF if self._dir_off[i] else DIRECTION_ON
            v = vals[i]
            sink.write(f"{stop},{starts[i]},{d},{v if as_int else repr(float(v))}\n")


def aggregate_counts(store: EventStore, block_minutes: int = 15,
                     period: Optional[Period] = None,
                     max_contribution_per_card: Optional[int] = None) -> AggregateTable:
    """Exact tap counts per (stop, block, direction); zero cells omitted.

    With ``max_contribution_per_card`` set, each card's contribution to
    any single cell is clamped to that many events (the true counts
    required by card-level adjacency).
    """
    if block_minutes <= 0 or 60 % block_minutes != 0:
        raise InvalidBlock(f"block length {block_minutes} must divide 60 minutes")
    if period is None:
        if store.event_count == 0:
            period = Period(date(1970, 1, 1), date(1970, 1, 1))
        else:
            period = Period(store.first_time.date(), store.last_time.date())

    block_s = block_minutes * 60
    stops = np.unique(np.concatenate([store.on_stops,
                                      store.off_stops[store.has_off]])) \
        if store.event_count else np.empty(0, np.int64)
    n_blocks = ((period.end - period.start).days + 1) * (SECONDS_PER_DAY // block_s)

    def side(times, stop_vals, cards):
        m = (times >= period.start_second) & (times <= period.end_second)
        t, s, c = times[m], stop_vals[m], cards[m]
        block = (t - period.start_second) // block_s
        stop_i = np.searchsorted(stops, s)
        return stop_i.astype(np.int64), block.astype(np.int64), c

    on_stop_i, on_block, on_cards = side(store.on_times, store.on_stops, store.card_ids)
    off_m = store.has_off
    off_stop_i, off_block, off_cards = side(store.off_times[off_m],
                                            store.off_stops[off_m],
                                            store.card_ids[off_m])

    stop_i = np.concatenate([on_stop_i, off_stop_i])
    block = np.concatenate([on_block, off_block])
    is_off = np.concatenate([np.zeros(len(on_block), bool), np.ones(len(off_block), bool)])
    cell = (stop_i * n_blocks + block) * 2 + is_off

    if max_contribution_per_card is not None:
        if max_contribution_per_card < 1:
            raise ValueError("maxContribution must be >= 1")
        cards = np.concatenate([on_cards, off_cards]).astype(np.int64)
        n_cells = len(stops) * n_blocks * 2
        combo = cards * n_cells + cell
        combo_vals, combo_counts = np.unique(combo, return_counts=True)
        clamped = np.minimum(combo_counts, max_contribution_per_card)
        cell_vals, cell_counts = _sum_by(combo_vals % n_cells, clamped)
    else:
        cell_vals, cell_counts = np.unique(cell, return_counts=True)

    out_stop_idx = (cell_vals // 2 // n_blocks).astype(np.int64)
    out_block = (cell_vals // 2 % n_blocks).astype(np.int64)
    out_dir = (cell_vals % 2).astype(bool)
    return AggregateTable(block_minutes, period, stops, out_stop_idx, out_block,
                          out_dir, cell_counts.astype(np.int64), noisy=False)


def _sum_by(keys: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    vals, inv = np.unique(keys, return_inverse=True)
    sums = np.zeros(len(vals), np.int64)
    np.add.at(sums, inv, weights)
    return vals, sums


def geometric_mean_abs_noise(epsilon: float, sensitivity: int = 1) -> float:
    """Analytic E|X| of the two-sided geometric mechanism."""
    a = math.exp(-epsilon / sensitivity)
    return 2 * a / (1 - a * a)


def laplace_mean_abs_noise(epsilon: float, sensitivity: int = 1) -> float:
    return sensitivity / epsilon


def add_noise(table: AggregateTable, params: PrivacyParams) -> AggregateTable:
    """Perturb every lattice cell (including zero cells) independently.

    The input must hold true counts: exact for event-level adjacency,
    per-card clamped (``aggregate_counts(..., max_contribution_per_card)``)
    for card-level.  Deterministic for a given seed.
    """
    if table.noisy:
        raise ValueError("refusing to add noise to an already-noisy table")
    n_blocks = table.n_blocks
    n_stops = len(table.stops)
    n_cells = n_stops * n_blocks * 2

    # lattice coordinates in canonical (stop, block, direction) order
    stop_idx = np.repeat(np.arange(n_stops, dtype=np.int64), n_blocks * 2)
    block_idx = np.tile(np.repeat(np.arange(n_blocks, dtype=np.int64), 2), n_stops)
    dir_off = np.tile(np.asarray([False, True]), n_stops * n_blocks)

    true_vals = np.zeros(n_cells, np.float64)
    flat = (table._stop_idx.astype(np.int64) * n_blocks + table._block_idx) * 2 \
        + table._dir_off
    true_vals[flat] = table.values

    # per-cell noise keyed by content, not position
    stop_ids = table.stops[stop_idx]
    dirs = dir_off.astype(np.int64)
    block_secs = table.period.start_second + block_idx * table.block_seconds
    sens = params.sensitivity
    if params.mechanism is Mechanism.GEOMETRIC:
        alpha = math.exp(-params.epsilon / sens)
        u1 = uniform01_vec(mix64_vec(params.seed, stop_ids, block_secs, dirs, 0))
        u2 = uniform01_vec(mix64_vec(params.seed, stop_ids, block_secs, dirs, 1))
        if alpha == 0.0:
            noise = np.zeros(n_cells)
        else:
            g1 = np.floor(np.log1p(-u1) / math.log(alpha))
            g2 = np.floor(np.log1p(-u2) / math.log(alpha))
            noise = g1 - g2
    else:
        b = sens / params.epsilon
        u = uniform01_vec(mix64_vec(params.seed, stop_ids, block_secs, dirs, 0)) - 0.5
        noise = -b * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    values = true_vals + noise
    if params.post_process is PostProcess.ROUND_AND_CLAMP_TO_ZERO:
        values = np.maximum(np.rint(values), 0.0).astype(np.int64)
    return AggregateTable(table.block_minutes, table.period, table.stops,
                          stop_idx, block_idx, dir_off, values, noisy=True)


def private_release(store: EventStore, params: PrivacyParams,
                    block_minutes: int = 15,
                    period: Optional[Period] = None) -> AggregateTable:
    """Aggregate (clamping if card-level) and perturb in one step."""
    clamp = params.adjacency.max_contribution \
        if isinstance(params.adjacency, CardLevel) else None
    table = aggregate_counts(store, block_minutes, period,
                             max_contribution_per_card=clamp)
    return add_noise(table, params)


def write_release(table: AggregateTable, params: PrivacyParams,
                  path: Union[str, Path]) -> None:
    """CSV plus a ``.meta.json`` sidecar describing the mechanism (the
    seed itself is never published)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        table.write_csv(fh)
    meta = dict(params.public_metadata(), blockMinutes=table.block_minutes,
                periodStart=table.period.start.isoformat(),
                periodEnd=table.period.end.isoformat())
    with open(path.with_suffix(path.suffix + ".meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
