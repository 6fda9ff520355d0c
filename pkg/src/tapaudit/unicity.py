"""Sampled-set uniqueness measurement across granularities and cardinalities.

For every card, a fixed random permutation of its selected sub-events is
drawn once per run (seeded by ``mix64(seed, cardId)``) and prefixes of
length *n* are tested for uniqueness against the signature calendar: the
card is unique iff no other card appears in all of its sampled bins.

The calendar path is vectorised; :func:`brute_force_unicity` is the
independent oracle that re-derives every verdict by direct pairwise
signature-set containment over materialised events.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Dict, IO, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import (
    EventKind,
    EventSignature,
    Period,
    TapDataError,
    TimeGranularity,
    location_key,
    truncate_seconds,
    truncate_time,
)
from .index import Bin, bin_subevents, select_subevents
from .ingest import EventStore
from .seeding import mix64

BRUTE_FORCE_GUARD = 10_000


class SelfNotInBins(TapDataError):
    """A uniqueness check was asked about a card absent from its own bins."""


class StoreTooLarge(TapDataError):
    """The brute-force oracle refuses stores above its documented guard size."""


class SubEvent(NamedTuple):
    """One side of a tap event, as sampled for uniqueness testing."""

    time: datetime
    mode: int
    stop: int


def signature_of(sub: SubEvent, g: TimeGranularity, include_location: bool) -> EventSignature:
    loc = location_key(sub.mode, sub.stop) if include_location else None
    return EventSignature(truncate_time(sub.time, g), loc)


def selected_subevents(store: EventStore, card_id: int, kind: EventKind,
                       period: Optional[Period] = None) -> List[SubEvent]:
    """A card's selected sub-events in canonical order (per-card event
    order, touch-on before touch-off when both sides are selected)."""
    out: List[SubEvent] = []
    for ev in store.events_for(card_id):
        if kind in (EventKind.TOUCH_ON, EventKind.BOTH):
            if period is None or period.contains(ev.on_time):
                out.append(SubEvent(ev.on_time, ev.on_mode, ev.on_stop_id))
        if kind in (EventKind.TOUCH_OFF, EventKind.BOTH) and ev.has_off:
            if period is None or period.contains(ev.off_time):
                out.append(SubEvent(ev.off_time, ev.off_mode, ev.off_stop_id))
    return out


def permutation_for(card_seed: int, count: int) -> np.ndarray:
    """The card's fixed uniform permutation of its sub-event positions."""
    return np.random.default_rng(card_seed).permutation(count)


def sample_first_n(items: Sequence, n: int, card_seed: int) -> list:
    """First ``min(n, len(items))`` entries of a seeded uniform permutation.

    The permutation depends only on ``card_seed``, so prefixes are nested
    across cardinalities: ``sample_first_n(x, 2, s)`` is a prefix of
    ``sample_first_n(x, 5, s)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    items = list(items)
    perm = permutation_for(card_seed, len(items))
    return [items[i] for i in perm[: min(n, len(items))]]


def is_unique(bins: Sequence[Bin], self_id: int) -> bool:
    """True iff the intersection of the bins' member sets is exactly
    ``{self_id}``; duplicate bin references are harmless."""
    if not bins:
        raise ValueError("bins must be non-empty")
    for b in bins:
        if self_id not in b.members:
            raise SelfNotInBins(f"card {self_id} not in bin {b.signature}")
    inter = set(bins[0].members)
    for b in bins[1:]:
        inter &= b.members
        if len(inter) == 1:
            break
    return inter == {self_id}


@dataclass(frozen=True)
class UnicityParams:
    """Sweep settings for a uniqueness run."""

    granularities: Tuple[TimeGranularity, ...]
    location_flags: Tuple[bool, ...]
    cardinalities: Tuple[int, ...]
    kind: EventKind = EventKind.TOUCH_ON
    seed: int = 0
    period: Optional[Period] = None
    #: Cards with fewer selected sub-events than this are dropped from the
    #: denominator (1 reproduces the headline methodology; raising it to
    #: max(cardinalities) isolates the fully-filled-set sub-population).
    min_events: int = 1

    def __post_init__(self):
        if not self.granularities or not self.location_flags or not self.cardinalities:
            raise ValueError("granularities, location_flags and cardinalities must be non-empty")
        if any(n < 1 for n in self.cardinalities):
            raise ValueError("cardinalities must be >= 1")
        if list(self.cardinalities) != sorted(self.cardinalities):
            raise ValueError("cardinalities must be ascending")
        if self.min_events < 1:
            raise ValueError("min_events must be >= 1")


@dataclass(frozen=True)
class UnicityCell:
    cards_considered: int
    cards_unique: int

    @property
    def percent_unique(self) -> float:
        if self.cards_considered == 0:
            return 0.0
        return 100.0 * self.cards_unique / self.cards_considered


@dataclass
class UnicityReport:
    """Percent-unique per (granularity, location flag, cardinality)."""

    params: UnicityParams
    cells: Dict[Tuple[TimeGranularity, bool, int], UnicityCell]
    flags: Optional[Dict[Tuple[TimeGranularity, bool, int], Dict[int, bool]]] = None

    def cell(self, g: TimeGranularity, loc: bool, n: int) -> UnicityCell:
        return self.cells[(g, loc, n)]

    def rows(self) -> Iterable[Tuple[TimeGranularity, bool, int, UnicityCell]]:
        for g in self.params.granularities:
            for loc in self.params.location_flags:
                for n in self.params.cardinalities:
                    yield g, loc, n, self.cells[(g, loc, n)]

    def write_csv(self, sink: IO) -> None:
        sink.write("granularity,location,n,cardsConsidered,cardsUnique,percentUnique\n")
        for g, loc, n, cell in self.rows():
            sink.write(f"{g.value},{'with' if loc else 'without'},{n},"
                       f"{cell.cards_considered},{cell.cards_unique},"
                       f"{cell.percent_unique:.6f}\n")


def _intersect_sorted(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Intersection of two sorted unique arrays."""
    if len(a) > len(b):
        a, b = b, a
    if len(b) == 0:
        return b[:0]
    pos = np.searchsorted(b, a)
    pos[pos == len(b)] = len(b) - 1
    return a[b[pos] == a]


def run_unicity(store: EventStore, params: UnicityParams,
                collect_flags: bool = False) -> UnicityReport:
    """Evaluate uniqueness for every requested setting.

    Deterministic for a given (store, params); the per-card sample is
    shared across all granularity/location settings of the run, and
    prefixes are nested across cardinalities.
    """
    sub = select_subevents(store, params.kind, params.period)
    counts = np.diff(sub.starts)
    eligible = np.nonzero(counts >= params.min_events)[0]
    n_elig = len(eligible)
    max_n = max(params.cardinalities)

    # Sampled prefix of each eligible card, padded to max_n by repeating
    # the last pick (harmless: dedup and min() are unaffected).
    pad = np.empty((n_elig, max_n), dtype=np.int64)
    samp_len = np.minimum(counts[eligible], max_n).astype(np.int64)
    for j in range(n_elig):
        p = eligible[j]
        cnt = int(counts[p])
        start = int(sub.starts[p])
        k = int(samp_len[j])
        picks = permutation_for(mix64(params.seed, int(sub.cards[p])), cnt)[:k]
        pad[j, :k] = start + picks
        if k < max_n:
            pad[j, k:] = pad[j, k - 1]
    elig_cards = sub.cards[eligible]

    cells: Dict[Tuple[TimeGranularity, bool, int], UnicityCell] = {}
    flags_out: Dict[Tuple[TimeGranularity, bool, int], Dict[int, bool]] = {}

    for g in params.granularities:
        trunc = truncate_seconds(sub.time, g) if len(sub) else sub.time
        for loc in params.location_flags:
            bi = bin_subevents(sub, g, loc, trunc=trunc)
            dc = bi.distinct_counts()
            sampled_bins = bi.bin_of[pad] if n_elig else np.empty((0, max_n), np.int64)
            for n in params.cardinalities:
                if n_elig == 0:
                    cells[(g, loc, n)] = UnicityCell(0, 0)
                    if collect_flags:
                        flags_out[(g, loc, n)] = {}
                    continue
                prefix = sampled_bins[:, :n]
                min_count = dc[prefix].min(axis=1)
                unique_flags = min_count == 1
                hard = np.nonzero(~unique_flags)[0]
                if n > 1 and len(hard):
                    memo: Dict[bytes, bool] = {}
                    for j in hard.tolist():
                        bins_j = np.unique(prefix[j])
                        if len(bins_j) == 1:
                            continue  # single bin with >= 2 members
                        key = bins_j.tobytes()
                        got = memo.get(key)
                        if got is None:
                            order = np.argsort(dc[bins_j], kind="stable")
                            cur = bi.members_of(int(bins_j[order[0]]))
                            for b in bins_j[order[1:]]:
                                cur = _intersect_sorted(cur, bi.members_of(int(b)))
                                if len(cur) <= 1:
                                    break
                            got = len(cur) == 1
                            memo[key] = got
                        if got:
                            unique_flags[j] = True
                cells[(g, loc, n)] = UnicityCell(n_elig, int(unique_flags.sum()))
                if collect_flags:
                    flags_out[(g, loc, n)] = {
                        int(c): bool(u) for c, u in zip(elig_cards, unique_flags)
                    }

    return UnicityReport(params=params, cells=cells,
                         flags=flags_out if collect_flags else None)


def sampled_subevent_sets(store: EventStore, kind: EventKind, seed: int, n: int,
                          period: Optional[Period] = None,
                          min_events: int = 1) -> Dict[int, List[SubEvent]]:
    """The exact per-card samples a run with these settings evaluates,
    derived through the object-level path (used to feed the oracle)."""
    out: Dict[int, List[SubEvent]] = {}
    for cid in store.cards().tolist():
        subs = selected_subevents(store, cid, kind, period)
        if len(subs) >= min_events and subs:
            out[cid] = sample_first_n(subs, n, mix64(seed, cid))
    return out


def brute_force_unicity(store: EventStore,
                        sampled_sets: Mapping[int, Sequence[SubEvent]],
                        g: TimeGranularity, include_location: bool,
                        kind: EventKind = EventKind.TOUCH_ON,
                        period: Optional[Period] = None) -> Dict[int, bool]:
    """Oracle: a card is unique iff no other card's full signature set
    contains the card's sampled signature set.

    Uses no calendar: signatures are recomputed per event through the
    object path and compared pairwise.  Guarded to small stores.
    """
    if store.event_count > BRUTE_FORCE_GUARD:
        raise StoreTooLarge(
            f"{store.event_count} events exceeds the oracle guard of {BRUTE_FORCE_GUARD}")
    full: Dict[int, set] = {}
    for cid in store.cards().tolist():
        sigs = {signature_of(se, g, include_location)
                for se in selected_subevents(store, cid, kind, period)}
        if sigs:
            full[cid] = sigs
    out: Dict[int, bool] = {}
    for cid, sampled in sampled_sets.items():
        ssigs = {signature_of(se, g, include_location) for se in sampled}
        unique = True
        for other, osigs in full.items():
            if other != cid and ssigs <= osigs:
                unique = False
                break
        out[cid] = unique
    return out
