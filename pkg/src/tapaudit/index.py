"""The signature calendar: a bin map from event signature to matching cards.

Binning runs columnar (factorise truncated times and location codes, then
group) so a calendar over tens of millions of sub-events builds in seconds.
The object-level API (:class:`Bin`, :meth:`SignatureCalendar.card_bins`)
materialises views lazily on top of the same arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .core import (
    EventKind,
    EventSignature,
    Period,
    TimeGranularity,
    UnknownCard,
    from_epoch_seconds,
    location_key,
    to_epoch_seconds,
    truncate_seconds,
)
from .ingest import EventStore

SNAPSHOT_MAGIC = "tapaudit-calendar"
SNAPSHOT_VERSION = 1


@dataclass
class SubEvents:
    """Columnar selection of sub-events for one event kind.

    Rows are ordered canonically: by card, then per-card event order,
    with an event's touch-on before its touch-off when both are selected.
    """

    card: np.ndarray   # int64
    time: np.ndarray   # int64 epoch seconds
    mode: np.ndarray   # int16
    stop: np.ndarray   # int32
    cards: np.ndarray  # distinct cards, ascending
    starts: np.ndarray  # per-card slice offsets, len = len(cards) + 1

    def __len__(self) -> int:
        return len(self.card)

    def card_slice(self, card_id: int) -> Optional[Tuple[int, int]]:
        i = int(np.searchsorted(self.cards, card_id))
        if i >= len(self.cards) or self.cards[i] != card_id:
            return None
        return int(self.starts[i]), int(self.starts[i + 1])


def select_subevents(store: EventStore, kind: EventKind,
                     period: Optional[Period] = None) -> SubEvents:
    """Gather the sub-events a kind selects, optionally limited to a period.

    A sub-event belongs to the period iff its own timestamp falls on one
    of the period's dates; for ``BOTH`` an event whose off side is out of
    period still contributes its on side.
    """
    if kind is EventKind.TOUCH_ON:
        card, time = store.card_ids, store.on_times
        mode, stop = store.on_modes, store.on_stops
    elif kind is EventKind.TOUCH_OFF:
        m = store.has_off
        card, time = store.card_ids[m], store.off_times[m]
        mode, stop = store.off_modes[m], store.off_stops[m]
    elif kind is EventKind.BOTH:
        n = store.event_count
        rows_on = np.arange(n, dtype=np.int64)
        rows_off = np.nonzero(store.has_off)[0]
        row = np.concatenate([rows_on, rows_off])
        side = np.concatenate([np.zeros(n, np.int8), np.ones(len(rows_off), np.int8)])
        order = np.lexsort((side, row))
        row, side = row[order], side[order]
        card = store.card_ids[row]
        is_on = side == 0
        time = np.where(is_on, store.on_times[row], store.off_times[row])
        mode = np.where(is_on, store.on_modes[row], store.off_modes[row]).astype(np.int16)
        stop = np.where(is_on, store.on_stops[row], store.off_stops[row]).astype(np.int32)
    else:
        raise ValueError(f"unknown event kind {kind!r}")

    if period is not None and len(time):
        m = (time >= period.start_second) & (time <= period.end_second)
        card, time, mode, stop = card[m], time[m], mode[m], stop[m]

    card = np.ascontiguousarray(card, np.int64)
    cards, starts = np.unique(card, return_index=True)
    starts = np.append(starts, len(card))
    return SubEvents(card=card,
                     time=np.ascontiguousarray(time, np.int64),
                     mode=np.ascontiguousarray(mode, np.int16),
                     stop=np.ascontiguousarray(stop, np.int32),
                     cards=cards, starts=starts)


@dataclass
class BinIndex:
    """Grouping of sub-events by signature.

    ``bin_of[i]`` is the bin of sub-event *i*; bins are numbered in
    ascending (truncated time, location) order.  ``members`` holds each
    bin's distinct cards (sorted) back to back, sliced by ``member_ptr``.
    """

    granularity: TimeGranularity
    include_location: bool
    n_bins: int
    bin_of: np.ndarray        # int64 per sub-event
    bin_time: np.ndarray      # int64 per bin
    bin_mode: Optional[np.ndarray]   # int16 per bin, None without location
    bin_stop: Optional[np.ndarray]   # int32 per bin, None without location
    event_counts: np.ndarray  # int64 per bin
    members: np.ndarray       # int64, concatenated distinct members
    member_ptr: np.ndarray    # int64, len = n_bins + 1
    _time_vals: np.ndarray
    _loc_vals: Optional[np.ndarray]

    def members_of(self, b: int) -> np.ndarray:
        return self.members[self.member_ptr[b]:self.member_ptr[b + 1]]

    def distinct_counts(self) -> np.ndarray:
        return np.diff(self.member_ptr)

    def find(self, time_s: int, mode: Optional[int], stop: Optional[int]) -> Optional[int]:
        """Bin index for an exact signature key, or None."""
        i_t = int(np.searchsorted(self._time_vals, time_s))
        if i_t >= len(self._time_vals) or self._time_vals[i_t] != time_s:
            return None
        if self._loc_vals is None:
            return i_t
        key = (int(mode) << 32) | int(stop)
        i_l = int(np.searchsorted(self._loc_vals, key))
        if i_l >= len(self._loc_vals) or self._loc_vals[i_l] != key:
            return None
        comb = i_t * len(self._loc_vals) + i_l
        i_b = int(np.searchsorted(self._comb_vals, comb))
        if i_b >= self.n_bins or self._comb_vals[i_b] != comb:
            return None
        return i_b

    _comb_vals: Optional[np.ndarray] = None


def bin_subevents(sub: SubEvents, g: TimeGranularity, include_location: bool,
                  trunc: Optional[np.ndarray] = None) -> BinIndex:
    """Group sub-events into signature bins (a pre-truncated time column
    may be passed in when sweeping location flags)."""
    if trunc is None:
        trunc = truncate_seconds(sub.time, g)
    n = len(sub)
    if n == 0:
        e = np.empty(0, np.int64)
        return BinIndex(g, include_location, 0, e, e,
                        np.empty(0, np.int16) if include_location else None,
                        np.empty(0, np.int32) if include_location else None,
                        e, e, np.zeros(1, np.int64), e,
                        np.empty(0, np.int64) if include_location else None,
                        _comb_vals=e if include_location else None)

    t_vals, t_inv = np.unique(trunc, return_inverse=True)
    if include_location:
        l_keys = (sub.mode.astype(np.int64) << 32) | sub.stop.astype(np.int64)
        l_vals, l_inv = np.unique(l_keys, return_inverse=True)
        comb = t_inv.astype(np.int64) * len(l_vals) + l_inv
        comb_vals, bin_of = np.unique(comb, return_inverse=True)
        bin_time = t_vals[comb_vals // len(l_vals)]
        bin_loc = l_vals[comb_vals % len(l_vals)]
        bin_mode = (bin_loc >> 32).astype(np.int16)
        bin_stop = (bin_loc & 0xFFFFFFFF).astype(np.int32)
        loc_vals = l_vals
    else:
        comb_vals = None
        bin_of = t_inv.astype(np.int64)
        bin_time = t_vals
        bin_mode = bin_stop = None
        loc_vals = None
    n_bins = len(bin_time)

    order = np.lexsort((sub.card, bin_of))
    sb = bin_of[order]
    sc = sub.card[order]
    new_member = np.empty(n, bool)
    new_member[0] = True
    np.logical_or(sb[1:] != sb[:-1], sc[1:] != sc[:-1], out=new_member[1:])
    members = sc[new_member]
    member_counts = np.bincount(sb[new_member], minlength=n_bins)
    member_ptr = np.concatenate([[0], np.cumsum(member_counts)]).astype(np.int64)
    event_counts = np.bincount(bin_of, minlength=n_bins).astype(np.int64)

    return BinIndex(g, include_location, n_bins, bin_of, bin_time,
                    bin_mode, bin_stop, event_counts, members, member_ptr,
                    t_vals, loc_vals, _comb_vals=comb_vals)


@dataclass(frozen=True)
class Bin:
    """One calendar bin: its signature, distinct member cards, and how many
    sub-events landed in it (a card may hit the same bin more than once)."""

    signature: EventSignature
    members: frozenset
    event_count: int


class SignatureCalendar:
    """Map from event signature to the cards having a matching sub-event."""

    def __init__(self, granularity: TimeGranularity, include_location: bool,
                 kind: EventKind, sub: SubEvents, index: BinIndex,
                 period: Optional[Period] = None):
        self.granularity = granularity
        self.include_location = include_location
        self.kind = kind
        self.period = period
        self.sub = sub
        self.index = index
        self._bin_cache: Dict[int, Bin] = {}

    @property
    def bin_count(self) -> int:
        return self.index.n_bins

    @property
    def signature_count(self) -> int:
        """Total sub-events binned; equals the sum of bin event counts."""
        return len(self.sub)

    def _signature_of(self, b: int) -> EventSignature:
        t = from_epoch_seconds(int(self.index.bin_time[b]))
        if self.include_location:
            loc = location_key(int(self.index.bin_mode[b]), int(self.index.bin_stop[b]))
        else:
            loc = None
        return EventSignature(t, loc)

    def _bin_at(self, b: int) -> Bin:
        got = self._bin_cache.get(b)
        if got is None:
            got = Bin(
                signature=self._signature_of(b),
                members=frozenset(int(c) for c in self.index.members_of(b)),
                event_count=int(self.index.event_counts[b]),
            )
            self._bin_cache[b] = got
        return got

    def _find(self, signature: EventSignature) -> Optional[int]:
        if (signature.location_key is not None) != self.include_location:
            return None
        mode = stop = None
        if self.include_location:
            try:
                mode_s, stop_s = signature.location_key.split(":")
                mode, stop = int(mode_s), int(stop_s)
            except ValueError:
                return None
        return self.index.find(to_epoch_seconds(signature.truncated_time), mode, stop)

    def bin(self, signature: EventSignature) -> Optional[Bin]:
        b = self._find(signature)
        return None if b is None else self._bin_at(b)

    def bin_members(self, signature: EventSignature) -> frozenset:
        """Members of the signature's bin; empty when absent.  The key is
        looked up verbatim: no granularity normalisation is performed."""
        b = self._find(signature)
        if b is None:
            return frozenset()
        return self._bin_at(b).members

    def card_bins(self, card_id: int) -> List[Bin]:
        """Bin references for a card's sub-events, in per-card event order.

        A card hitting the same bin twice yields a repeated reference.
        """
        sl = self.sub.card_slice(card_id)
        if sl is None:
            raise UnknownCard(f"card {card_id} has no events in this calendar")
        return [self._bin_at(int(b)) for b in self.index.bin_of[sl[0]:sl[1]]]

    def iter_bins(self):
        for b in range(self.index.n_bins):
            yield self._bin_at(b)


def build_calendar(store: EventStore, g: TimeGranularity, include_location: bool,
                   kind: EventKind, period: Optional[Period] = None) -> SignatureCalendar:
    """Populate a calendar with every selected sub-event of the store."""
    sub = select_subevents(store, kind, period)
    index = bin_subevents(sub, g, include_location)
    return SignatureCalendar(g, include_location, kind, sub, index, period)


# -- snapshots ----------------------------------------------------------


def save_calendar(cal: SignatureCalendar, path: Union[str, Path]) -> None:
    """Persist a calendar so repeated analyses skip the rebuild."""
    meta = {
        "magic": SNAPSHOT_MAGIC,
        "version": SNAPSHOT_VERSION,
        "granularity": cal.granularity.value,
        "includeLocation": cal.include_location,
        "kind": cal.kind.value,
        "period": ([cal.period.start.isoformat(), cal.period.end.isoformat()]
                   if cal.period else None),
    }
    arrays = dict(
        meta=np.array([json.dumps(meta)]),
        sub_card=cal.sub.card, sub_time=cal.sub.time,
        sub_mode=cal.sub.mode, sub_stop=cal.sub.stop,
        bin_of=cal.index.bin_of, bin_time=cal.index.bin_time,
        event_counts=cal.index.event_counts,
        members=cal.index.members, member_ptr=cal.index.member_ptr,
        time_vals=cal.index._time_vals,
    )
    if cal.include_location:
        arrays.update(bin_mode=cal.index.bin_mode, bin_stop=cal.index.bin_stop,
                      loc_vals=cal.index._loc_vals, comb_vals=cal.index._comb_vals)
    np.savez_compressed(path, **arrays)


def load_calendar(path: Union[str, Path]) -> SignatureCalendar:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"][0]))
        if meta.get("magic") != SNAPSHOT_MAGIC:
            raise ValueError(f"{path} is not a calendar snapshot")
        if meta.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {meta.get('version')}")
        g = TimeGranularity.from_string(meta["granularity"])
        kind = EventKind.from_string(meta["kind"])
        include_location = bool(meta["includeLocation"])
        period = None
        if meta.get("period"):
            from datetime import date
            period = Period(date.fromisoformat(meta["period"][0]),
                            date.fromisoformat(meta["period"][1]))
        card = data["sub_card"]
        cards, starts = np.unique(card, return_index=True)
        sub = SubEvents(card=card, time=data["sub_time"], mode=data["sub_mode"],
                        stop=data["sub_stop"], cards=cards,
                        starts=np.append(starts, len(card)))
        index = BinIndex(
            granularity=g, include_location=include_location,
            n_bins=len(data["bin_time"]), bin_of=data["bin_of"],
            bin_time=data["bin_time"],
            bin_mode=data["bin_mode"] if include_location else None,
            bin_stop=data["bin_stop"] if include_location else None,
            event_counts=data["event_counts"], members=data["members"],
            member_ptr=data["member_ptr"], _time_vals=data["time_vals"],
            _loc_vals=data["loc_vals"] if include_location else None,
            _comb_vals=data["comb_vals"] if include_location else None,
        )
    return SignatureCalendar(g, include_location, kind, sub, index, period)
