"""Co-traveller detection: cards touching on at the same stop within a
few seconds of the subject card.

Candidate events are found by sweeping a sorted (stop, time) view of all
touch-ons, then each (subject, other-card) pair is resolved to a
one-to-one matching, greedily by closest time difference.  The matching
key is symmetric in the two cards, so B's occurrences with A always equal
A's occurrences with B.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime
from typing import Dict, IO, List, Optional, Tuple

import numpy as np

from .core import Period, UnknownCard, from_epoch_seconds
from .ingest import EventStore

DEFAULT_WINDOW_SECONDS = 5


@dataclass(frozen=True)
class CoTravelPair:
    own_time: datetime
    other_time: datetime
    stop_id: int


@dataclass(frozen=True)
class CoTravelMatch:
    """Another card observed boarding with the subject, with every matched
    touch-on pair (|Δt| <= window, same stop, each event used once)."""

    other_card_id: int
    other_card_type: int
    occurrences: int
    event_pairs: Tuple[CoTravelPair, ...]


def _sorted_touch_ons(store: EventStore):
    """(stops, times, cards, rows) of all touch-ons sorted by (stop, time)."""
    cache = store._cache
    if "cotravel_sorted" not in cache:
        order = np.lexsort((store.on_times, store.on_stops))
        cache["cotravel_sorted"] = (
            store.on_stops[order], store.on_times[order],
            store.card_ids[order], order,
        )
    return cache["cotravel_sorted"]


def cotravellers(store: EventStore, card_id: int,
                 window_seconds: int = DEFAULT_WINDOW_SECONDS,
                 period: Optional[Period] = None) -> List[CoTravelMatch]:
    """All cards with at least one matching touch-on pair, sorted by
    occurrences descending (ties by card id).

    ``period`` restricts the subject's touch-ons; a matching event may
    overhang a period boundary by at most the window.  The window is
    inclusive: a difference of exactly ``window_seconds`` matches.
    """
    if window_seconds < 0:
        raise ValueError("windowSeconds must be >= 0")
    rng = store.card_range(card_id)
    if rng is None:
        raise UnknownCard(f"card {card_id} not in store")
    lo, hi = rng
    own_rows = np.arange(lo, hi)
    own_times = store.on_times[lo:hi]
    own_stops = store.on_stops[lo:hi]
    if period is not None:
        m = (own_times >= period.start_second) & (own_times <= period.end_second)
        own_rows, own_times, own_stops = own_rows[m], own_times[m], own_stops[m]

    s_stops, s_times, s_cards, s_rows = _sorted_touch_ons(store)
    w = window_seconds

    # candidate pairs per other card
    by_card: Dict[int, List[Tuple]] = {}
    for own_row, t, stop in zip(own_rows.tolist(), own_times.tolist(), own_stops.tolist()):
        seg_lo = int(np.searchsorted(s_stops, stop, "left"))
        seg_hi = int(np.searchsorted(s_stops, stop, "right"))
        t0 = seg_lo + int(np.searchsorted(s_times[seg_lo:seg_hi], t - w, "left"))
        t1 = seg_lo + int(np.searchsorted(s_times[seg_lo:seg_hi], t + w, "right"))
        for k in range(t0, t1):
            other = int(s_cards[k])
            if other == card_id:
                continue
            ot = int(s_times[k])
            other_row = int(s_rows[k])
            key = (abs(ot - t), min(t, ot), max(t, ot), stop,
                   min(own_row, other_row), max(own_row, other_row))
            by_card.setdefault(other, []).append((key, own_row, other_row, t, ot, stop))

    matches: List[CoTravelMatch] = []
    for other, cands in by_card.items():
        cands.sort(key=lambda c: c[0])
        used_own: set = set()
        used_other: set = set()
        pairs: List[CoTravelPair] = []
        for _, own_row, other_row, t, ot, stop in cands:
            if own_row in used_own or other_row in used_other:
                continue
            used_own.add(own_row)
            used_other.add(other_row)
            pairs.append(CoTravelPair(from_epoch_seconds(t), from_epoch_seconds(ot), stop))
        pairs.sort(key=lambda p: (p.own_time, p.other_time, p.stop_id))
        matches.append(CoTravelMatch(
            other_card_id=other,
            other_card_type=store.modal_type(other),
            occurrences=len(pairs),
            event_pairs=tuple(pairs),
        ))
    matches.sort(key=lambda m: (-m.occurrences, m.other_card_id))
    return matches


def cotravel_on_date(store: EventStore, card_id: int, day: date,
                     window_seconds: int = DEFAULT_WINDOW_SECONDS) -> List[CoTravelMatch]:
    """Co-travellers over the subject's touch-ons on a single date; the
    reported card types let an analyst exclude whole type groups."""
    return cotravellers(store, card_id, window_seconds, Period(day, day))


def cotravel_to_csv(matches: List[CoTravelMatch], sink: IO) -> None:
    sink.write("otherCardId,otherCardType,occurrences\n")
    for m in matches:
        sink.write(f"{m.other_card_id},{m.other_card_type},{m.occurrences}\n")
