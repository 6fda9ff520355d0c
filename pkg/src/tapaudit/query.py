"""Constraint-refinement re-identification queries and dataset audits.

Constraints are conjunctive: an analyst keeps adding known events (a
morning trip window, a visited stop, a card type) and watches the
candidate set shrink.  Audits cover the card-id allocation gaps and the
per-type census with its small-population sensitivity flags.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time
from typing import Dict, IO, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    SECONDS_PER_DAY,
    Period,
    TapDataError,
    TapEvent,
    UnknownCard,
    from_epoch_seconds,
    to_epoch_seconds,
)
from .ingest import EventStore


class StoreMismatch(TapDataError):
    """A candidate set was refined against a different store."""


# -- constraint variants -------------------------------------------------


@dataclass(frozen=True)
class TouchOnBetween:
    """A touch-on on `day` with time of day in [lo, hi], bounds inclusive."""

    day: date
    lo: time
    hi: time

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("time window bounds out of order")


@dataclass(frozen=True)
class TouchOnAt:
    """A touch-on within `tolerance_seconds` of an exact timestamp."""

    at: datetime
    tolerance_seconds: int = 0

    def __post_init__(self):
        if self.tolerance_seconds < 0:
            raise ValueError("tolerance must be >= 0")


@dataclass(frozen=True)
class VisitedStop:
    """Touched on or off at a stop, optionally within a date range."""

    stop_id: int
    period: Optional[Period] = None


@dataclass(frozen=True)
class CardTypeIs:
    """The card's modal per-event type equals this code."""

    type_code: int


@dataclass(frozen=True)
class CardTypeIsNot:
    """The card's modal type differs from this code (the one-click
    "exclude this type" refinement used after a co-travel match)."""

    type_code: int


@dataclass(frozen=True)
class FirstSeenBefore:
    day: date


@dataclass(frozen=True)
class FirstSeenAfter:
    day: date


@dataclass(frozen=True)
class LastSeenBefore:
    day: date


@dataclass(frozen=True)
class LastSeenAfter:
    day: date


@dataclass(frozen=True)
class MinEventCount:
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")


Constraint = Union[TouchOnBetween, TouchOnAt, VisitedStop, CardTypeIs,
                   CardTypeIsNot, FirstSeenBefore, FirstSeenAfter,
                   LastSeenBefore, LastSeenAfter, MinEventCount]


@dataclass(frozen=True)
class CandidateSet:
    """Cards satisfying a conjunction of constraints (a value snapshot)."""

    card_ids: frozenset
    constraints: Tuple[Constraint, ...]
    store_fingerprint: int

    def __len__(self) -> int:
        return len(self.card_ids)


def _day_bounds(day: date) -> Tuple[int, int]:
    s = to_epoch_seconds(datetime.combine(day, datetime.min.time()))
    return s, s + SECONDS_PER_DAY - 1


def _cards_matching(store: EventStore, c: Constraint) -> np.ndarray:
    """Distinct card ids satisfying one constraint (vectorised)."""
    if isinstance(c, TouchOnBetween):
        day_s, _ = _day_bounds(c.day)
        lo = day_s + c.lo.hour * 3600 + c.lo.minute * 60 + c.lo.second
        hi = day_s + c.hi.hour * 3600 + c.hi.minute * 60 + c.hi.second
        m = (store.on_times >= lo) & (store.on_times <= hi)
        return np.unique(store.card_ids[m])
    if isinstance(c, TouchOnAt):
        at = to_epoch_seconds(c.at)
        m = np.abs(store.on_times - at) <= c.tolerance_seconds
        return np.unique(store.card_ids[m])
    if isinstance(c, VisitedStop):
        m_on = store.on_stops == c.stop_id
        m_off = store.has_off & (store.off_stops == c.stop_id)
        if c.period is not None:
            lo, hi = c.period.start_second, c.period.end_second
            m_on &= (store.on_times >= lo) & (store.on_times <= hi)
            m_off &= (store.off_times >= lo) & (store.off_times <= hi)
        return np.unique(store.card_ids[m_on | m_off])
    if isinstance(c, CardTypeIs):
        return store.cards()[store.card_modal_types() == c.type_code]
    if isinstance(c, CardTypeIsNot):
        return store.cards()[store.card_modal_types() != c.type_code]
    if isinstance(c, FirstSeenBefore):
        day_s, _ = _day_bounds(c.day)
        return store.cards()[store.card_first_seen() < day_s]
    if isinstance(c, FirstSeenAfter):
        _, day_e = _day_bounds(c.day)
        return store.cards()[store.card_first_seen() > day_e]
    if isinstance(c, LastSeenBefore):
        day_s, _ = _day_bounds(c.day)
        return store.cards()[store.card_last_seen() < day_s]
    if isinstance(c, LastSeenAfter):
        _, day_e = _day_bounds(c.day)
        return store.cards()[store.card_last_seen() > day_e]
    if isinstance(c, MinEventCount):
        return store.cards()[store.card_event_counts() >= c.k]
    raise TypeError(f"unknown constraint {c!r}")


def evaluate(store: EventStore, constraints: Sequence[Constraint]) -> CandidateSet:
    """Cards satisfying every constraint; no constraints means all cards."""
    current: Optional[np.ndarray] = None
    for c in constraints:
        matched = _cards_matching(store, c)
        if current is None:
            current = matched
        else:
            current = current[np.isin(current, matched, assume_unique=True)]
        if len(current) == 0:
            break
    if current is None:
        current = store.cards()
    return CandidateSet(
        card_ids=frozenset(int(x) for x in current),
        constraints=tuple(constraints),
        store_fingerprint=store.fingerprint,
    )


def refine(candidates: CandidateSet, extra: Constraint, store: EventStore) -> CandidateSet:
    """Add one constraint; the result is always a subset of the input."""
    if candidates.store_fingerprint != store.fingerprint:
        raise StoreMismatch("candidate set was built from a different store")
    return evaluate(store, candidates.constraints + (extra,))


# -- card timeline -------------------------------------------------------


@dataclass(frozen=True)
class CardTimeline:
    card_id: int
    events: Tuple[TapEvent, ...]
    first_seen: datetime
    last_seen: datetime


def card_timeline(store: EventStore, card_id: int) -> CardTimeline:
    """All of a card's events ascending by onTime, with its first and last
    appearance (lastSeen considers touch-offs too)."""
    rng = store.card_range(card_id)
    if rng is None:
        raise UnknownCard(f"card {card_id} not in store")
    events = store.events_for(card_id)
    pos = int(np.searchsorted(store.cards(), card_id))
    return CardTimeline(
        card_id=card_id,
        events=events,
        first_seen=from_epoch_seconds(int(store.card_first_seen()[pos])),
        last_seen=from_epoch_seconds(int(store.card_last_seen()[pos])),
    )


# -- audits ---------------------------------------------------------------


@dataclass(frozen=True)
class GapRecord:
    """A maximal run of unused card ids between two used ones."""

    last_used_id: int
    next_used_id: int
    missing_count: int


def id_gap_scan(store: EventStore, min_gap: int = 1) -> List[GapRecord]:
    """Maximal unused-id runs of length >= min_gap between the smallest and
    largest used card id, ascending.  missingCount = next - last - 1."""
    if min_gap < 1:
        raise ValueError("minGap must be >= 1")
    used = store.cards()
    if len(used) < 2:
        return []
    diffs = np.diff(used)
    where = np.nonzero(diffs >= min_gap + 1)[0]
    return [GapRecord(int(used[i]), int(used[i + 1]), int(diffs[i]) - 1)
            for i in where]


def gaps_to_csv(gaps: List[GapRecord], sink: IO) -> None:
    sink.write("lastUsedId,nextUsedId,missingCount\n")
    for g in gaps:
        sink.write(f"{g.last_used_id},{g.next_used_id},{g.missing_count}\n")


@dataclass(frozen=True)
class TypeCensusEntry:
    type_code: int
    card_count: int
    event_count: int
    sensitive: bool


DEFAULT_SENSITIVITY_THRESHOLD = 1000


def card_type_census(store: EventStore,
                     sensitivity_threshold: int = DEFAULT_SENSITIVITY_THRESHOLD,
                     ) -> Dict[int, TypeCensusEntry]:
    """Per type code: distinct cards whose modal type is the code, events
    recorded with the code, and a flag for populations small enough to be
    identifying (cardCount below the threshold)."""
    event_counts = np.bincount(store.card_types, minlength=128)
    card_counts = np.bincount(store.card_modal_types(), minlength=128) \
        if store.card_count else np.zeros(128, dtype=np.int64)
    out: Dict[int, TypeCensusEntry] = {}
    for code in range(128):
        cc, ec = int(card_counts[code]), int(event_counts[code])
        if cc == 0 and ec == 0:
            continue
        out[code] = TypeCensusEntry(
            type_code=code, card_count=cc, event_count=ec,
            sensitive=cc < sensitivity_threshold,
        )
    return out


def census_to_csv(census: Dict[int, TypeCensusEntry], sink: IO) -> None:
    sink.write("cardType,cardCount,eventCount,sensitive\n")
    for code in sorted(census):
        e = census[code]
        sink.write(f"{e.type_code},{e.card_count},{e.event_count},"
                   f"{'true' if e.sensitive else 'false'}\n")


# -- JSON constraint grammar ----------------------------------------------

_KINDS = {
    "touchOnBetween": TouchOnBetween,
    "touchOnAt": TouchOnAt,
    "visitedStop": VisitedStop,
    "cardTypeIs": CardTypeIs,
    "cardTypeIsNot": CardTypeIsNot,
    "firstSeenBefore": FirstSeenBefore,
    "firstSeenAfter": FirstSeenAfter,
    "lastSeenBefore": LastSeenBefore,
    "lastSeenAfter": LastSeenAfter,
    "minEventCount": MinEventCount,
}


def constraint_from_json(data: dict) -> Constraint:
    """Parse the wire form, e.g. ``{"kind": "touchOnBetween",
    "date": "2018-05-04", "lo": "05:00:00", "hi": "07:00:00"}``."""
    if not isinstance(data, dict) or "kind" not in data:
        raise ValueError("constraint must be an object with a 'kind'")
    kind = data["kind"]
    if kind not in _KINDS:
        raise ValueError(f"unknown constraint kind {kind!r}")
    try:
        if kind == "touchOnBetween":
            return TouchOnBetween(date.fromisoformat(data["date"]),
                                  time.fromisoformat(data["lo"]),
                                  time.fromisoformat(data["hi"]))
        if kind == "touchOnAt":
            return TouchOnAt(datetime.fromisoformat(data["at"]),
                             int(data.get("toleranceSeconds", 0)))
        if kind == "visitedStop":
            period = None
            if "from" in data or "to" in data:
                period = Period(date.fromisoformat(data["from"]),
                                date.fromisoformat(data["to"]))
            return VisitedStop(int(data["stopId"]), period)
        if kind == "cardTypeIs":
            return CardTypeIs(int(data["type"]))
        if kind == "cardTypeIsNot":
            return CardTypeIsNot(int(data["type"]))
        if kind == "minEventCount":
            return MinEventCount(int(data["k"]))
        cls = _KINDS[kind]
        return cls(date.fromisoformat(data["date"]))
    except KeyError as exc:
        raise ValueError(f"constraint {kind!r} missing field {exc}") from exc


def constraint_to_json(c: Constraint) -> dict:
    if isinstance(c, TouchOnBetween):
        return {"kind": "touchOnBetween", "date": c.day.isoformat(),
                "lo": c.lo.isoformat(), "hi": c.hi.isoformat()}
    if isinstance(c, TouchOnAt):
        return {"kind": "touchOnAt", "at": c.at.isoformat(),
                "toleranceSeconds": c.tolerance_seconds}
    if isinstance(c, VisitedStop):
        out = {"kind": "visitedStop", "stopId": c.stop_id}
        if c.period is not None:
            out["from"] = c.period.start.isoformat()
            out["to"] = c.period.end.isoformat()
        return out
    if isinstance(c, CardTypeIs):
        return {"kind": "cardTypeIs", "type": c.type_code}
    if isinstance(c, CardTypeIsNot):
        return {"kind": "cardTypeIsNot", "type": c.type_code}
    if isinstance(c, MinEventCount):
        return {"kind": "minEventCount", "k": c.k}
    for kind, cls in _KINDS.items():
        if type(c) is cls:
            return {"kind": kind, "date": c.day.isoformat()}
    raise TypeError(f"unknown constraint {c!r}")
