"""CSV ingestion, the columnar event store, and synthetic populations.

The store keeps events in numpy columns sorted by (cardId, onTime) so the
heavy analyses (binning, unicity, co-travel sweeps, aggregation) run
vectorised over tens of millions of events; :class:`~tapaudit.core.TapEvent`
objects are materialised on demand for per-card inspection and for the
small-scale oracle paths.
"""

from __future__ import annotations

import calendar as _calendar
import csv
import io
from dataclasses import dataclass, fields
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import IO, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    SECONDS_PER_DAY,
    TapDataError,
    TapEvent,
    from_epoch_seconds,
    to_epoch_seconds,
)
from .seeding import mix64

CSV_HEADER = (
    "cardId,cardType,onDate,onMode,onRouteId,onStopId,"
    "offDate,offMode,offRouteId,offStopId"
)
_REQUIRED_COLUMNS = tuple(CSV_HEADER.split(","))

# Transport mode codes used by the synthetic generator (trains are mode 2,
# matching the released records; tram and bus codes are synthetic).
MODE_TRAM = 1
MODE_TRAIN = 2
MODE_BUS = 3

# Card type codes.  46/48/50/51/65 carry the meanings documented in the
# released data; the child concession code is synthetic because the release
# notes never state one.
TYPE_FULL_FARE = 0
TYPE_CHILD_CONCESSION = 3
TYPE_FEDERAL_POLICE = 46
TYPE_TRANSIT_POLICE = 48
TYPE_FEDERAL_PARLIAMENTARIAN = 50
TYPE_STATE_PARLIAMENTARIAN = 51
TYPE_COMMUTER_CLUB = 65


class UnreadableSource(TapDataError):
    """The input could not be read or its header is unusable."""


class UnwritableSink(TapDataError):
    """The output destination could not be written."""


class InvalidConfig(TapDataError):
    """A synthetic population configuration violates its invariants."""


@dataclass(frozen=True)
class RecordError:
    """A malformed CSV row: 1-based data row number plus the reason."""

    row: int
    reason: str


class EventStore:
    """Immutable collection of tap events grouped per card.

    Rows are held as numpy columns sorted by (cardId, onTime); per-card
    event lists are contiguous slices.  Instances are safe to share
    across threads once built.
    """

    def __init__(
        self,
        card_ids: np.ndarray,
        card_types: np.ndarray,
        on_times: np.ndarray,
        on_modes: np.ndarray,
        on_routes: np.ndarray,
        on_stops: np.ndarray,
        has_off: np.ndarray,
        off_times: np.ndarray,
        off_modes: np.ndarray,
        off_routes: np.ndarray,
        off_stops: np.ndarray,
    ):
        n = len(card_ids)
        cols = [card_types, on_times, on_modes, on_routes, on_stops,
                has_off, off_times, off_modes, off_routes, off_stops]
        if any(len(c) != n for c in cols):
            raise ValueError("column lengths differ")
        order = np.lexsort((on_times, card_ids))
        card_ids = card_ids[order]
        card_types, on_times, on_modes, on_routes, on_stops, \
            has_off, off_times, off_modes, off_routes, off_stops = (
                c[order] for c in cols)
        # Normalise the masked-off side so equality is structural.
        off_times = np.where(has_off, off_times, 0)
        off_modes = np.where(has_off, off_modes, 0).astype(np.int16)
        off_routes = np.where(has_off, off_routes, 0).astype(np.int32)
        off_stops = np.where(has_off, off_stops, 0).astype(np.int32)

        self.card_ids = np.ascontiguousarray(card_ids, dtype=np.int64)
        self.card_types = np.ascontiguousarray(card_types, dtype=np.int16)
        self.on_times = np.ascontiguousarray(on_times, dtype=np.int64)
        self.on_modes = np.ascontiguousarray(on_modes, dtype=np.int16)
        self.on_routes = np.ascontiguousarray(on_routes, dtype=np.int32)
        self.on_stops = np.ascontiguousarray(on_stops, dtype=np.int32)
        self.has_off = np.ascontiguousarray(has_off, dtype=bool)
        self.off_times = np.ascontiguousarray(off_times, dtype=np.int64)
        self.off_modes = off_modes
        self.off_routes = off_routes
        self.off_stops = off_stops

        uniq, starts = np.unique(self.card_ids, return_index=True)
        self._cards = uniq
        self._starts = np.append(starts, n)
        self._cache: dict = {}

    # -- basic shape -------------------------------------------------

    @property
    def event_count(self) -> int:
        return len(self.card_ids)

    @property
    def card_count(self) -> int:
        return len(self._cards)

    def __len__(self) -> int:
        return self.event_count

    def cards(self) -> np.ndarray:
        """Distinct card ids, ascending."""
        return self._cards

    def __contains__(self, card_id: int) -> bool:
        return self.card_range(card_id) is not None

    def card_range(self, card_id: int) -> Optional[Tuple[int, int]]:
        """Row slice [start, stop) for a card, or None if absent."""
        i = int(np.searchsorted(self._cards, card_id))
        if i >= len(self._cards) or self._cards[i] != card_id:
            return None
        return int(self._starts[i]), int(self._starts[i + 1])

    @property
    def first_time(self) -> Optional[datetime]:
        if self.event_count == 0:
            return None
        return from_epoch_seconds(int(self.on_times.min()))

    @property
    def last_time(self) -> Optional[datetime]:
        if self.event_count == 0:
            return None
        last = int(self.on_times.max())
        if self.has_off.any():
            last = max(last, int(self.off_times[self.has_off].max()))
        return from_epoch_seconds(last)

    # -- per-card derived columns (built lazily, cached) --------------

    def card_first_seen(self) -> np.ndarray:
        """First onTime (epoch s) per card, aligned with :meth:`cards`."""
        if "first_seen" not in self._cache:
            self._cache["first_seen"] = self.on_times[self._starts[:-1]]
        return self._cache["first_seen"]

    def card_last_seen(self) -> np.ndarray:
        """max(last onTime, last offTime) per card, aligned with :meth:`cards`."""
        if "last_seen" not in self._cache:
            eff = np.where(self.has_off, self.off_times, self.on_times)
            self._cache["last_seen"] = np.maximum.reduceat(eff, self._starts[:-1]) \
                if self.event_count else np.empty(0, dtype=np.int64)
        return self._cache["last_seen"]

    def card_event_counts(self) -> np.ndarray:
        if "counts" not in self._cache:
            self._cache["counts"] = np.diff(self._starts)
        return self._cache["counts"]

    def card_modal_types(self) -> np.ndarray:
        """Modal per-event card type per card; ties resolve to the lowest code."""
        if "modal" not in self._cache:
            if self.event_count == 0:
                self._cache["modal"] = np.empty(0, dtype=np.int16)
            else:
                pos = np.searchsorted(self._cards, self.card_ids)
                idx = pos.astype(np.int64) * 128 + self.card_types
                counts = np.bincount(idx, minlength=self.card_count * 128)
                counts = counts.reshape(self.card_count, 128)
                self._cache["modal"] = counts.argmax(axis=1).astype(np.int16)
        return self._cache["modal"]

    def modal_type(self, card_id: int) -> int:
        rng = self.card_range(card_id)
        if rng is None:
            raise KeyError(card_id)
        i = int(np.searchsorted(self._cards, card_id))
        return int(self.card_modal_types()[i])

    # -- object views --------------------------------------------------

    def event_at(self, row: int) -> TapEvent:
        if self.has_off[row]:
            off = dict(
                off_time=from_epoch_seconds(int(self.off_times[row])),
                off_mode=int(self.off_modes[row]),
                off_route_id=int(self.off_routes[row]),
                off_stop_id=int(self.off_stops[row]),
            )
        else:
            off = {}
        return TapEvent(
            card_id=int(self.card_ids[row]),
            card_type=int(self.card_types[row]),
            on_time=from_epoch_seconds(int(self.on_times[row])),
            on_mode=int(self.on_modes[row]),
            on_route_id=int(self.on_routes[row]),
            on_stop_id=int(self.on_stops[row]),
            **off,
        )

    def events_for(self, card_id: int) -> Tuple[TapEvent, ...]:
        rng = self.card_range(card_id)
        if rng is None:
            raise KeyError(card_id)
        return tuple(self.event_at(r) for r in range(rng[0], rng[1]))

    def iter_events(self) -> Iterator[TapEvent]:
        for row in range(self.event_count):
            yield self.event_at(row)

    # -- identity ------------------------------------------------------

    @property
    def fingerprint(self) -> int:
        """Cheap content digest; equal stores share it."""
        if "fingerprint" not in self._cache:
            parts = [self.event_count, self.card_count]
            if self.event_count:
                parts += [
                    int(self.card_ids[0]), int(self.card_ids[-1]),
                    int(self.on_times.min()), int(self.on_times.max()),
                    int(self.on_stops.sum() & 0xFFFFFFFF),
                    int(self.on_times.sum() & 0xFFFFFFFFFFFF),
                ]
            self._cache["fingerprint"] = mix64(*parts)
        return self._cache["fingerprint"]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStore):
            return NotImplemented
        mine = (self.card_ids, self.card_types, self.on_times, self.on_modes,
                self.on_routes, self.on_stops, self.has_off, self.off_times,
                self.off_modes, self.off_routes, self.off_stops)
        theirs = (other.card_ids, other.card_types, other.on_times, other.on_modes,
                  other.on_routes, other.on_stops, other.has_off, other.off_times,
                  other.off_modes, other.off_routes, other.off_stops)
        return all(np.array_equal(a, b) for a, b in zip(mine, theirs))

    def __repr__(self) -> str:
        return f"EventStore(cards={self.card_count}, events={self.event_count})"


def _empty_columns() -> dict:
    return dict(
        card_ids=np.empty(0, np.int64), card_types=np.empty(0, np.int16),
        on_times=np.empty(0, np.int64), on_modes=np.empty(0, np.int16),
        on_routes=np.empty(0, np.int32), on_stops=np.empty(0, np.int32),
        has_off=np.empty(0, bool), off_times=np.empty(0, np.int64),
        off_modes=np.empty(0, np.int16), off_routes=np.empty(0, np.int32),
        off_stops=np.empty(0, np.int32),
    )


def build_store(events: Iterable[TapEvent]) -> EventStore:
    """Group a stream of events by card, each card sorted by onTime."""
    card_ids: List[int] = []
    card_types: List[int] = []
    on_times: List[int] = []
    on_modes: List[int] = []
    on_routes: List[int] = []
    on_stops: List[int] = []
    has_off: List[bool] = []
    off_times: List[int] = []
    off_modes: List[int] = []
    off_routes: List[int] = []
    off_stops: List[int] = []
    for ev in events:
        card_ids.append(ev.card_id)
        card_types.append(ev.card_type)
        on_times.append(to_epoch_seconds(ev.on_time))
        on_modes.append(ev.on_mode)
        on_routes.append(ev.on_route_id)
        on_stops.append(ev.on_stop_id)
        if ev.has_off:
            has_off.append(True)
            off_times.append(to_epoch_seconds(ev.off_time))
            off_modes.append(ev.off_mode)
            off_routes.append(ev.off_route_id)
            off_stops.append(ev.off_stop_id)
        else:
            has_off.append(False)
            off_times.append(0)
            off_modes.append(0)
            off_routes.append(0)
            off_stops.append(0)
    if not card_ids:
        return EventStore(**_empty_columns())
    return EventStore(
        card_ids=np.asarray(card_ids, np.int64),
        card_types=np.asarray(card_types, np.int16),
        on_times=np.asarray(on_times, np.int64),
        on_modes=np.asarray(on_modes, np.int16),
        on_routes=np.asarray(on_routes, np.int32),
        on_stops=np.asarray(on_stops, np.int32),
        has_off=np.asarray(has_off, bool),
        off_times=np.asarray(off_times, np.int64),
        off_modes=np.asarray(off_modes, np.int16),
        off_routes=np.asarray(off_routes, np.int32),
        off_stops=np.asarray(off_stops, np.int32),
    )


# -- CSV parsing ------------------------------------------------------


def _open_text(source: Union[str, Path, IO]) -> Tuple[IO, bool]:
    if isinstance(source, (str, Path)):
        try:
            return open(source, "r", encoding="utf-8", newline=""), True
        except OSError as exc:
            raise UnreadableSource(f"cannot open {source}: {exc}") from exc
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def _parse_timestamp(text: str) -> datetime:
    t = datetime.fromisoformat(text)
    if t.microsecond:
        raise ValueError("sub-second timestamps are not supported")
    return t


def parse_events(source: Union[str, Path, IO]) -> Iterator[Union[TapEvent, RecordError]]:
    """Stream events from a CSV source.

    Yields one :class:`TapEvent` per well-formed row in input order;
    malformed rows yield :class:`RecordError` (1-based data row number)
    and parsing continues.  Columns beyond the required header are
    accepted and ignored.  Raises :class:`UnreadableSource` if the file
    cannot be read or the header lacks a required column.
    """
    fh, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UnreadableSource("empty input: missing header")
        except (OSError, csv.Error) as exc:
            raise UnreadableSource(str(exc)) from exc
        header = [h.strip() for h in header]
        try:
            cols = [header.index(name) for name in _REQUIRED_COLUMNS]
        except ValueError as exc:
            raise UnreadableSource(f"missing required column: {exc}") from exc
        (i_card, i_type, i_on, i_onm, i_onr, i_ons,
         i_off, i_offm, i_offr, i_offs) = cols

        row_no = 0
        while True:
            try:
                row = next(reader)
            except StopIteration:
                return
            except OSError as exc:
                raise UnreadableSource(str(exc)) from exc
            except csv.Error as exc:
                row_no += 1
                yield RecordError(row_no, f"csv error: {exc}")
                continue
            row_no += 1
            if not row or all(not f.strip() for f in row):
                continue
            try:
                off_raw = (row[i_off].strip(), row[i_offm].strip(),
                           row[i_offr].strip(), row[i_offs].strip())
            except IndexError:
                yield RecordError(row_no, "too few fields")
                continue
            try:
                if any(off_raw) and not all(off_raw):
                    raise ValueError("off-side fields must be all present or all absent")
                kwargs = {}
                if all(off_raw):
                    kwargs = dict(
                        off_time=_parse_timestamp(off_raw[0]),
                        off_mode=int(off_raw[1]),
                        off_route_id=int(off_raw[2]),
                        off_stop_id=int(off_raw[3]),
                    )
                yield TapEvent(
                    card_id=int(row[i_card]),
                    card_type=int(row[i_type]),
                    on_time=_parse_timestamp(row[i_on]),
                    on_mode=int(row[i_onm]),
                    on_route_id=int(row[i_onr]),
                    on_stop_id=int(row[i_ons]),
                    **kwargs,
                )
            except ValueError as exc:
                msg = str(exc)
                if "fromisoformat" in msg or "Invalid isoformat" in msg:
                    msg = "unparseable timestamp"
                yield RecordError(row_no, msg)
    finally:
        if owned:
            fh.close()


def load_store(source: Union[str, Path, IO]) -> Tuple[EventStore, List[RecordError]]:
    """Parse and build in one go, collecting malformed-row reports."""
    errors: List[RecordError] = []

    def _events():
        for item in parse_events(source):
            if isinstance(item, RecordError):
                errors.append(item)
            else:
                yield item

    store = build_store(_events())
    return store, errors


def load_directory(path: Union[str, Path]) -> Tuple[EventStore, List[RecordError]]:
    """Concatenate the ``*.csv`` shards of a directory (sorted by name)."""
    shards = sorted(Path(path).glob("*.csv"))
    if not shards:
        raise UnreadableSource(f"no .csv shards under {path}")
    errors: List[RecordError] = []

    def _events():
        for shard in shards:
            for item in parse_events(shard):
                if isinstance(item, RecordError):
                    errors.append(item)
                else:
                    yield item

    store = build_store(_events())
    return store, errors


def write_events(store: EventStore, sink: Union[str, Path, IO]) -> int:
    """Write the store as CSV (rows sorted by cardId, onTime); returns rows written."""
    own = isinstance(sink, (str, Path))
    try:
        fh = open(sink, "w", encoding="utf-8", newline="") if own else sink
    except OSError as exc:
        raise UnwritableSink(f"cannot open {sink}: {exc}") from exc
    try:
        n = store.event_count
        fh.write(CSV_HEADER + "\n")
        if n == 0:
            return 0
        on_str = np.datetime_as_string(store.on_times.astype("datetime64[s]"), unit="s")
        off_str = np.datetime_as_string(store.off_times.astype("datetime64[s]"), unit="s")
        chunk: List[str] = []
        for i in range(n):
            if store.has_off[i]:
                off_part = (f"{off_str[i]},{store.off_modes[i]},"
                            f"{store.off_routes[i]},{store.off_stops[i]}")
            else:
                off_part = ",,,"
            chunk.append(
                f"{store.card_ids[i]},{store.card_types[i]},{on_str[i]},"
                f"{store.on_modes[i]},{store.on_routes[i]},{store.on_stops[i]},"
                f"{off_part}\n")
            if len(chunk) >= 65536:
                fh.write("".join(chunk))
                chunk.clear()
        fh.write("".join(chunk))
        return n
    except OSError as exc:
        raise UnwritableSink(str(exc)) from exc
    finally:
        if own:
            fh.close()


# -- synthetic population ----------------------------------------------


@dataclass(frozen=True)
class SyntheticPopulationConfig:
    """Archetype counts and behaviour knobs for a generated population.

    Every card derives its own RNG from ``mix64(seed, cardId)``, so
    generation is reproducible under any evaluation order.
    """

    seed: int
    start: date
    end: date
    commuters: int = 0
    tourists: int = 0
    season_pass_holders: int = 0
    child_concessions: int = 0
    parliamentarians: int = 0
    police_passes: int = 0
    stop_count: int = 40
    commuter_jitter_s: float = 150.0
    child_jitter_s: float = 240.0
    parliamentarian_jitter_s: float = 150.0
    police_jitter_s: float = 1800.0
    tram_no_touch_off_probability: float = 0.8

    def validate(self) -> None:
        counts = (self.commuters, self.tourists, self.season_pass_holders,
                  self.child_concessions, self.parliamentarians, self.police_passes)
        if any(c < 0 for c in counts):
            raise InvalidConfig("archetype counts must be >= 0")
        if self.stop_count < 2:
            raise InvalidConfig("stop universe must hold at least 2 stops")
        if self.start > self.end:
            raise InvalidConfig("date range is empty")
        if not 0.0 <= self.tram_no_touch_off_probability <= 1.0:
            raise InvalidConfig("tram_no_touch_off_probability must be in [0, 1]")

    @property
    def total_cards(self) -> int:
        return (self.commuters + self.tourists + self.season_pass_holders
                + self.child_concessions + self.parliamentarians + self.police_passes)

    @classmethod
    def from_json(cls, data: dict) -> "SyntheticPopulationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        if not {"seed", "start", "end"} <= set(data):
            raise InvalidConfig("config requires seed, start and end")
        kwargs = dict(data)
        try:
            kwargs["start"] = date.fromisoformat(kwargs["start"])
            kwargs["end"] = date.fromisoformat(kwargs["end"])
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad date in config: {exc}") from exc
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


class _ColumnSink:
    """Accumulates generated rows archetype by archetype."""

    def __init__(self):
        self.card: List[np.ndarray] = []
        self.ctype: List[np.ndarray] = []
        self.on_t: List[np.ndarray] = []
        self.on_m: List[np.ndarray] = []
        self.on_r: List[np.ndarray] = []
        self.on_s: List[np.ndarray] = []
        self.has: List[np.ndarray] = []
        self.off_t: List[np.ndarray] = []
        self.off_m: List[np.ndarray] = []
        self.off_r: List[np.ndarray] = []
        self.off_s: List[np.ndarray] = []

    def add(self, card, ctype, on_t, on_m, on_r, on_s, has, off_t, off_m, off_r, off_s):
        n = len(on_t)
        if n == 0:
            return
        self.card.append(np.broadcast_to(np.asarray(card, np.int64), (n,)).copy()
                         if np.isscalar(card) else np.asarray(card, np.int64))
        self.ctype.append(np.broadcast_to(np.asarray(ctype, np.int16), (n,)).copy()
                          if np.isscalar(ctype) else np.asarray(ctype, np.int16))
        self.on_t.append(np.asarray(on_t, np.int64))
        self.on_m.append(_bcast(on_m, n, np.int16))
        self.on_r.append(_bcast(on_r, n, np.int32))
        self.on_s.append(_bcast(on_s, n, np.int32))
        self.has.append(_bcast(has, n, bool))
        self.off_t.append(_bcast(off_t, n, np.int64))
        self.off_m.append(_bcast(off_m, n, np.int16))
        self.off_r.append(_bcast(off_r, n, np.int32))
        self.off_s.append(_bcast(off_s, n, np.int32))

    def to_store(self) -> EventStore:
        if not self.card:
            return EventStore(**_empty_columns())
        return EventStore(
            card_ids=np.concatenate(self.card),
            card_types=np.concatenate(self.ctype),
            on_times=np.concatenate(self.on_t),
            on_modes=np.concatenate(self.on_m),
            on_routes=np.concatenate(self.on_r),
            on_stops=np.concatenate(self.on_s),
            has_off=np.concatenate(self.has),
            off_times=np.concatenate(self.off_t),
            off_modes=np.concatenate(self.off_m),
            off_routes=np.concatenate(self.off_r),
            off_stops=np.concatenate(self.off_s),
        )


def _bcast(v, n, dtype):
    a = np.asarray(v, dtype)
    if a.ndim == 0:
        return np.broadcast_to(a, (n,)).copy()
    return a.astype(dtype, copy=False)


def _day_starts(start: date, end: date) -> np.ndarray:
    n_days = (end - start).days + 1
    first = to_epoch_seconds(datetime.combine(start, datetime.min.time()))
    return first + np.arange(n_days, dtype=np.int64) * SECONDS_PER_DAY


def _weekday_mask(start: date, n_days: int) -> np.ndarray:
    weekdays = (start.weekday() + np.arange(n_days)) % 7
    return weekdays < 5


def _periodic_card(
    rng: np.random.Generator,
    days: np.ndarray,
    windows: Tuple[Tuple[int, int], Tuple[int, int]],
    jitter_s: float,
    stops: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, int]:
    """Two jittered trips per listed day between a fixed stop pair.

    Returns (on_times, off_times, on_stops, off_stops, route).
    """
    home, work = stops[rng.choice(len(stops), size=2, replace=False)]
    base = np.array([int(rng.integers(lo, hi)) for lo, hi in windows], dtype=np.int64)
    travel = int(rng.integers(900, 3200))
    route = int(rng.integers(1, 100))
    d = len(days)
    jit = np.rint(rng.normal(0.0, jitter_s, size=(d, 2))).astype(np.int64)
    dur = travel + np.rint(rng.normal(0.0, 90.0, size=(d, 2))).astype(np.int64)
    on = days[:, None] + base[None, :] + jit
    on = np.clip(on, days[:, None], days[:, None] + SECONDS_PER_DAY - 1)
    off = on + np.clip(dur, 300, None)
    on_stop = np.empty((d, 2), np.int32)
    off_stop = np.empty((d, 2), np.int32)
    on_stop[:, 0], off_stop[:, 0] = home, work
    on_stop[:, 1], off_stop[:, 1] = work, home
    return on.ravel(), off.ravel(), on_stop.ravel(), off_stop.ravel(), route


def _generate_periodic(
    sink: _ColumnSink,
    seed: int,
    card_ids: Sequence[int],
    card_type_of,
    days: np.ndarray,
    windows: Tuple[Tuple[int, int], Tuple[int, int]],
    jitter_s: float,
    mode: int,
    stops: np.ndarray,
) -> None:
    if len(days) == 0:
        return
    for idx, card_id in enumerate(card_ids):
        rng = np.random.default_rng(mix64(seed, card_id))
        on, off, on_s, off_s, route = _periodic_card(rng, days, windows, jitter_s, stops)
        sink.add(card_id, card_type_of(idx), on, mode, route, on_s,
                 True, off, mode, route, off_s)


def _generate_tourists(
    sink: _ColumnSink,
    cfg: SyntheticPopulationConfig,
    card_ids: Sequence[int],
    days: np.ndarray,
    stops: np.ndarray,
) -> None:
    n_days = len(days)
    for card_id in card_ids:
        rng = np.random.default_rng(mix64(cfg.seed, card_id))
        span = min(7, n_days)
        first = 0 if n_days <= 7 else int(rng.integers(0, n_days - span + 1))
        window = days[first:first + span]
        per_day = rng.integers(1, 5, size=span)
        total = int(per_day.sum())
        day_of = np.repeat(window, per_day)
        tod = rng.integers(8 * 3600, 22 * 3600, size=total)
        on = day_of + tod
        modes = rng.choice([MODE_TRAM, MODE_TRAIN, MODE_BUS], size=total)
        on_stop = stops[rng.integers(0, len(stops), size=total)]
        off_stop = stops[rng.integers(0, len(stops), size=total)]
        routes = rng.integers(1, 100, size=total)
        dur = rng.integers(600, 2700, size=total)
        off = on + dur
        has = ~((modes == MODE_TRAM) & (rng.random(total) < cfg.tram_no_touch_off_probability))
        sink.add(card_id, TYPE_FULL_FARE, on, modes.astype(np.int16), routes,
                 on_stop, has, off, modes.astype(np.int16), routes, off_stop)


def _month_slices(start: date, end: date) -> List[Tuple[int, int]]:
    """Index ranges of _day_starts(start, end) per calendar month."""
    out = []
    d = start
    base = start.toordinal()
    while d <= end:
        last_dom = _calendar.monthrange(d.year, d.month)[1]
        month_end = min(end, date(d.year, d.month, last_dom))
        out.append((d.toordinal() - base, month_end.toordinal() - base + 1))
        d = month_end + timedelta(days=1)
    return out


def _generate_season(
    sink: _ColumnSink,
    cfg: SyntheticPopulationConfig,
    card_ids: Sequence[int],
    days: np.ndarray,
    stops: np.ndarray,
) -> None:
    months = _month_slices(cfg.start, cfg.end)
    for card_id in card_ids:
        rng = np.random.default_rng(mix64(cfg.seed, card_id))
        stop = int(stops[int(rng.integers(0, len(stops)))])
        route = int(rng.integers(1, 100))
        ons: List[int] = []
        for lo, hi in months:
            if rng.random() < 0.9:
                day = int(days[int(rng.integers(lo, hi))])
                ons.append(day + int(rng.integers(6 * 3600, 22 * 3600)))
        if not ons:
            continue
        on = np.asarray(ons, np.int64)
        sink.add(card_id, TYPE_COMMUTER_CLUB, on, MODE_TRAM, route, stop,
                 False, 0, 0, 0, 0)


def generate_population(config: SyntheticPopulationConfig) -> EventStore:
    """Deterministic synthetic population with realistic travel archetypes.

    Commuters produce weekday home-to-work and work-to-home pairs with
    per-day jitter; season pass holders roughly one tram touch-on per
    month and never a touch-off; tourists a single week of mixed-mode
    trips where tram trips drop their touch-off with the configured
    probability.  Child concession, parliamentarian and police-pass cards
    follow the commuter shape with their own time windows and types.
    """
    config.validate()
    days = _day_starts(config.start, config.end)
    wd = days[_weekday_mask(config.start, len(days))]
    stops = np.arange(10000, 10000 + config.stop_count, dtype=np.int32)
    sink = _ColumnSink()

    next_id = 1

    def take(n: int) -> range:
        nonlocal next_id
        r = range(next_id, next_id + n)
        next_id += n
        return r

    _generate_periodic(sink, config.seed, take(config.commuters),
                       lambda i: TYPE_FULL_FARE, wd,
                       ((7 * 3600, 9 * 3600), (16 * 3600 + 1800, 18 * 3600 + 1800)),
                       config.commuter_jitter_s, MODE_TRAIN, stops)
    _generate_tourists(sink, config, take(config.tourists), days, stops)
    _generate_season(sink, config, take(config.season_pass_holders), days, stops)
    _generate_periodic(sink, config.seed, take(config.child_concessions),
                       lambda i: TYPE_CHILD_CONCESSION, wd,
                       ((7 * 3600 + 1800, 8 * 3600 + 2700), (15 * 3600, 16 * 3600 + 1800)),
                       config.child_jitter_s, MODE_BUS, stops)
    _generate_periodic(sink, config.seed, take(config.parliamentarians),
                       lambda i: TYPE_STATE_PARLIAMENTARIAN, wd,
                       ((5 * 3600, 8 * 3600), (17 * 3600, 20 * 3600)),
                       config.parliamentarian_jitter_s, MODE_TRAIN, stops)
    _generate_periodic(sink, config.seed, take(config.police_passes),
                       lambda i: TYPE_FEDERAL_POLICE if i % 2 == 0 else TYPE_TRANSIT_POLICE,
                       wd,
                       ((5 * 3600, 13 * 3600), (15 * 3600, 23 * 3600)),
                       config.police_jitter_s, MODE_TRAIN, stops)
    return sink.to_store()
