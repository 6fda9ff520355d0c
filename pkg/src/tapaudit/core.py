"""Domain value types and the time/signature primitives shared by every analysis.

All timestamps are naive local time with seconds precision: the dataset's
own clock is authoritative and no timezone arithmetic is ever applied.
Internally times are also handled as integer seconds relative to
1970-01-01T00:00:00 (same naive clock) so analyses can run vectorised.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta
from enum import Enum
from typing import Optional

import numpy as np

EPOCH = datetime(1970, 1, 1)

SECONDS_PER_MINUTE = 60
SECONDS_PER_HOUR = 3600
SECONDS_PER_DAY = 86400
FIVE_MINUTES = 300
HALF_CELL = 150  # tie point of the five-minute rounding


class TapDataError(Exception):
    """Base class for all errors raised by this package."""


class MissingOffEvent(TapDataError):
    """A touch-off signature was requested from an event without one."""


class UnknownCard(TapDataError):
    """The requested card id has no events in the queried structure."""


class TimeGranularity(Enum):
    """How much of a timestamp survives truncation.

    Coarseness increases down the list; ``NEAREST_FIVE_MINUTES`` rounds
    to the nearest point of the 5-minute lattice (ties round up) while
    the others truncate fields to zero.
    """

    EXACT = "exact"
    ZERO_SECONDS = "zeroSeconds"
    NEAREST_FIVE_MINUTES = "nearestFiveMinutes"
    ZERO_MINUTES = "zeroMinutes"
    ZERO_HOUR = "zeroHour"

    @classmethod
    def from_string(cls, name: str) -> "TimeGranularity":
        for g in cls:
            if g.value == name:
                return g
        raise ValueError(f"unknown time granularity: {name!r}")


#: Coarse-to-fine listing used for reports and sweeps.
GRANULARITIES_FINE_TO_COARSE = (
    TimeGranularity.EXACT,
    TimeGranularity.ZERO_SECONDS,
    TimeGranularity.NEAREST_FIVE_MINUTES,
    TimeGranularity.ZERO_MINUTES,
    TimeGranularity.ZERO_HOUR,
)


class EventKind(Enum):
    """Which sub-events of a tap event participate in an analysis."""

    TOUCH_ON = "touchOn"
    TOUCH_OFF = "touchOff"
    BOTH = "both"

    @classmethod
    def from_string(cls, name: str) -> "EventKind":
        for k in cls:
            if k.value == name:
                return k
        raise ValueError(f"unknown event kind: {name!r}")


def to_epoch_seconds(t: datetime) -> int:
    """Naive datetime -> integer seconds since 1970-01-01 (same naive clock)."""
    return int((t - EPOCH).total_seconds())


def from_epoch_seconds(s: int) -> datetime:
    return EPOCH + timedelta(seconds=int(s))


def truncate_seconds(t: "int | np.ndarray", g: TimeGranularity) -> "int | np.ndarray":
    """Truncate epoch-second timestamps to a granularity; vectorised twin of
    :func:`truncate_time`.  Uses floor semantics, so it agrees with the
    datetime version for any representable timestamp."""
    if g is TimeGranularity.EXACT:
        return t
    if g is TimeGranularity.ZERO_SECONDS:
        return t - t % SECONDS_PER_MINUTE
    if g is TimeGranularity.NEAREST_FIVE_MINUTES:
        return (t + HALF_CELL) // FIVE_MINUTES * FIVE_MINUTES
    if g is TimeGranularity.ZERO_MINUTES:
        return t - t % SECONDS_PER_HOUR
    if g is TimeGranularity.ZERO_HOUR:
        return t - t % SECONDS_PER_DAY
    raise ValueError(f"unknown granularity {g!r}")


def truncate_time(t: datetime, g: TimeGranularity) -> datetime:
    """Truncate a timestamp to the requested granularity.

    ``NEAREST_FIVE_MINUTES`` rounds to the nearest multiple of 300 s from
    the hour boundary and can therefore roll into the next hour or day;
    a point exactly halfway (offset 150 s) rounds up.
    """
    if g is TimeGranularity.EXACT:
        return t
    if g is TimeGranularity.ZERO_SECONDS:
        return t.replace(second=0, microsecond=0)
    if g is TimeGranularity.NEAREST_FIVE_MINUTES:
        midnight = t.replace(hour=0, minute=0, second=0, microsecond=0)
        offset = int((t - midnight).total_seconds())
        rounded = (offset + HALF_CELL) // FIVE_MINUTES * FIVE_MINUTES
        return midnight + timedelta(seconds=rounded)
    if g is TimeGranularity.ZERO_MINUTES:
        return t.replace(minute=0, second=0, microsecond=0)
    if g is TimeGranularity.ZERO_HOUR:
        return t.replace(hour=0, minute=0, second=0, microsecond=0)
    raise ValueError(f"unknown granularity {g!r}")


def location_key(mode: int, stop_id: int) -> str:
    """Location string for signatures: ``"<mode>:<stopId>"``.

    The mode prefix disambiguates stop-id collisions across transport modes.
    """
    return f"{mode}:{stop_id}"


@dataclass(frozen=True)
class EventSignature:
    """Binning key: truncated time plus, optionally, the location string."""

    truncated_time: datetime
    location_key: Optional[str] = None


@dataclass(frozen=True)
class TapEvent:
    """One touch-on and optional touch-off record for a card.

    The off-side fields are all present or all absent together, and an
    off time never precedes its on time.
    """

    card_id: int
    card_type: int
    on_time: datetime
    on_mode: int
    on_route_id: int
    on_stop_id: int
    off_time: Optional[datetime] = None
    off_mode: Optional[int] = None
    off_route_id: Optional[int] = None
    off_stop_id: Optional[int] = None

    def __post_init__(self) -> None:
        if self.card_id < 1:
            raise ValueError(f"cardId must be positive, got {self.card_id}")
        if not 0 <= self.card_type <= 127:
            raise ValueError(f"cardType must be in 0..127, got {self.card_type}")
        off_fields = (self.off_time, self.off_mode, self.off_route_id, self.off_stop_id)
        present = [f is not None for f in off_fields]
        if any(present) and not all(present):
            raise ValueError("off-side fields must be all present or all absent")
        if self.off_time is not None and self.off_time < self.on_time:
            raise ValueError("offTime precedes onTime")

    @property
    def has_off(self) -> bool:
        return self.off_time is not None


def make_signature(
    event: TapEvent,
    side: EventKind,
    g: TimeGranularity,
    include_location: bool,
) -> EventSignature:
    """Signature of one side of an event at a granularity.

    ``side`` must be ``TOUCH_ON`` or ``TOUCH_OFF``; requesting the off
    side of an event without one raises :class:`MissingOffEvent`.
    """
    if side is EventKind.TOUCH_ON:
        t, mode, stop = event.on_time, event.on_mode, event.on_stop_id
    elif side is EventKind.TOUCH_OFF:
        if event.off_time is None:
            raise MissingOffEvent(f"card {event.card_id} event at {event.on_time} has no touch-off")
        t, mode, stop = event.off_time, event.off_mode, event.off_stop_id
    else:
        raise ValueError("signature side must be TOUCH_ON or TOUCH_OFF")
    loc = location_key(mode, stop) if include_location else None
    return EventSignature(truncate_time(t, g), loc)


@dataclass(frozen=True)
class Period:
    """Inclusive date range used to scope analyses."""

    start: date
    end: date

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"period start {self.start} after end {self.end}")

    def contains(self, t: datetime) -> bool:
        return self.start <= t.date() <= self.end

    @property
    def start_second(self) -> int:
        return to_epoch_seconds(datetime.combine(self.start, datetime.min.time()))

    @property
    def end_second(self) -> int:
        """Last epoch second inside the period."""
        return to_epoch_seconds(datetime.combine(self.end, datetime.min.time())) + SECONDS_PER_DAY - 1

    @classmethod
    def parse(cls, text: str) -> "Period":
        """Parse ``YYYY-MM-DD:YYYY-MM-DD``."""
        try:
            lo, hi = text.split(":")
            return cls(date.fromisoformat(lo), date.fromisoformat(hi))
        except ValueError as exc:
            raise ValueError(f"bad period {text!r}; expected YYYY-MM-DD:YYYY-MM-DD") from exc
