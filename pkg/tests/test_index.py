"""Signature calendar: binning, membership, per-card references, snapshots."""

from datetime import date, datetime, timedelta

import numpy as np
import pytest

from _helpers import make_event, random_store
from tapaudit.core import (
    EventKind,
    EventSignature,
    Period,
    TimeGranularity,
    UnknownCard,
    make_signature,
)
from tapaudit.index import build_calendar, load_calendar, save_calendar, select_subevents
from tapaudit.ingest import build_store

G = TimeGranularity
K = EventKind

T0 = datetime(2017, 3, 6, 8, 0, 0)


class TestBuildCalendar:
    def test_same_second_same_stop_share_a_bin(self):
        store = build_store([make_event(1, T0, stop=7), make_event(2, T0, stop=7)])
        cal = build_calendar(store, G.EXACT, True, K.TOUCH_ON)
        assert cal.bin_count == 1
        sig = EventSignature(T0, "2:7")
        assert cal.bin_members(sig) == {1, 2}

    def test_zero_hour_merges_different_stops_without_location(self):
        store = build_store([make_event(1, T0, stop=7),
                             make_event(2, T0 + timedelta(hours=3), stop=9)])
        cal = build_calendar(store, G.ZERO_HOUR, False, K.TOUCH_ON)
        assert cal.bin_count == 1
        assert cal.bin_members(EventSignature(T0.replace(hour=0))) == {1, 2}

    def test_distinct_events_make_singleton_bins(self):
        events = [make_event(i + 1, T0 + timedelta(seconds=i), stop=i + 1)
                  for i in range(12)]
        store = build_store(events)
        cal = build_calendar(store, G.EXACT, True, K.TOUCH_ON)
        assert cal.bin_count == 12
        assert all(len(b.members) == 1 for b in cal.iter_bins())

    def test_event_count_tracks_repeat_hits(self):
        store = build_store([make_event(1, T0, stop=7),
                             make_event(1, T0 + timedelta(seconds=20), stop=7)])
        cal = build_calendar(store, G.ZERO_MINUTES, True, K.TOUCH_ON)
        [b] = list(cal.iter_bins())
        assert b.members == {1}
        assert b.event_count == 2

    def test_kind_touch_off_skips_events_without_off(self):
        store = build_store([
            make_event(1, T0, off=T0 + timedelta(minutes=20), off_stop=3),
            make_event(2, T0),
        ])
        cal = build_calendar(store, G.EXACT, True, K.TOUCH_OFF)
        assert cal.signature_count == 1
        with pytest.raises(UnknownCard):
            cal.card_bins(2)

    def test_kind_both_counts_each_side(self):
        store = build_store([
            make_event(1, T0, off=T0 + timedelta(minutes=20), off_stop=3),
            make_event(2, T0),
        ])
        cal = build_calendar(store, G.EXACT, True, K.BOTH)
        assert cal.signature_count == 3
        assert len(cal.card_bins(1)) == 2
        assert len(cal.card_bins(2)) == 1

    def test_period_filters_by_subevent_time(self):
        d1 = datetime(2017, 3, 6, 23, 50, 0)
        store = build_store([make_event(1, d1, off=d1 + timedelta(minutes=30), off_stop=2)])
        cal = build_calendar(store, G.EXACT, True, K.BOTH,
                             period=Period(date(2017, 3, 6), date(2017, 3, 6)))
        # off side lands on the 7th: only the on side selected
        assert cal.signature_count == 1


class TestBinMembers:
    def test_absent_signature_empty(self):
        store = build_store([make_event(1, T0, stop=7)])
        cal = build_calendar(store, G.EXACT, True, K.TOUCH_ON)
        assert cal.bin_members(EventSignature(T0 + timedelta(seconds=1), "2:7")) == frozenset()

    def test_wrong_granularity_signature_not_normalised(self):
        store = build_store([make_event(1, T0.replace(second=36), stop=7)])
        cal = build_calendar(store, G.ZERO_SECONDS, True, K.TOUCH_ON)
        exact_sig = EventSignature(T0.replace(second=36), "2:7")
        assert cal.bin_members(exact_sig) == frozenset()
        assert cal.bin_members(EventSignature(T0.replace(second=0), "2:7")) == {1}

    def test_location_convention_mismatch_empty(self):
        store = build_store([make_event(1, T0, stop=7)])
        cal = build_calendar(store, G.EXACT, True, K.TOUCH_ON)
        assert cal.bin_members(EventSignature(T0, None)) == frozenset()


class TestCardBins:
    def test_one_reference_per_touch_on(self):
        store = build_store([make_event(1, T0 + timedelta(minutes=i), stop=i + 1)
                             for i in range(3)])
        cal = build_calendar(store, G.EXACT, True, K.TOUCH_ON)
        assert len(cal.card_bins(1)) == 3

    def test_repeated_signature_repeats_the_reference(self):
        store = build_store([
            make_event(1, T0, stop=7),
            make_event(1, T0 + timedelta(seconds=30), stop=7),
            make_event(1, T0 + timedelta(minutes=9), stop=8),
        ])
        cal = build_calendar(store, G.ZERO_MINUTES, True, K.TOUCH_ON)
        bins = cal.card_bins(1)
        assert len(bins) == 3
        assert bins[0] is bins[1]
        assert bins[0] is not bins[2]

    def test_unknown_card(self):
        store = build_store([make_event(1, T0)])
        cal = build_calendar(store, G.EXACT, True, K.TOUCH_ON)
        with pytest.raises(UnknownCard):
            cal.card_bins(42)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("kind", [K.TOUCH_ON, K.BOTH])
def test_membership_soundness(seed, kind):
    store = random_store(seed)
    cal = build_calendar(store, G.ZERO_SECONDS, True, kind)
    per_card = {cid: cal.card_bins(cid) for cid in cal.sub.cards.tolist()}
    for cid, bins in per_card.items():
        for b in bins:
            assert cid in b.members
    # and conversely: every member of a bin holds a reference to it
    for b in cal.iter_bins():
        for cid in b.members:
            assert b in per_card[cid]


@pytest.mark.parametrize("seed", range(6))
def test_signature_conservation(seed):
    store = random_store(seed)
    for kind in (K.TOUCH_ON, K.TOUCH_OFF, K.BOTH):
        cal = build_calendar(store, G.NEAREST_FIVE_MINUTES, True, kind)
        assert int(cal.index.event_counts.sum()) == cal.signature_count


@pytest.mark.parametrize("seed", range(6))
def test_coarsening_merges_through_refining_chain(seed):
    """Bin counts may only shrink along exact -> zeroSeconds -> zeroMinutes
    -> zeroHour (and exact -> nearestFiveMinutes), where each step is a true
    refinement of the next."""
    store = random_store(seed)
    for loc in (True, False):
        counts = {g: build_calendar(store, g, loc, K.TOUCH_ON).bin_count
                  for g in G}
        assert counts[G.ZERO_HOUR] <= counts[G.ZERO_MINUTES] \
            <= counts[G.ZERO_SECONDS] <= counts[G.EXACT]
        assert counts[G.NEAREST_FIVE_MINUTES] <= counts[G.EXACT]


def test_five_minute_bins_not_nested_in_minutes():
    """Rounding to the nearest lattice point can split one minute across
    two cells, so nearestFiveMinutes is not a refinement target of
    zeroSeconds (the coarseness chain between them is only empirical)."""
    store = build_store([
        make_event(1, datetime(2017, 3, 6, 8, 52, 10)),
        make_event(2, datetime(2017, 3, 6, 8, 52, 40)),
    ])
    zs = build_calendar(store, G.ZERO_SECONDS, False, K.TOUCH_ON)
    n5 = build_calendar(store, G.NEAREST_FIVE_MINUTES, False, K.TOUCH_ON)
    assert zs.bin_count == 1
    assert n5.bin_count == 2


@pytest.mark.parametrize("seed", range(6))
def test_location_splits_bins(seed):
    store = random_store(seed)
    for g in G:
        with_loc = build_calendar(store, g, True, K.TOUCH_ON).bin_count
        without = build_calendar(store, g, False, K.TOUCH_ON).bin_count
        assert with_loc >= without


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        store = random_store(9)
        cal = build_calendar(store, G.ZERO_SECONDS, True, K.TOUCH_ON)
        path = tmp_path / "week.calendar.npz"
        save_calendar(cal, path)
        loaded = load_calendar(path)
        assert loaded.granularity == cal.granularity
        assert loaded.include_location == cal.include_location
        assert loaded.kind == cal.kind
        assert loaded.bin_count == cal.bin_count
        for cid in store.cards().tolist()[:5]:
            assert [b.signature for b in loaded.card_bins(cid)] \
                == [b.signature for b in cal.card_bins(cid)]
        ev = store.event_at(0)
        sig = make_signature(ev, K.TOUCH_ON, G.ZERO_SECONDS, True)
        assert loaded.bin_members(sig) == cal.bin_members(sig)

    def test_rejects_foreign_files(self, tmp_path):
        path = tmp_path / "other.npz"
        np.savez(path, meta=np.array(['{"magic": "something-else"}']))
        with pytest.raises(ValueError):
            load_calendar(path)


def test_subevents_canonical_order_matches_object_path():
    from tapaudit.unicity import selected_subevents
    from tapaudit.core import to_epoch_seconds

    store = random_store(17)
    for kind in (K.TOUCH_ON, K.TOUCH_OFF, K.BOTH):
        sub = select_subevents(store, kind)
        for cid in store.cards().tolist():
            objs = selected_subevents(store, cid, kind)
            sl = sub.card_slice(cid)
            if sl is None:
                assert objs == []
                continue
            cols = [(int(t), int(m), int(s)) for t, m, s in
                    zip(sub.time[sl[0]:sl[1]], sub.mode[sl[0]:sl[1]], sub.stop[sl[0]:sl[1]])]
            assert cols == [(to_epoch_seconds(o.time), o.mode, o.stop) for o in objs]
