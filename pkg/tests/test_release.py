"""Aggregate release: exact counts, clamping, and calibrated noise."""

import json
import math
from datetime import date, datetime, timedelta

import numpy as np
import pytest

from _helpers import make_event, random_store
from tapaudit.core import Period
from tapaudit.ingest import build_store
from tapaudit.release import (
    DIRECTION_OFF,
    DIRECTION_ON,
    CardLevel,
    InvalidBlock,
    Mechanism,
    PostProcess,
    PrivacyParams,
    add_noise,
    aggregate_counts,
    geometric_mean_abs_noise,
    laplace_mean_abs_noise,
    private_release,
    write_release,
)

T0 = datetime(2017, 3, 6, 8, 0, 0)
DAY = Period(date(2017, 3, 6), date(2017, 3, 6))


class TestAggregateCounts:
    def test_quarter_hour_cell(self):
        # three touch-ons at stop 7 inside 08:00..08:14:59
        store = build_store([
            make_event(1, datetime(2017, 3, 6, 8, 0, 0), stop=7),
            make_event(2, datetime(2017, 3, 6, 8, 7, 30), stop=7),
            make_event(3, datetime(2017, 3, 6, 8, 14, 59), stop=7),
        ])
        table = aggregate_counts(store, 15, DAY)
        assert table.get(7, T0, DIRECTION_ON) == 3

    def test_block_boundaries(self):
        store = build_store([
            make_event(1, datetime(2017, 3, 6, 8, 14, 59), stop=7),
            make_event(2, datetime(2017, 3, 6, 8, 15, 0), stop=7),
        ])
        table = aggregate_counts(store, 15, DAY)
        assert table.get(7, datetime(2017, 3, 6, 8, 0), DIRECTION_ON) == 1
        assert table.get(7, datetime(2017, 3, 6, 8, 15), DIRECTION_ON) == 1

    def test_empty_store_empty_table(self):
        table = aggregate_counts(build_store([]))
        assert len(table) == 0

    def test_invalid_block(self):
        with pytest.raises(InvalidBlock):
            aggregate_counts(random_store(1), 7)
        with pytest.raises(InvalidBlock):
            aggregate_counts(random_store(1), 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_conservation(self, seed):
        store = random_store(seed)
        table = aggregate_counts(store, 15)
        assert table.total(DIRECTION_ON) == store.event_count
        assert table.total(DIRECTION_OFF) == int(store.has_off.sum())

    def test_off_side_uses_off_stop(self):
        store = build_store([make_event(1, T0, stop=7,
                                        off=T0 + timedelta(minutes=20), off_stop=9)])
        table = aggregate_counts(store, 15, DAY)
        assert table.get(9, datetime(2017, 3, 6, 8, 15), DIRECTION_OFF) == 1
        assert table.get(7, T0, DIRECTION_OFF) == 0

    def test_period_filters_events(self):
        store = build_store([make_event(1, T0), make_event(2, T0 + timedelta(days=5))])
        table = aggregate_counts(store, 15, DAY)
        assert table.total(DIRECTION_ON) == 1


class TestClamping:
    def test_per_card_contribution_clamped(self):
        events = [make_event(9, T0 + timedelta(seconds=10 * i), stop=7)
                  for i in range(5)]  # one card, five taps in one block
        events.append(make_event(2, T0 + timedelta(seconds=1), stop=7))
        store = build_store(events)
        exact = aggregate_counts(store, 15, DAY)
        clamped = aggregate_counts(store, 15, DAY, max_contribution_per_card=2)
        assert exact.get(7, T0, DIRECTION_ON) == 6
        assert clamped.get(7, T0, DIRECTION_ON) == 2 + 1

    @pytest.mark.parametrize("seed", range(4))
    def test_clamping_monotone_in_bound(self, seed):
        store = random_store(seed)
        tables = [aggregate_counts(store, 15, max_contribution_per_card=k)
                  for k in (1, 2, 4)]
        for lo, hi in zip(tables, tables[1:]):
            cells_lo = {(s, b, d): v for s, b, d, v in lo.cells()}
            for s, b, d, v in hi.cells():
                assert v >= cells_lo.get((s, b, d), 0)

    def test_clamped_never_exceeds_exact(self):
        store = random_store(11)
        exact = {(s, b, d): v for s, b, d, v in aggregate_counts(store, 15).cells()}
        clamped = aggregate_counts(store, 15, max_contribution_per_card=1)
        for s, b, d, v in clamped.cells():
            assert v <= exact[(s, b, d)]


def ten_stop_table():
    """True table over a lattice of 10 stops x 6 days x 96 blocks x 2."""
    events = []
    for i in range(200):
        on = T0 + timedelta(hours=(i % 50), minutes=(i * 7) % 60)
        events.append(make_event(1 + i % 20, on, stop=1 + i % 10,
                                 off=on + timedelta(minutes=9), off_stop=1 + (i + 3) % 10))
    store = build_store(events)
    period = Period(date(2017, 3, 6), date(2017, 3, 11))
    return aggregate_counts(store, 15, period)


class TestAddNoise:
    def test_lattice_includes_zero_cells(self):
        table = ten_stop_table()
        noisy = add_noise(table, PrivacyParams(epsilon=1.0, seed=5))
        assert len(noisy) == 10 * 6 * 96 * 2
        assert len(noisy) > len(table)

    def test_deterministic_under_fixed_seed(self):
        table = ten_stop_table()
        for mech in Mechanism:
            p = PrivacyParams(epsilon=1.0, seed=42, mechanism=mech)
            a, b = add_noise(table, p), add_noise(table, p)
            assert np.array_equal(a.values, b.values)

    def test_different_seeds_differ(self):
        table = ten_stop_table()
        a = add_noise(table, PrivacyParams(epsilon=1.0, seed=1))
        b = add_noise(table, PrivacyParams(epsilon=1.0, seed=2))
        assert not np.array_equal(a.values, b.values)

    def test_geometric_noise_is_integral(self):
        table = ten_stop_table()
        noisy = add_noise(table, PrivacyParams(epsilon=1.0, seed=5))
        assert np.all(noisy.values == np.rint(noisy.values))

    @pytest.mark.parametrize("mech,analytic", [
        (Mechanism.GEOMETRIC, geometric_mean_abs_noise(1.0)),
        (Mechanism.LAPLACE, laplace_mean_abs_noise(1.0)),
    ])
    def test_mean_abs_noise_matches_analytic(self, mech, analytic):
        table = ten_stop_table()
        noisy = add_noise(table, PrivacyParams(epsilon=1.0, seed=31, mechanism=mech))
        noise = noisy.values - _dense_true(table)
        assert len(noise) >= 10_000
        assert abs(np.abs(noise).mean() - analytic) <= 0.10 * analytic

    def test_noise_zero_mean(self):
        table = ten_stop_table()
        noisy = add_noise(table, PrivacyParams(epsilon=1.0, seed=8))
        noise = noisy.values - _dense_true(table)
        se = noise.std() / math.sqrt(len(noise))
        assert abs(noise.mean()) <= 3 * se

    def test_card_level_scale(self):
        # sensitivity k inflates |noise| accordingly
        table = ten_stop_table()
        p = PrivacyParams(epsilon=1.0, seed=3, adjacency=CardLevel(4))
        noisy = add_noise(table, p)
        noise = noisy.values - _dense_true(table)
        analytic = geometric_mean_abs_noise(1.0, sensitivity=4)
        assert abs(np.abs(noise).mean() - analytic) <= 0.10 * analytic

    @pytest.mark.parametrize("mech", list(Mechanism))
    @pytest.mark.parametrize("eps", [0.3, 1.0, 5.0])
    def test_round_and_clamp_yields_nonnegative_integers(self, mech, eps):
        table = ten_stop_table()
        p = PrivacyParams(epsilon=eps, seed=11, mechanism=mech,
                          post_process=PostProcess.ROUND_AND_CLAMP_TO_ZERO)
        noisy = add_noise(table, p)
        assert np.issubdtype(noisy.values.dtype, np.integer)
        assert np.all(noisy.values >= 0)

    def test_refuses_double_noise(self):
        table = ten_stop_table()
        noisy = add_noise(table, PrivacyParams(epsilon=1.0, seed=5))
        with pytest.raises(ValueError):
            add_noise(noisy, PrivacyParams(epsilon=1.0, seed=5))

    def test_epsilon_must_be_positive(self):
        with pytest.raises(ValueError):
            PrivacyParams(epsilon=0.0, seed=1)
        with pytest.raises(ValueError):
            CardLevel(0)


def _dense_true(table):
    noisy_zero = add_noise(table, PrivacyParams(epsilon=1e9, seed=0))
    # with epsilon this large the noise underflows to zero, leaving the
    # scattered true counts on the full lattice
    return noisy_zero.values


class TestPrivateRelease:
    def test_composes_clamp_and_noise(self):
        events = [make_event(9, T0 + timedelta(seconds=10 * i), stop=7) for i in range(5)]
        store = build_store(events)
        p = PrivacyParams(epsilon=1e9, seed=1, adjacency=CardLevel(2))
        noisy = private_release(store, p, 15, DAY)
        assert noisy.get(7, T0, DIRECTION_ON) == 2.0

    def test_write_release_sidecar_excludes_seed(self, tmp_path):
        store = random_store(6)
        p = PrivacyParams(epsilon=1.0, seed=777,
                          post_process=PostProcess.ROUND_AND_CLAMP_TO_ZERO)
        table = private_release(store, p, 15)
        out = tmp_path / "release.csv"
        write_release(table, p, out)
        text = out.read_text()
        assert text.splitlines()[0] == "stopId,blockStart,direction,count"
        meta = json.loads((tmp_path / "release.csv.meta.json").read_text())
        assert meta["epsilon"] == 1.0
        assert meta["adjacency"] == {"level": "event"}
        assert meta["blockMinutes"] == 15
        assert "777" not in json.dumps(meta)
        assert "seed" not in {k.lower() for k in meta} or meta.get("seedPolicy")
