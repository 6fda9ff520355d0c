"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL
line per criterion.  The trend criterion builds a 100,000-card synthetic
population (~10M events), so this module takes a few minutes.
"""

import json
import random
import time
from datetime import date, datetime, time as dtime, timedelta

import numpy as np
import pytest

from _helpers import make_event, random_store
from tapaudit.cli import main
from tapaudit.core import EventKind, Period, TimeGranularity
from tapaudit.cotravel import cotravel_on_date, cotravellers
from tapaudit.ingest import (
    SyntheticPopulationConfig,
    build_store,
    generate_population,
)
from tapaudit.query import (
    TouchOnBetween,
    evaluate,
    id_gap_scan,
    refine,
)
from tapaudit.release import (
    DIRECTION_OFF,
    DIRECTION_ON,
    PostProcess,
    PrivacyParams,
    add_noise,
    aggregate_counts,
    geometric_mean_abs_noise,
)
from tapaudit.unicity import (
    UnicityParams,
    brute_force_unicity,
    run_unicity,
    sampled_subevent_sets,
)
from test_cotravel import quadratic_cotravellers, seminar_store
from test_query import random_constraint, scan_evaluate

G = TimeGranularity
ALL_G = tuple(G)
ALL_N = (1, 2, 3, 4, 5)


def verdict(name):
    class _Verdict:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            print(f"\nACCEPTANCE {name}: {'PASS' if exc_type is None else 'FAIL'}")
            return False

    return _Verdict()


# -- criterion: oracle equivalence ----------------------------------------

def test_oracle_equivalence_on_100_stores():
    with verdict("oracle-equivalence"):
        started = time.monotonic()
        mismatches = 0
        stores_checked = 0
        for seed in range(100):
            store = random_store(seed, max_cards=24, max_events=7,
                                 dense_times=(seed % 3 != 0))
            assert store.event_count <= 1000
            stores_checked += 1
            params = UnicityParams(granularities=ALL_G, location_flags=(True, False),
                                   cardinalities=ALL_N, seed=seed * 101 + 3)
            report = run_unicity(store, params, collect_flags=True)
            for n in ALL_N:
                sampled = sampled_subevent_sets(store, EventKind.TOUCH_ON,
                                                params.seed, n)
                for g in ALL_G:
                    for loc in (True, False):
                        oracle = brute_force_unicity(store, sampled, g, loc)
                        if report.flags[(g, loc, n)] != oracle:
                            mismatches += 1
        elapsed = time.monotonic() - started
        assert stores_checked >= 100
        assert mismatches == 0
        assert elapsed < 60.0, f"oracle equivalence took {elapsed:.1f}s"


# -- criterion: monotonicity suite ----------------------------------------

@pytest.fixture(scope="module")
def report_pool():
    pool = []
    for seed in range(40):
        store = random_store(seed + 1000, max_cards=18, max_events=7)
        base = run_unicity(store, UnicityParams(
            granularities=ALL_G, location_flags=(True, False), cardinalities=ALL_N,
            seed=seed), collect_flags=True)
        filled = run_unicity(store, UnicityParams(
            granularities=ALL_G, location_flags=(True, False), cardinalities=ALL_N,
            seed=seed, min_events=5), collect_flags=True)
        pool.append((store, base, filled))
    return pool


REFINEMENT_PAIRS = [
    (G.EXACT, G.ZERO_SECONDS), (G.EXACT, G.NEAREST_FIVE_MINUTES),
    (G.EXACT, G.ZERO_MINUTES), (G.EXACT, G.ZERO_HOUR),
    (G.ZERO_SECONDS, G.ZERO_MINUTES), (G.ZERO_SECONDS, G.ZERO_HOUR),
    (G.ZERO_MINUTES, G.ZERO_HOUR),
]


def test_monotonicity_suite(report_pool):
    with verdict("monotonicity-suite"):
        rng = random.Random(2024)
        violations = 0

        for _ in range(1000):  # coarsening
            _, base, _ = report_pool[rng.randrange(len(report_pool))]
            fine, coarse = REFINEMENT_PAIRS[rng.randrange(len(REFINEMENT_PAIRS))]
            loc, n = rng.random() < 0.5, rng.choice(ALL_N)
            fine_flags = base.flags[(fine, loc, n)]
            for cid, coarse_unique in base.flags[(coarse, loc, n)].items():
                if coarse_unique and not fine_flags[cid]:
                    violations += 1

        for _ in range(1000):  # location
            _, base, _ = report_pool[rng.randrange(len(report_pool))]
            g, n = rng.choice(ALL_G), rng.choice(ALL_N)
            with_loc = base.flags[(g, True, n)]
            for cid, unique_bare in base.flags[(g, False, n)].items():
                if unique_bare and not with_loc[cid]:
                    violations += 1

        for _ in range(1000):  # prefix on filled sets
            _, _, filled = report_pool[rng.randrange(len(report_pool))]
            g, loc = rng.choice(ALL_G), rng.random() < 0.5
            n = rng.choice((1, 2, 3, 4))
            larger = filled.flags[(g, loc, n + 1)]
            for cid, was_unique in filled.flags[(g, loc, n)].items():
                if was_unique and not larger[cid]:
                    violations += 1

        for _ in range(1000):  # query anti-monotonicity
            store, _, _ = report_pool[rng.randrange(len(report_pool))]
            constraints = [random_constraint(rng, store)
                           for _ in range(rng.randint(0, 3))]
            base_set = evaluate(store, constraints)
            extra = random_constraint(rng, store)
            refined = refine(base_set, extra, store)
            if not refined.card_ids <= base_set.card_ids:
                violations += 1

        assert violations == 0


# -- criterion: qualitative uniqueness trends --------------------------------

TRENDS_CONFIG = SyntheticPopulationConfig(
    seed=20170101,
    start=date(2017, 1, 2), end=date(2017, 12, 31),
    commuters=15_000, tourists=61_576, season_pass_holders=20_000,
    child_concessions=2_000, parliamentarians=424, police_passes=1_000,
    stop_count=200,
)
WEEK_40 = Period(date(2017, 10, 2), date(2017, 10, 8))


@pytest.fixture(scope="module")
def trends_population():
    return generate_population(TRENDS_CONFIG)


def test_uniqueness_trends_on_large_population(trends_population):
    with verdict("uniqueness-trends"):
        started = time.monotonic()
        store = trends_population
        assert store.card_count == 100_000
        assert 8_000_000 <= store.event_count <= 13_000_000

        week = run_unicity(store, UnicityParams(
            granularities=ALL_G, location_flags=(True, False), cardinalities=ALL_N,
            seed=7, period=WEEK_40))
        week_filled = run_unicity(store, UnicityParams(
            granularities=ALL_G, location_flags=(True, False), cardinalities=ALL_N,
            seed=7, period=WEEK_40, min_events=5))
        year = run_unicity(store, UnicityParams(
            granularities=(G.EXACT,), location_flags=(True, False),
            cardinalities=(1, 2), seed=7))

        # (a) exact time + location: one event is usually enough
        assert week.cell(G.EXACT, True, 1).percent_unique > 60.0

        # (b) non-decreasing in n on the filled-set sub-population
        for g in ALL_G:
            for loc in (True, False):
                percents = [week_filled.cell(g, loc, n).percent_unique for n in ALL_N]
                assert percents == sorted(percents), (g, loc, percents)

        # (c) location helps, coarsening hurts, at every cardinality
        for n in ALL_N:
            for g in ALL_G:
                assert week.cell(g, True, n).percent_unique \
                    >= week.cell(g, False, n).percent_unique
            for loc in (True, False):
                chain = [week.cell(g, loc, n).percent_unique for g in ALL_G]
                assert chain == sorted(chain, reverse=True), (loc, n, chain)

        # (d) a year of data is at least as identifying as one week
        assert year.cell(G.EXACT, False, 2).percent_unique \
            >= week.cell(G.EXACT, False, 2).percent_unique
        assert year.cell(G.EXACT, False, 2).percent_unique > 90.0

        elapsed = time.monotonic() - started
        assert elapsed < 600.0, f"trend run took {elapsed:.1f}s"


# -- criterion: co-travel -----------------------------------------------------

def test_cotravel_oracle_and_seminar():
    with verdict("cotravel"):
        mismatches = 0
        for seed in range(12):
            store = random_store(seed * 3 + 2, max_cards=28)
            assert store.event_count <= 10_000
            occurrences = {}
            for cid in store.cards().tolist():
                matches = cotravellers(store, cid)
                got = {m.other_card_id: m.occurrences for m in matches}
                if got != quadratic_cotravellers(store, cid, 5):
                    mismatches += 1
                occurrences[cid] = got
            for a, row in occurrences.items():  # symmetry
                for b, k in row.items():
                    if occurrences[b].get(a) != k:
                        mismatches += 1
        assert mismatches == 0

        store, day = seminar_store()
        matches = cotravel_on_date(store, 1, day)
        assert len(matches) == 4
        survivors = [m for m in matches if m.other_card_type not in (3, 4)]
        assert len(survivors) == 1 and survivors[0].other_card_id == 2


# -- criterion: re-id narrowing ------------------------------------------------

def test_reid_narrowing():
    with verdict("reid-narrowing"):
        day = date(2017, 3, 6)
        events = []
        for cid in range(1, 31):  # a busy morning window
            events.append(make_event(cid, datetime(2017, 3, 6, 8, cid % 55, 7),
                                     stop=3))
        events.append(make_event(1, datetime(2017, 3, 6, 17, 30, 0), stop=8))
        store = build_store(events)
        first = evaluate(store, [TouchOnBetween(day, dtime(8, 0), dtime(9, 0))])
        assert len(first) > 20
        second = refine(first, TouchOnBetween(day, dtime(17, 0), dtime(18, 0)), store)
        assert second.card_ids == {1}
        assert scan_evaluate(store, second.constraints) == {1}


# -- criterion: gap scan ---------------------------------------------------------

def test_gap_scan_recovers_planted_gaps():
    with verdict("gap-scan"):
        used = [1, 15747, 15748, 154449, 173211, 173337, 173338, 180638, 191920, 356913]
        planted = {
            (1, 15747): 15745,        # ids 2..15746 unused
            (15748, 154449): 138700,
            (154449, 173211): 18761,
            (173211, 173337): 125,
            (173338, 180638): 7299,
            (180638, 191920): 11281,
            (191920, 356913): 164992,
        }
        store = build_store([make_event(c, datetime(2017, 1, 2, 8, 0, 0)
                                        + timedelta(seconds=i))
                             for i, c in enumerate(used)])
        got = {(g.last_used_id, g.next_used_id): g.missing_count
               for g in id_gap_scan(store, 1)}
        assert got == planted
        # missingCount is always next - last - 1
        for (lo, hi), missing in got.items():
            assert missing == hi - lo - 1


# -- criterion: release ----------------------------------------------------------

def test_release_criteria():
    with verdict("release"):
        store = random_store(77, max_cards=25)
        period = Period(date(2017, 3, 6), date(2017, 3, 11))
        table = aggregate_counts(store, 15, period)

        # pre-noise conservation, exact
        in_period = (store.on_times >= period.start_second) \
            & (store.on_times <= period.end_second)
        assert table.total(DIRECTION_ON) == int(in_period.sum())
        off_in = store.has_off & (store.off_times >= period.start_second) \
            & (store.off_times <= period.end_second)
        assert table.total(DIRECTION_OFF) == int(off_in.sum())

        # noise determinism under a fixed seed, exact
        params = PrivacyParams(epsilon=1.0, seed=99)
        a, b = add_noise(table, params), add_noise(table, params)
        assert np.array_equal(a.values, b.values)

        # empirical mean |noise| within 10% of analytic over >= 10^4 cells
        wide = aggregate_counts(build_store(
            [make_event(1 + i % 10,
                        datetime(2017, 3, 6, 8) + timedelta(hours=i % 100),
                        stop=1 + i % 10) for i in range(300)]), 15, period)
        noisy = add_noise(wide, params)
        assert len(noisy) >= 10_000
        # an astronomically large epsilon zeroes the noise, exposing the
        # dense true lattice for differencing
        silent = add_noise(wide, PrivacyParams(epsilon=1e9, seed=99))
        noise = noisy.values - silent.values
        analytic = geometric_mean_abs_noise(1.0)
        assert abs(np.abs(noise).mean() - analytic) <= 0.10 * analytic

        # post-processed output is always a non-negative integer
        clamped = add_noise(table,
                            PrivacyParams(epsilon=0.5, seed=5,
                                          post_process=PostProcess.ROUND_AND_CLAMP_TO_ZERO))
        assert np.issubdtype(clamped.values.dtype, np.integer)
        assert np.all(clamped.values >= 0)


# -- criterion: end-to-end determinism -------------------------------------------

def test_cli_determinism(tmp_path):
    with verdict("cli-determinism"):
        config = tmp_path / "pop.json"
        config.write_text(json.dumps({
            "seed": 9, "start": "2017-10-02", "end": "2017-10-20",
            "commuters": 6, "tourists": 5, "season_pass_holders": 3,
            "child_concessions": 2, "parliamentarians": 1, "police_passes": 2,
            "stop_count": 10,
        }))
        data = tmp_path / "data.csv"
        qfile = tmp_path / "q.json"
        qfile.write_text(json.dumps([{"kind": "minEventCount", "k": 2}]))

        def run(args, out):
            rc = main(args + ["--out", str(out)])
            assert rc == 0
            return out.read_bytes()

        variants = {
            "synth": ["synth", "--config", str(config)],
            "ingest": ["ingest", "--in", str(data)],
            "unicity-t1": ["unicity", "--in", str(data), "--granularity", "all",
                           "--n", "1..3", "--seed", "5", "--threads", "1"],
            "unicity-t4": ["unicity", "--in", str(data), "--granularity", "all",
                           "--n", "1..3", "--seed", "5", "--threads", "4"],
            "cotravel": ["cotravel", "--in", str(data), "--card", "1"],
            "query": ["query", "--in", str(data), "--constraints", str(qfile)],
            "audit-gaps": ["audit", "gaps", "--in", str(data)],
            "audit-types": ["audit", "types", "--in", str(data)],
            "release": ["release", "--in", str(data), "--seed", "3",
                        "--post", "roundClamp", "--period", "2017-10-02:2017-10-08"],
        }
        # synth must run first to produce the data file
        first = run(variants["synth"], data)
        second = run(variants["synth"], tmp_path / "data2.csv")
        assert first == second

        outputs = {}
        for name, args in variants.items():
            if name == "synth":
                continue
            o1 = run(args, tmp_path / f"{name}-1.out")
            o2 = run(args, tmp_path / f"{name}-2.out")
            assert o1 == o2, name
            outputs[name] = o1
        assert outputs["unicity-t1"] == outputs["unicity-t4"]
