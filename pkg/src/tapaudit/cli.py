"""Command-line entry points for every analysis.

Every subcommand is deterministic: equal inputs and seeds produce
byte-identical output, regardless of thread count.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import date
from pathlib import Path
from typing import Optional, Sequence, Tuple

from .core import EventKind, Period, TapDataError, TimeGranularity, from_epoch_seconds
from .cotravel import cotravel_to_csv, cotravel_on_date, cotravellers
from .ingest import (
    SyntheticPopulationConfig,
    generate_population,
    load_directory,
    load_store,
    write_events,
)
from .query import (
    card_type_census,
    census_to_csv,
    constraint_from_json,
    evaluate,
    gaps_to_csv,
    id_gap_scan,
)
from .release import (
    CardLevel,
    EventLevel,
    Mechanism,
    PostProcess,
    PrivacyParams,
    private_release,
    write_release,
)
from .unicity import UnicityParams, UnicityReport, run_unicity


def _load(path: str):
    p = Path(path)
    store, errors = load_directory(p) if p.is_dir() else load_store(p)
    if errors:
        print(f"warning: {len(errors)} malformed rows skipped", file=sys.stderr)
    return store


def _out_stream(path: Optional[str]):
    if path is None:
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _write_text(path: Optional[str], text: str) -> None:
    fh, owned = _out_stream(path)
    try:
        fh.write(text)
    finally:
        if owned:
            fh.close()


def _parse_cardinalities(text: str) -> Tuple[int, ...]:
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(sorted(int(x) for x in text.split(",")))


def _parse_granularities(text: str) -> Tuple[TimeGranularity, ...]:
    if text == "all":
        return (TimeGranularity.EXACT, TimeGranularity.ZERO_SECONDS,
                TimeGranularity.NEAREST_FIVE_MINUTES, TimeGranularity.ZERO_MINUTES,
                TimeGranularity.ZERO_HOUR)
    return tuple(TimeGranularity.from_string(s) for s in text.split(","))


def _parse_location(text: str) -> Tuple[bool, ...]:
    if text == "both":
        return (True, False)
    if text == "with":
        return (True,)
    if text == "without":
        return (False,)
    raise ValueError("--location must be with, without or both")


def _cmd_synth(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = SyntheticPopulationConfig.from_json(json.load(fh))
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    store = generate_population(cfg)
    rows = write_events(store, args.out)
    print(f"wrote {rows} events for {store.card_count} cards to {args.out}",
          file=sys.stderr)
    return 0


def _cmd_ingest(args) -> int:
    p = Path(args.inp)
    store, errors = load_directory(p) if p.is_dir() else load_store(p)
    summary = {
        "cards": store.card_count,
        "events": store.event_count,
        "firstTime": store.first_time.isoformat() if store.first_time else None,
        "lastTime": store.last_time.isoformat() if store.last_time else None,
        "badRows": len(errors),
    }
    _write_text(args.out, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_unicity(args) -> int:
    store = _load(args.inp)
    params = UnicityParams(
        granularities=_parse_granularities(args.granularity),
        location_flags=_parse_location(args.location),
        cardinalities=_parse_cardinalities(args.n),
        kind=EventKind.from_string(args.kind),
        seed=args.seed,
        period=Period.parse(args.period) if args.period else None,
        min_events=args.min_events,
    )
    if args.threads > 1:
        # settings are independent; evaluate them in parallel and merge
        settings = [(g, loc) for g in params.granularities
                    for loc in params.location_flags]

        def one(setting):
            g, loc = setting
            from dataclasses import replace
            sub = replace(params, granularities=(g,), location_flags=(loc,))
            return run_unicity(store, sub)

        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            parts = list(pool.map(one, settings))
        cells = {}
        for part in parts:
            cells.update(part.cells)
        report = UnicityReport(params=params, cells=cells)
    else:
        report = run_unicity(store, params)
    fh, owned = _out_stream(args.out)
    try:
        report.write_csv(fh)
    finally:
        if owned:
            fh.close()
    return 0


def _cmd_cotravel(args) -> int:
    store = _load(args.inp)
    if args.date:
        matches = cotravel_on_date(store, args.card, date.fromisoformat(args.date),
                                   args.window)
    else:
        period = Period.parse(args.period) if args.period else None
        matches = cotravellers(store, args.card, args.window, period)
    fh, owned = _out_stream(args.out)
    try:
        cotravel_to_csv(matches, fh)
    finally:
        if owned:
            fh.close()
    return 0


def _cmd_query(args) -> int:
    store = _load(args.inp)
    with open(args.constraints, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise TapDataError("constraints file must hold a JSON array")
    constraints = [constraint_from_json(c) for c in raw]
    result = evaluate(store, constraints)
    cards = sorted(result.card_ids)
    preview = []
    positions = {int(c): i for i, c in enumerate(store.cards())}
    modal = store.card_modal_types()
    first = store.card_first_seen()
    last = store.card_last_seen()
    counts = store.card_event_counts()
    for cid in cards[: args.limit]:
        i = positions[cid]
        preview.append({
            "cardId": cid,
            "cardType": int(modal[i]),
            "firstSeen": from_epoch_seconds(int(first[i])).isoformat(),
            "lastSeen": from_epoch_seconds(int(last[i])).isoformat(),
            "eventCount": int(counts[i]),
        })
    out = {"total": len(result), "preview": preview}
    _write_text(args.out, json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_audit(args) -> int:
    store = _load(args.inp)
    fh, owned = _out_stream(args.out)
    try:
        if args.mode == "gaps":
            gaps_to_csv(id_gap_scan(store, args.min_gap), fh)
        else:
            census_to_csv(card_type_census(store, args.threshold), fh)
    finally:
        if owned:
            fh.close()
    return 0


def _cmd_release(args) -> int:
    store = _load(args.inp)
    adjacency = CardLevel(args.max_contribution) if args.adjacency == "card" \
        else EventLevel()
    params = PrivacyParams(
        epsilon=args.epsilon,
        seed=args.seed,
        adjacency=adjacency,
        mechanism=Mechanism(args.mechanism),
        post_process=PostProcess.ROUND_AND_CLAMP_TO_ZERO if args.post == "roundClamp"
        else PostProcess.NONE,
    )
    period = Period.parse(args.period) if args.period else None
    table = private_release(store, params, args.block_minutes, period)
    write_release(table, params, args.out)
    print(f"wrote {len(table)} cells to {args.out}", file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    host, _, port = args.bind.rpartition(":")
    config = ServiceConfig(
        data_path=args.inp,
        bind_address=args.bind,
        max_candidate_preview=args.max_preview,
        request_timeout_seconds=args.timeout,
    )
    store = _load(args.inp)
    app = create_app(store, config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port),
                timeout_keep_alive=config.request_timeout_seconds)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tapaudit",
                                description="Re-identification risk analytics for tap data")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic population CSV")
    s.add_argument("--config", required=True, help="population config JSON")
    s.add_argument("--out", required=True, help="output CSV path")
    s.add_argument("--seed", type=int, default=None, help="override the config seed")
    s.set_defaults(func=_cmd_synth)

    s = sub.add_parser("ingest", help="validate a CSV and print a summary")
    s.add_argument("--in", dest="inp", required=True, help="CSV file or shard directory")
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_ingest)

    s = sub.add_parser("unicity", help="sampled-set uniqueness report")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--granularity", default="all",
                   help="comma list of exact,zeroSeconds,nearestFiveMinutes,"
                        "zeroMinutes,zeroHour (or 'all')")
    s.add_argument("--n", default="1..5", help="cardinalities, e.g. 1..5 or 1,3,5")
    s.add_argument("--location", default="both", choices=["with", "without", "both"])
    s.add_argument("--kind", default="touchOn", choices=["touchOn", "touchOff", "both"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--period", default=None, help="YYYY-MM-DD:YYYY-MM-DD")
    s.add_argument("--min-events", type=int, default=1,
                   help="drop cards with fewer selected sub-events")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_unicity)

    s = sub.add_parser("cotravel", help="co-traveller list for a card")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--card", type=int, required=True)
    s.add_argument("--window", type=int, default=5)
    s.add_argument("--date", default=None, help="restrict to one date (YYYY-MM-DD)")
    s.add_argument("--period", default=None, help="YYYY-MM-DD:YYYY-MM-DD")
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_cotravel)

    s = sub.add_parser("query", help="evaluate a constraint conjunction")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--constraints", required=True, help="JSON array of constraints")
    s.add_argument("--limit", type=int, default=50, help="preview size")
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_query)

    s = sub.add_parser("audit", help="cardId gap scan / card-type census")
    s.add_argument("mode", choices=["gaps", "types"])
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--min-gap", type=int, default=1)
    s.add_argument("--threshold", type=int, default=1000)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_audit)

    s = sub.add_parser("release", help="privacy-preserving aggregate release")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True, help="CSV path (a .meta.json sidecar is added)")
    s.add_argument("--block-minutes", type=int, default=15)
    s.add_argument("--epsilon", type=float, default=1.0)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--adjacency", choices=["event", "card"], default="event")
    s.add_argument("--max-contribution", type=int, default=1)
    s.add_argument("--mechanism", choices=["geometric", "laplace"], default="geometric")
    s.add_argument("--post", choices=["none", "roundClamp"], default="none")
    s.add_argument("--period", default=None)
    s.set_defaults(func=_cmd_release)

    s = sub.add_parser("serve", help="run the HTTP/JSON service")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--bind", default="127.0.0.1:8321")
    s.add_argument("--max-preview", type=int, default=50)
    s.add_argument("--timeout", type=int, default=60)
    s.set_defaults(func=_cmd_serve)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TapDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
