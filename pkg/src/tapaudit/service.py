"""HTTP/JSON service over a store loaded at startup.

Read-only: the service audits a fixed release, so there are no mutation
endpoints.  Analytic responses are pure functions of the loaded store and
the request body; long unicity sweeps run asynchronously behind a job id.
"""

from __future__ import annotations

import itertools
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from typing import Dict, Optional

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .core import EventKind, Period, TimeGranularity, UnknownCard, from_epoch_seconds
from .cotravel import cotravel_on_date, cotravellers
from .ingest import EventStore
from .query import card_timeline, card_type_census, constraint_from_json, evaluate, id_gap_scan
from .release import (
    CardLevel,
    EventLevel,
    Mechanism,
    PostProcess,
    PrivacyParams,
    private_release,
)
from .unicity import UnicityParams, run_unicity


@dataclass(frozen=True)
class ServiceConfig:
    data_path: str
    bind_address: str = "127.0.0.1:8321"
    max_candidate_preview: int = 50
    request_timeout_seconds: int = 60

    def __post_init__(self):
        if self.max_candidate_preview < 1:
            raise ValueError("maxCandidatePreview must be >= 1")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _card_summary(store: EventStore, card_id: int) -> dict:
    import numpy as np

    i = int(np.searchsorted(store.cards(), card_id))
    return {
        "cardId": card_id,
        "cardType": int(store.card_modal_types()[i]),
        "firstSeen": from_epoch_seconds(int(store.card_first_seen()[i])).isoformat(),
        "lastSeen": from_epoch_seconds(int(store.card_last_seen()[i])).isoformat(),
        "eventCount": int(store.card_event_counts()[i]),
    }


def _event_json(ev) -> dict:
    out = {
        "onTime": ev.on_time.isoformat(),
        "onMode": ev.on_mode,
        "onRouteId": ev.on_route_id,
        "onStopId": ev.on_stop_id,
        "cardType": ev.card_type,
    }
    if ev.has_off:
        out.update({
            "offTime": ev.off_time.isoformat(),
            "offMode": ev.off_mode,
            "offRouteId": ev.off_route_id,
            "offStopId": ev.off_stop_id,
        })
    return out


def _parse_period(data) -> Optional[Period]:
    if data is None:
        return None
    try:
        return Period(date.fromisoformat(data["start"]), date.fromisoformat(data["end"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ApiError(400, "bad_request", f"bad period: {exc}")


def create_app(store: EventStore, config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="tapaudit", version="0.1.0")
    # local analyst instrument: let a separately-served UI talk to it
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    jobs: Dict[str, dict] = {}
    jobs_lock = threading.Lock()
    job_ids = itertools.count(1)
    executor = ThreadPoolExecutor(max_workers=2)

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"error": exc.message, "code": exc.code})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": str(exc), "code": "bad_request"})

    @app.post("/query")
    async def query(body: dict):
        raw = body.get("constraints")
        if not isinstance(raw, list):
            raise ApiError(400, "bad_request", "body must carry a 'constraints' array")
        try:
            constraints = [constraint_from_json(c) for c in raw]
        except ValueError as exc:
            raise ApiError(400, "bad_constraint", str(exc))
        result = evaluate(store, constraints)
        cards = sorted(result.card_ids)
        preview = [_card_summary(store, cid)
                   for cid in cards[: config.max_candidate_preview]]
        return {"total": len(result), "preview": preview}

    @app.get("/cards/{card_id}/timeline")
    async def timeline(card_id: int):
        try:
            tl = card_timeline(store, card_id)
        except UnknownCard as exc:
            raise ApiError(404, "unknown_card", str(exc))
        return {
            "cardId": tl.card_id,
            "firstSeen": tl.first_seen.isoformat(),
            "lastSeen": tl.last_seen.isoformat(),
            "events": [_event_json(e) for e in tl.events],
        }

    @app.get("/cards/{card_id}/cotravellers")
    async def cotravel(card_id: int, window: int = 5,
                       day: Optional[str] = Query(None, alias="date"),
                       limit: Optional[int] = None):
        try:
            if day is not None:
                matches = cotravel_on_date(store, card_id, date.fromisoformat(day), window)
            else:
                matches = cotravellers(store, card_id, window)
        except UnknownCard as exc:
            raise ApiError(404, "unknown_card", str(exc))
        except ValueError as exc:
            raise ApiError(400, "bad_request", str(exc))
        if limit is not None:
            matches = matches[:limit]
        return {"cardId": card_id, "cotravellers": [
            {
                "otherCardId": m.other_card_id,
                "otherCardType": m.other_card_type,
                "occurrences": m.occurrences,
                "pairs": [{"ownTime": p.own_time.isoformat(),
                           "otherTime": p.other_time.isoformat(),
                           "stopId": p.stop_id} for p in m.event_pairs],
            } for m in matches
        ]}

    @app.post("/unicity")
    async def unicity_job(body: dict):
        try:
            params = UnicityParams(
                granularities=tuple(TimeGranularity.from_string(g)
                                    for g in body.get("granularities", ["exact"])),
                location_flags=tuple(bool(b) for b in body.get("locations", [True, False])),
                cardinalities=tuple(int(n) for n in body.get("cardinalities", [1, 2, 3, 4, 5])),
                kind=EventKind.from_string(body.get("kind", "touchOn")),
                seed=int(body.get("seed", 0)),
                period=_parse_period(body.get("period")),
                min_events=int(body.get("minEvents", 1)),
            )
        except ValueError as exc:
            raise ApiError(400, "bad_request", str(exc))
        job_id = f"job-{next(job_ids)}"
        with jobs_lock:
            jobs[job_id] = {"status": "running"}

        def run():
            try:
                report = run_unicity(store, params)
                rows = [{
                    "granularity": g.value,
                    "location": "with" if loc else "without",
                    "n": n,
                    "cardsConsidered": cell.cards_considered,
                    "cardsUnique": cell.cards_unique,
                    "percentUnique": cell.percent_unique,
                } for g, loc, n, cell in report.rows()]
                with jobs_lock:
                    jobs[job_id] = {"status": "done", "report": rows}
            except Exception as exc:  # surfaced through the job status
                with jobs_lock:
                    jobs[job_id] = {"status": "error", "error": str(exc)}

        executor.submit(run)
        return {"jobId": job_id}

    @app.get("/jobs/{job_id}")
    async def job_status(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
        if job is None:
            raise ApiError(404, "unknown_job", f"no job {job_id}")
        return dict(job, jobId=job_id)

    @app.get("/audit/gaps")
    async def audit_gaps(minGap: int = 1):
        try:
            gaps = id_gap_scan(store, minGap)
        except ValueError as exc:
            raise ApiError(400, "bad_request", str(exc))
        return {"gaps": [{"lastUsedId": g.last_used_id,
                          "nextUsedId": g.next_used_id,
                          "missingCount": g.missing_count} for g in gaps]}

    @app.get("/audit/types")
    async def audit_types(threshold: int = 1000):
        census = card_type_census(store, threshold)
        return {"types": [{
            "cardType": e.type_code,
            "cardCount": e.card_count,
            "eventCount": e.event_count,
            "sensitive": e.sensitive,
        } for _, e in sorted(census.items())]}

    @app.post("/release/aggregate")
    async def release_aggregate(body: dict):
        try:
            adjacency_raw = body.get("adjacency", {"level": "event"})
            if adjacency_raw.get("level") == "card":
                adjacency = CardLevel(int(adjacency_raw.get("maxContribution", 1)))
            else:
                adjacency = EventLevel()
            params = PrivacyParams(
                epsilon=float(body.get("epsilon", 1.0)),
                seed=int(body.get("seed", 0)),
                adjacency=adjacency,
                mechanism=Mechanism(body.get("mechanism", "geometric")),
                post_process=PostProcess(body.get("postProcess", "none")),
            )
            block_minutes = int(body.get("blockMinutes", 15))
            period = _parse_period(body.get("period"))
            table = private_release(store, params, block_minutes, period)
        except ApiError:
            raise
        except Exception as exc:
            raise ApiError(400, "bad_request", str(exc))
        limit = body.get("limit")
        rows = []
        for i, (stop, block, direction, value) in enumerate(table.cells()):
            if limit is not None and i >= int(limit):
                break
            rows.append({"stopId": stop, "blockStart": block.isoformat(),
                         "direction": direction, "count": value})
        return {"meta": dict(params.public_metadata(), blockMinutes=table.block_minutes),
                "cells": len(table), "rows": rows}

    return app
