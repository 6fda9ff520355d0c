/**
 * Thin client over the analytics service. The UI computes nothing itself:
 * every displayed number comes back from one of these calls.
 */

import type { ConstraintJson } from "./constraints.js";

export interface CandidateRow {
  cardId: number;
  cardType: number;
  firstSeen: string;
  lastSeen: string;
  eventCount: number;
}

export interface QueryResponse {
  total: number;
  preview: CandidateRow[];
}

export interface TimelineEvent {
  onTime: string;
  onMode: number;
  onRouteId: number;
  onStopId: number;
  cardType: number;
  offTime?: string;
  offMode?: number;
  offRouteId?: number;
  offStopId?: number;
}

export interface TimelineResponse {
  cardId: number;
  firstSeen: string;
  lastSeen: string;
  events: TimelineEvent[];
}

export interface CoTravellerRow {
  otherCardId: number;
  otherCardType: number;
  occurrences: number;
  pairs: { ownTime: string; otherTime: string; stopId: number }[];
}

export interface UnicityJobRequest {
  granularities: string[];
  locations: boolean[];
  cardinalities: number[];
  kind?: string;
  seed?: number;
  period?: { start: string; end: string };
  minEvents?: number;
}

export interface UnicityRow {
  granularity: string;
  location: string;
  n: number;
  cardsConsidered: number;
  cardsUnique: number;
  percentUnique: number;
}

export interface ServiceClient {
  query(constraints: ConstraintJson[], signal?: AbortSignal): Promise<QueryResponse>;
  timeline(cardId: number): Promise<TimelineResponse>;
  cotravellers(cardId: number, window?: number, date?: string): Promise<CoTravellerRow[]>;
  startUnicity(params: UnicityJobRequest): Promise<string>;
  jobStatus(jobId: string): Promise<{ status: string; report?: UnicityRow[]; error?: string }>;
}

export class ServiceError extends Error {
  constructor(message: string, readonly code: string, readonly status: number) {
    super(message);
    this.name = "ServiceError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient implements ServiceClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ServiceError(
        typeof body.error === "string" ? body.error : `HTTP ${resp.status}`,
        typeof body.code === "string" ? body.code : "unknown",
        resp.status,
      );
    }
    return body as T;
  }

  query(constraints: ConstraintJson[], signal?: AbortSignal): Promise<QueryResponse> {
    return this.request<QueryResponse>("/query", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ constraints }),
      signal,
    });
  }

  timeline(cardId: number): Promise<TimelineResponse> {
    return this.request<TimelineResponse>(`/cards/${cardId}/timeline`);
  }

  async cotravellers(cardId: number, window = 5, date?: string): Promise<CoTravellerRow[]> {
    const params = new URLSearchParams({ window: String(window) });
    if (date) params.set("date", date);
    const body = await this.request<{ cotravellers: CoTravellerRow[] }>(
      `/cards/${cardId}/cotravellers?${params}`);
    return body.cotravellers;
  }

  async startUnicity(params: UnicityJobRequest): Promise<string> {
    const body = await this.request<{ jobId: string }>("/unicity", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(params),
    });
    return body.jobId;
  }

  jobStatus(jobId: string): Promise<{ status: string; report?: UnicityRow[]; error?: string }> {
    return this.request(`/jobs/${jobId}`);
  }
}
