/**
 * Session state for the narrowing workflow: the active constraint list,
 * the last candidate-set response, and the exportable trace.
 *
 * Invariants: the constraint list always equals the list last sent to the
 * service, and the displayed total always comes from the last response.
 * At most one query is in flight; superseded requests are aborted.
 */

import type { ConstraintJson } from "./constraints.js";
import { isConstraintJson } from "./constraints.js";
import type { QueryResponse, ServiceClient, TimelineResponse, UnicityRow } from "./api.js";

const TRACE_VERSION = 1;

export interface Trace {
  version: number;
  constraints: ConstraintJson[];
}

export class Session {
  private constraintList: ConstraintJson[] = [];
  private last: QueryResponse | null = null;
  private inflight: AbortController | null = null;
  private seq = 0;
  selectedTimeline: TimelineResponse | null = null;
  chartRows: UnicityRow[] | null = null;

  constructor(private readonly client: ServiceClient) {}

  get constraints(): readonly ConstraintJson[] {
    return this.constraintList;
  }

  get lastResponse(): QueryResponse | null {
    return this.last;
  }

  async addConstraint(c: ConstraintJson): Promise<QueryResponse> {
    this.constraintList = [...this.constraintList, c];
    return this.refresh();
  }

  async removeConstraint(index: number): Promise<QueryResponse> {
    this.constraintList = this.constraintList.filter((_, i) => i !== index);
    return this.refresh();
  }

  async clearConstraints(): Promise<QueryResponse> {
    this.constraintList = [];
    return this.refresh();
  }

  /** Re-query with the current constraint list, cancelling any in-flight
   * request; a superseded response never reaches the view. */
  async refresh(): Promise<QueryResponse> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    const mine = ++this.seq;
    const response = await this.client.query(this.constraintList, controller.signal);
    if (mine === this.seq) {
      this.last = response;
      this.inflight = null;
    }
    return response;
  }

  async selectCard(cardId: number): Promise<TimelineResponse> {
    const timeline = await this.client.timeline(cardId);
    this.selectedTimeline = timeline;
    return timeline;
  }

  /** The analyst's reproducible narrowing trace. */
  exportTrace(): string {
    const trace: Trace = { version: TRACE_VERSION, constraints: this.constraintList };
    return JSON.stringify(trace, null, 2);
  }

  /** Replaces the constraint list from an exported trace (call refresh()
   * afterwards to resynchronise the displayed candidate set). */
  importTrace(text: string): void {
    let parsed: unknown;
    try {
      parsed = JSON.parse(text);
    } catch {
      throw new Error("trace is not valid JSON");
    }
    const trace = parsed as Partial<Trace>;
    if (trace.version !== TRACE_VERSION || !Array.isArray(trace.constraints)) {
      throw new Error("trace has an unsupported shape");
    }
    for (const c of trace.constraints) {
      if (!isConstraintJson(c)) {
        throw new Error(`trace holds an invalid constraint: ${JSON.stringify(c)}`);
      }
    }
    this.constraintList = [...trace.constraints];
  }
}
