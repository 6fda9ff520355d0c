/**
 * Constraint builder: validated form input -> the service's exact JSON
 * constraint grammar. Nothing is sent while any field is invalid.
 */

export type ConstraintJson =
  | { kind: "touchOnBetween"; date: string; lo: string; hi: string }
  | { kind: "touchOnAt"; at: string; toleranceSeconds: number }
  | { kind: "visitedStop"; stopId: number; from?: string; to?: string }
  | { kind: "cardTypeIs"; type: number }
  | { kind: "cardTypeIsNot"; type: number }
  | { kind: "firstSeenBefore"; date: string }
  | { kind: "firstSeenAfter"; date: string }
  | { kind: "lastSeenBefore"; date: string }
  | { kind: "lastSeenAfter"; date: string }
  | { kind: "minEventCount"; k: number };

export const CONSTRAINT_KINDS = [
  "touchOnBetween",
  "touchOnAt",
  "visitedStop",
  "cardTypeIs",
  "cardTypeIsNot",
  "firstSeenBefore",
  "firstSeenAfter",
  "lastSeenBefore",
  "lastSeenAfter",
  "minEventCount",
] as const;

export type ConstraintKind = (typeof CONSTRAINT_KINDS)[number];

/** Raw strings exactly as they come out of the form fields. */
export interface ConstraintFormInput {
  kind: string;
  date?: string;
  lo?: string;
  hi?: string;
  at?: string;
  toleranceSeconds?: string;
  stopId?: string;
  from?: string;
  to?: string;
  type?: string;
  k?: string;
}

export type BuildResult =
  | { ok: true; constraint: ConstraintJson }
  | { ok: false; errors: string[] };

const DATE_RE = /^\d{4}-\d{2}-\d{2}$/;
const TIME_RE = /^([01]\d|2[0-3]):[0-5]\d(:[0-5]\d)?$/;
const DATETIME_RE = /^\d{4}-\d{2}-\d{2}T([01]\d|2[0-3]):[0-5]\d:[0-5]\d$/;

function isDate(s: string): boolean {
  if (!DATE_RE.test(s)) return false;
  const parsed = new Date(`${s}T00:00:00Z`);
  return !Number.isNaN(parsed.getTime()) && parsed.toISOString().slice(0, 10) === s;
}

/** Accepts HH:MM or HH:MM:SS; returns the canonical HH:MM:SS form. */
function normaliseTime(s: string): string | null {
  if (!TIME_RE.test(s)) return null;
  return s.length === 5 ? `${s}:00` : s;
}

function parseIntField(s: string | undefined, name: string, min: number,
                       errors: string[], max?: number): number {
  if (s === undefined || s.trim() === "" || !/^-?\d+$/.test(s.trim())) {
    errors.push(`${name} must be an integer`);
    return NaN;
  }
  const v = parseInt(s, 10);
  if (v < min) errors.push(`${name} must be >= ${min}`);
  if (max !== undefined && v > max) errors.push(`${name} must be <= ${max}`);
  return v;
}

function requireDate(s: string | undefined, name: string, errors: string[]): string {
  if (!s || !isDate(s)) {
    errors.push(`${name} must be a YYYY-MM-DD date`);
    return "";
  }
  return s;
}

export function buildConstraint(input: ConstraintFormInput): BuildResult {
  const errors: string[] = [];
  const kind = input.kind as ConstraintKind;

  switch (kind) {
    case "touchOnBetween": {
      const date = requireDate(input.date, "date", errors);
      const lo = input.lo ? normaliseTime(input.lo) : null;
      const hi = input.hi ? normaliseTime(input.hi) : null;
      if (lo === null) errors.push("lo must be a HH:MM[:SS] time");
      if (hi === null) errors.push("hi must be a HH:MM[:SS] time");
      if (lo !== null && hi !== null && lo > hi) {
        errors.push("time window bounds are reversed");
      }
      if (errors.length) return { ok: false, errors };
      return { ok: true, constraint: { kind, date, lo: lo!, hi: hi! } };
    }
    case "touchOnAt": {
      const at = input.at ?? "";
      if (!DATETIME_RE.test(at)) {
        errors.push("at must be a YYYY-MM-DDTHH:MM:SS timestamp");
      }
      const tolerance = input.toleranceSeconds === undefined || input.toleranceSeconds === ""
        ? 0
        : parseIntField(input.toleranceSeconds, "toleranceSeconds", 0, errors);
      if (errors.length) return { ok: false, errors };
      return { ok: true, constraint: { kind, at, toleranceSeconds: tolerance } };
    }
    case "visitedStop": {
      const stopId = parseIntField(input.stopId, "stopId", 1, errors);
      const hasFrom = !!input.from;
      const hasTo = !!input.to;
      if (hasFrom !== hasTo) {
        errors.push("date range needs both from and to");
      }
      let from: string | undefined;
      let to: string | undefined;
      if (hasFrom && hasTo) {
        from = requireDate(input.from, "from", errors);
        to = requireDate(input.to, "to", errors);
        if (from && to && from > to) errors.push("date range bounds are reversed");
      }
      if (errors.length) return { ok: false, errors };
      return {
        ok: true,
        constraint: from !== undefined
          ? { kind, stopId, from, to: to! }
          : { kind, stopId },
      };
    }
    case "cardTypeIs":
    case "cardTypeIsNot": {
      const type = parseIntField(input.type, "type", 0, errors, 127);
      if (errors.length) return { ok: false, errors };
      return { ok: true, constraint: { kind, type } };
    }
    case "firstSeenBefore":
    case "firstSeenAfter":
    case "lastSeenBefore":
    case "lastSeenAfter": {
      const date = requireDate(input.date, "date", errors);
      if (errors.length) return { ok: false, errors };
      return { ok: true, constraint: { kind, date } };
    }
    case "minEventCount": {
      const k = parseIntField(input.k, "k", 0, errors);
      if (errors.length) return { ok: false, errors };
      return { ok: true, constraint: { kind, k } };
    }
    default:
      return { ok: false, errors: [`unknown constraint kind: ${input.kind}`] };
  }
}

/** Structural check used when importing a saved narrowing trace. */
export function isConstraintJson(value: unknown): value is ConstraintJson {
  if (typeof value !== "object" || value === null) return false;
  const c = value as Record<string, unknown>;
  switch (c.kind) {
    case "touchOnBetween":
      return typeof c.date === "string" && typeof c.lo === "string"
        && typeof c.hi === "string";
    case "touchOnAt":
      return typeof c.at === "string" && typeof c.toleranceSeconds === "number";
    case "visitedStop":
      return typeof c.stopId === "number"
        && (c.from === undefined) === (c.to === undefined);
    case "cardTypeIs":
    case "cardTypeIsNot":
      return typeof c.type === "number";
    case "firstSeenBefore":
    case "firstSeenAfter":
    case "lastSeenBefore":
    case "lastSeenAfter":
      return typeof c.date === "string";
    case "minEventCount":
      return typeof c.k === "number";
    default:
      return false;
  }
}

export function describeConstraint(c: ConstraintJson): string {
  switch (c.kind) {
    case "touchOnBetween":
      return `touch-on ${c.date} ${c.lo}–${c.hi}`;
    case "touchOnAt":
      return `touch-on at ${c.at} ±${c.toleranceSeconds}s`;
    case "visitedStop":
      return c.from ? `visited stop ${c.stopId} (${c.from}–${c.to})`
        : `visited stop ${c.stopId}`;
    case "cardTypeIs":
      return `card type = ${c.type}`;
    case "cardTypeIsNot":
      return `card type ≠ ${c.type}`;
    case "firstSeenBefore":
      return `first seen before ${c.date}`;
    case "firstSeenAfter":
      return `first seen after ${c.date}`;
    case "lastSeenBefore":
      return `last seen before ${c.date}`;
    case "lastSeenAfter":
      return `last seen after ${c.date}`;
    case "minEventCount":
      return `at least ${c.k} events`;
  }
}
