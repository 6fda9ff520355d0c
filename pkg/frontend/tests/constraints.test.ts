import { describe, expect, it } from "vitest";

import {
  buildConstraint,
  describeConstraint,
  isConstraintJson,
  type ConstraintFormInput,
} from "../src/constraints.js";

function built(input: ConstraintFormInput) {
  const result = buildConstraint(input);
  if (!result.ok) throw new Error(`expected ok, got ${result.errors}`);
  return result.constraint;
}

function failed(input: ConstraintFormInput): string[] {
  const result = buildConstraint(input);
  if (result.ok) throw new Error("expected validation failure");
  return result.errors;
}

describe("grammar-exact emission for every constraint kind", () => {
  it("touchOnBetween", () => {
    expect(built({ kind: "touchOnBetween", date: "2018-05-04",
                   lo: "05:00:00", hi: "07:00:00" }))
      .toEqual({ kind: "touchOnBetween", date: "2018-05-04",
                 lo: "05:00:00", hi: "07:00:00" });
  });

  it("touchOnBetween normalises HH:MM input", () => {
    expect(built({ kind: "touchOnBetween", date: "2018-05-04",
                   lo: "07:00", hi: "08:00" }))
      .toEqual({ kind: "touchOnBetween", date: "2018-05-04",
                 lo: "07:00:00", hi: "08:00:00" });
  });

  it("touchOnAt", () => {
    expect(built({ kind: "touchOnAt", at: "2016-05-03T06:53:22",
                   toleranceSeconds: "30" }))
      .toEqual({ kind: "touchOnAt", at: "2016-05-03T06:53:22",
                 toleranceSeconds: 30 });
  });

  it("touchOnAt defaults tolerance to zero", () => {
    expect(built({ kind: "touchOnAt", at: "2016-05-03T06:53:22" }))
      .toEqual({ kind: "touchOnAt", at: "2016-05-03T06:53:22",
                 toleranceSeconds: 0 });
  });

  it("visitedStop without range omits the range keys", () => {
    expect(built({ kind: "visitedStop", stopId: "19936" }))
      .toEqual({ kind: "visitedStop", stopId: 19936 });
  });

  it("visitedStop with range", () => {
    expect(built({ kind: "visitedStop", stopId: "19936",
                   from: "2016-01-01", to: "2016-12-31" }))
      .toEqual({ kind: "visitedStop", stopId: 19936,
                 from: "2016-01-01", to: "2016-12-31" });
  });

  it("cardTypeIs / cardTypeIsNot", () => {
    expect(built({ kind: "cardTypeIs", type: "51" }))
      .toEqual({ kind: "cardTypeIs", type: 51 });
    expect(built({ kind: "cardTypeIsNot", type: "3" }))
      .toEqual({ kind: "cardTypeIsNot", type: 3 });
  });

  it("seen-bounds kinds", () => {
    for (const kind of ["firstSeenBefore", "firstSeenAfter",
                        "lastSeenBefore", "lastSeenAfter"] as const) {
      expect(built({ kind, date: "2018-05-01" }))
        .toEqual({ kind, date: "2018-05-01" });
    }
  });

  it("minEventCount", () => {
    expect(built({ kind: "minEventCount", k: "12" }))
      .toEqual({ kind: "minEventCount", k: 12 });
  });
});

describe("client-side validation blocks bad input", () => {
  it("reversed time bounds emit nothing", () => {
    const errors = failed({ kind: "touchOnBetween", date: "2018-05-04",
                            lo: "09:00", hi: "05:00" });
    expect(errors.join(" ")).toMatch(/reversed/);
  });

  it("bad date", () => {
    expect(failed({ kind: "touchOnBetween", date: "2018-13-40",
                    lo: "05:00", hi: "07:00" }).length).toBeGreaterThan(0);
    expect(failed({ kind: "firstSeenBefore", date: "yesterday" }).length)
      .toBeGreaterThan(0);
  });

  it("bad timestamp", () => {
    expect(failed({ kind: "touchOnAt", at: "2016-05-03 06:53" }).length)
      .toBeGreaterThan(0);
  });

  it("half-open visited-stop range", () => {
    expect(failed({ kind: "visitedStop", stopId: "5", from: "2016-01-01" })
      .join(" ")).toMatch(/both/);
  });

  it("non-numeric and out-of-range fields", () => {
    expect(failed({ kind: "visitedStop", stopId: "central" }).length)
      .toBeGreaterThan(0);
    expect(failed({ kind: "cardTypeIs", type: "200" }).join(" "))
      .toMatch(/<= 127/);
    expect(failed({ kind: "touchOnAt", at: "2016-05-03T06:53:22",
                    toleranceSeconds: "-1" }).join(" ")).toMatch(/>= 0/);
  });

  it("unknown kind", () => {
    expect(failed({ kind: "regex" }).join(" ")).toMatch(/unknown/);
  });
});

describe("trace-import structural check", () => {
  it("accepts every built constraint", () => {
    const inputs: ConstraintFormInput[] = [
      { kind: "touchOnBetween", date: "2018-05-04", lo: "05:00", hi: "07:00" },
      { kind: "touchOnAt", at: "2016-05-03T06:53:22" },
      { kind: "visitedStop", stopId: "19936" },
      { kind: "cardTypeIs", type: "51" },
      { kind: "cardTypeIsNot", type: "3" },
      { kind: "firstSeenBefore", date: "2018-05-01" },
      { kind: "minEventCount", k: "2" },
    ];
    for (const input of inputs) {
      expect(isConstraintJson(built(input))).toBe(true);
    }
  });

  it("rejects foreign shapes", () => {
    expect(isConstraintJson({ kind: "visitedStop", stopId: "19936" })).toBe(false);
    expect(isConstraintJson({ kind: "drop table" })).toBe(false);
    expect(isConstraintJson(null)).toBe(false);
  });
});

it("describeConstraint covers every kind", () => {
  expect(describeConstraint({ kind: "cardTypeIsNot", type: 3 }))
    .toContain("3");
  expect(describeConstraint({ kind: "touchOnBetween", date: "2018-05-04",
                              lo: "05:00:00", hi: "07:00:00" }))
    .toContain("2018-05-04");
});
