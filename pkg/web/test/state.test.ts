import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  checkEditPayload, filtersFromHash, filtersToHash, pollDocument,
  reviewOptimistically, validateFilters,
} from "../src/state.js";
import type { JobView, ModelRecord } from "../src/types.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status, headers: { "Content-Type": "application/json" },
  });
}

const record: ModelRecord = {
  record_id: "r1",
  doc_id: "d1",
  equation_latex: "\\sigma = E \\epsilon",
  symbol_map: [
    { symbol: "\\sigma", definition: "stress", unit: "Pa" },
    { symbol: "E", definition: "modulus", unit: "Pa" },
    { symbol: "\\epsilon", definition: "strain", unit: "dimensionless" },
  ],
  material: { material_name: "Sandstone", material_class: "stone",
              provenance_note: "", test_conditions: "" },
  parameters: [{ symbol: "E", value_raw: 30, scale_notation: null,
                 unit_raw: "GPa", value_si: 3e10, unit_si: "Pa",
                 provenance: "Table 1", resolution_flag: "as_printed" }],
  validation: { method: "uniaxial compression", present: true },
  mechanism: "elasticity",
  confidence: 0.9,
  review_status: "unverified",
  version: 1,
};

describe("validateFilters", () => {
  it("accepts a sane filter", () => {
    expect(validateFilters({ mechanism: "elasticity", param: "E",
                             min: "1e9", max: "1e11" })).toEqual([]);
  });

  it("rejects min greater than max without issuing a request", () => {
    const problems = validateFilters({ param: "E", min: "10", max: "1" });
    expect(problems.join(" ")).toContain("min must not exceed max");
  });

  it("rejects bounds without a parameter symbol", () => {
    expect(validateFilters({ min: "1" }).join(" "))
      .toContain("parameter ranges need a symbol");
  });

  it("rejects unknown enums", () => {
    expect(validateFilters({ mechanism: "levitation" }).length).toBe(1);
    expect(validateFilters({ material_class: "unobtainium" }).length).toBe(1);
  });
});

describe("checkEditPayload", () => {
  it("accepts the unchanged record", () => {
    expect(checkEditPayload(record)).toEqual([]);
  });

  it("blocks empty equations and unbalanced braces", () => {
    expect(checkEditPayload({ ...record, equation_latex: " " }).length)
      .toBeGreaterThan(0);
    expect(checkEditPayload({ ...record, equation_latex: "\\frac{a}{b" })
      .join(" ")).toContain("unbalanced");
  });

  it("blocks parameters whose symbol is not in the map", () => {
    const bad = { ...record, parameters: [
      { ...record.parameters[0], symbol: "zz" }] };
    expect(checkEditPayload(bad).join(" ")).toContain("not in the symbol map");
  });

  it("blocks duplicate symbols and inconsistent validation", () => {
    const dup = { ...record, symbol_map: [...record.symbol_map,
      { symbol: "E", definition: "again", unit: "Pa" }] };
    expect(checkEditPayload(dup).join(" ")).toContain("duplicate symbol");
    const inconsistent = { ...record,
      validation: { method: "", present: true } };
    expect(checkEditPayload(inconsistent).join(" "))
      .toContain("validation.present");
  });
});

describe("pollDocument", () => {
  it("polls until the job settles and reports every view", async () => {
    const states = ["queued", "parsed", "screening", "extracting",
                    "needs_review"];
    let call = 0;
    const fetchImpl = async (): Promise<Response> => {
      const state = states[Math.min(call, states.length - 1)];
      call += 1;
      return jsonResponse(200, { doc_id: "d1", state, timestamps: {},
                                 error: null, verdict: null, records: [] });
    };
    const client = new ApiClient("", "", fetchImpl);
    const seen: string[] = [];
    const final = await pollDocument(client, "d1",
      (view: JobView) => seen.push(view.state),
      { sleep: async () => undefined });
    expect(final.state).toBe("needs_review");
    expect(seen).toEqual(states);
  });
});

describe("reviewOptimistically", () => {
  it("returns the server record on success", async () => {
    const fetchImpl = async (): Promise<Response> =>
      jsonResponse(200, { ...record, review_status: "verified", version: 2 });
    const client = new ApiClient("", "", fetchImpl);
    const outcome = await reviewOptimistically(client, record, "verify");
    expect(outcome.conflicted).toBe(false);
    expect(outcome.record.review_status).toBe("verified");
  });

  it("rolls back to the previous record on a 409", async () => {
    const fetchImpl = async (): Promise<Response> =>
      jsonResponse(409, { code: "version_conflict", message: "stale" });
    const client = new ApiClient("", "", fetchImpl);
    const outcome = await reviewOptimistically(client, record, "reject");
    expect(outcome.conflicted).toBe(true);
    expect(outcome.record).toBe(record);
    expect(outcome.message).toContain("reload");
  });
});

describe("filters round-trip through the URL hash", () => {
  it("keeps every populated field across refresh", () => {
    const filters = { mechanism: "failure_damage", q: "brick", param: "E",
                      min: "1e9", max: "1e11" };
    expect(filtersFromHash(filtersToHash(filters))).toEqual(filters);
  });

  it("empty filters produce the bare search route", () => {
    expect(filtersToHash({})).toBe("#/search");
    expect(filtersFromHash("#/search")).toEqual({});
  });
});
