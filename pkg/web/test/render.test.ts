import { describe, expect, it } from "vitest";

import { renderHistogram, renderJobView, renderRecordCard,
         renderSearchResults } from "../src/render.js";
import type { JobView, ModelRecord } from "../src/types.js";

const record: ModelRecord = {
  record_id: "r1",
  doc_id: "d1",
  equation_latex: "\\sigma + \\lambda_1 \\frac{d\\sigma}{dt} = " +
    "\\eta_\\infty \\dot{\\gamma}",
  symbol_map: [
    { symbol: "\\sigma", definition: "shear stress", unit: "Pa" },
    { symbol: "\\lambda_1", definition: "relaxation time", unit: "s" },
    { symbol: "\\eta_\\infty",
      definition: "high-shear viscosity of the aqueous suspension",
      unit: "Pa·s" },
    { symbol: "\\dot{\\gamma}", definition: "shear rate", unit: "s^-1" },
  ],
  material: { material_name: "Kaolinite clay suspension",
              material_class: "clay_suspension",
              provenance_note: "", test_conditions: "aqueous, 25 C" },
  parameters: [
    { symbol: "\\eta_\\infty", value_raw: 2.33, scale_notation: "×10^3",
      unit_raw: "Pa·s", value_si: 0.00233, unit_si: "Pa·s",
      provenance: "Table I", resolution_flag: "scale_resolved" },
    { symbol: "\\lambda_1", value_raw: 7, scale_notation: "×10^2",
      unit_raw: "s", value_si: 700, unit_si: "s",
      provenance: "Table I", resolution_flag: "ambiguous" },
  ],
  validation: { method: "rotational rheometry", present: true },
  mechanism: "viscoelasticity",
  confidence: 0.88,
  review_status: "unverified",
  version: 1,
  grounding: { grounded: true, ungrounded_symbols: [], orphan_bindings: [],
               duplicate_definitions: [] },
};

describe("renderRecordCard", () => {
  const html = renderRecordCard(record);

  it("renders the equation, not raw LaTeX", () => {
    expect(html).toContain('class="math"');
    expect(html).toContain("η");
    expect(html).toContain("∞");
  });

  it("shows raw and SI parameter values with resolution flags", () => {
    expect(html).toContain("2.33");
    expect(html).toContain("0.00233");
    expect(html).toContain("scale_resolved");
  });

  it("flags ambiguous-scale parameters visually", () => {
    expect(html).toContain("flag-ambiguous");
    expect(html).toContain("param-ambiguous");
  });

  it("shows the grounding verdict and review actions", () => {
    expect(html).toContain("grounding: complete bijection");
    for (const action of ["verify", "reject", "edit"]) {
      expect(html).toContain(`data-action="${action}"`);
    }
  });

  it("carries record id and version for optimistic concurrency", () => {
    expect(html).toContain('data-record-id="r1"');
    expect(html).toContain('data-version="1"');
  });
});

describe("renderJobView", () => {
  it("shows a progress indicator without records while extracting", () => {
    const view: JobView = { doc_id: "d1", state: "extracting",
                            timestamps: { queued: "t", parsed: "t" },
                            error: null, verdict: null, records: [] };
    const html = renderJobView(view);
    expect(html).toContain("processing");
    expect(html).not.toContain("article");
  });

  it("renders records and verdict once settled", () => {
    const view: JobView = {
      doc_id: "d1", state: "needs_review",
      timestamps: { queued: "t", parsed: "t", screening: "t", extracting: "t" },
      error: null,
      verdict: { domain_relevance: true, theoretical_content: true,
                 experimental_validation: true, relevant: true,
                 rationale: "", score: 1 },
      records: [record],
    };
    const html = renderJobView(view);
    expect(html).toContain("1 extracted record(s)");
    expect(html).toContain("chip-needs_review");
    expect(html).toContain("gate:");
  });

  it("surfaces failures", () => {
    const view: JobView = { doc_id: "d1", state: "failed", timestamps: {},
                            error: "parse: no text layer", verdict: null,
                            records: [] };
    expect(renderJobView(view)).toContain("parse: no text layer");
  });
});

describe("renderSearchResults", () => {
  it("shows an empty state", () => {
    const html = renderSearchResults({ records: [], total: 0, page: 1,
                                       page_size: 50 });
    expect(html).toContain("no records match");
  });

  it("lists material, mechanism, status and parameter summary", () => {
    const html = renderSearchResults({ records: [record], total: 1, page: 1,
                                       page_size: 50 });
    expect(html).toContain("Kaolinite clay suspension");
    expect(html).toContain("viscoelasticity");
    expect(html).toContain("chip-unverified");
    expect(html).toContain("0.00233");
  });
});

describe("renderHistogram", () => {
  it("renders proportional bars with counts and percentages", () => {
    const html = renderHistogram({
      buckets: [
        { mechanism: "elasto_plasticity", count: 59, percentage: 31.9 },
        { mechanism: "failure_damage", count: 46, percentage: 24.9 },
      ],
      total: 185,
    });
    expect(html).toContain("elasto_plasticity");
    expect(html).toContain("59 (31.9%)");
    expect(html).toContain("width:100.0%");
    expect(html).toContain("185 records");
  });

  it("renders an empty state for a fresh database", () => {
    expect(renderHistogram({ buckets: [], total: 0 })).toContain("no records yet");
  });
});
