// Pure HTML renderers: every view is a function of API responses, so the
// same functions serve the browser and the node test suite.

import { escapeHtml, renderLatex } from "./latex.js";
import type {
  GroundingReport, JobView, MechanismHistogram, ModelPage, ModelRecord,
} from "./types.js";

const esc = escapeHtml;

export function statusChip(status: string): string {
  return `<span class="chip chip-${esc(status)}">${esc(status)}</span>`;
}

export function renderGrounding(report: GroundingReport | undefined): string {
  if (!report) return "";
  if (report.grounded) {
    return `<p class="grounding ok">grounding: complete bijection</p>`;
  }
  const parts: string[] = [];
  if (report.ungrounded_symbols.length) {
    parts.push(`missing: ${report.ungrounded_symbols.map(esc).join(", ")}`);
  }
  if (report.orphan_bindings.length) {
    parts.push(`orphans: ${report.orphan_bindings.map(esc).join(", ")}`);
  }
  if (report.duplicate_definitions.length) {
    parts.push(`duplicate meanings: ${report.duplicate_definitions.map(esc).join(", ")}`);
  }
  return `<p class="grounding bad">grounding: ${parts.join("; ")}</p>`;
}

export function renderRecordCard(record: ModelRecord): string {
  const symbols = record.symbol_map.map((b) =>
    `<tr><td class="sym">${renderLatex(b.symbol)}</td>` +
    `<td>${esc(b.definition)}</td><td>${esc(b.unit)}</td></tr>`).join("");
  const params = record.parameters.map((p) => {
    const flag = p.resolution_flag === "ambiguous"
      ? ` <span class="flag flag-ambiguous" title="scale could not be resolved; needs review">ambiguous</span>`
      : p.resolution_flag === "scale_resolved"
        ? ` <span class="flag flag-resolved" title="scaled header resolved by plausibility band">scale_resolved</span>`
        : "";
    const scale = p.scale_notation ? ` <span class="scale">${esc(p.scale_notation)}</span>` : "";
    return `<tr class="${p.resolution_flag === "ambiguous" ? "param-ambiguous" : ""}">` +
      `<td class="sym">${renderLatex(p.symbol)}</td>` +
      `<td>${p.value_raw}${scale} ${esc(p.unit_raw)}</td>` +
      `<td>${p.value_si} ${esc(p.unit_si)}${flag}</td>` +
      `<td>${esc(p.provenance)}</td></tr>`;
  }).join("");
  const validation = record.validation.present
    ? esc(record.validation.method) : "<em>none stated</em>";
  return `
<article class="record" data-record-id="${esc(record.record_id)}"
         data-version="${record.version}">
  <header>
    <div class="equation">${renderLatex(record.equation_latex)}</div>
    ${statusChip(record.review_status)}
  </header>
  <p class="meta">
    <strong>${esc(record.material.material_name)}</strong>
    (${esc(record.material.material_class)}) ·
    mechanism: ${esc(record.mechanism)} ·
    confidence ${record.confidence.toFixed(2)} · v${record.version}
  </p>
  ${renderGrounding(record.grounding)}
  <h4>symbols</h4>
  <table class="symbols"><tbody>${symbols}</tbody></table>
  <h4>parameters</h4>
  <table class="params">
    <thead><tr><th>symbol</th><th>printed</th><th>SI</th><th>source</th></tr></thead>
    <tbody>${params || `<tr><td colspan="4"><em>none</em></td></tr>`}</tbody>
  </table>
  <p class="validation">validation: ${validation}</p>
  <footer class="actions">
    <button data-action="verify">verify</button>
    <button data-action="reject">reject</button>
    <button data-action="edit">edit</button>
    <span class="action-note"></span>
  </footer>
</article>`;
}

export function renderJobView(view: JobView): string {
  const steps = ["queued", "parsed", "screening", "extracting"];
  const progress = steps
    .map((s) => `<li class="${view.timestamps[s] ? "done" : ""}">${s}</li>`)
    .join("");
  const error = view.error
    ? `<p class="error">error: ${esc(view.error)}</p>` : "";
  const verdict = view.verdict
    ? `<p class="verdict">gate: relevance=${view.verdict.domain_relevance} ` +
      `theory=${view.verdict.theoretical_content} ` +
      `experiments=${view.verdict.experimental_validation} ` +
      `score=${view.verdict.score.toFixed(2)}</p>`
    : "";
  const busy = !["needs_review", "verified", "rejected", "failed"]
    .includes(view.state);
  const records = view.records.map(renderRecordCard).join("\n");
  return `
<section class="job" data-doc-id="${esc(view.doc_id)}">
  <h2>document ${esc(view.doc_id)} ${statusChip(view.state)}</h2>
  <ol class="progress">${progress}</ol>
  ${busy ? `<p class="spinner">processing…</p>` : ""}
  ${error}${verdict}
  ${view.records.length
    ? `<h3>${view.records.length} extracted record(s)</h3>${records}`
    : busy ? "" : "<p><em>no records extracted</em></p>"}
</section>`;
}

export function renderSearchResults(page: ModelPage): string {
  if (page.total === 0) {
    return `<p class="empty">no records match — the database may be empty ` +
      `or the filters too narrow</p>`;
  }
  const rows = page.records.map((r) => {
    const summary = r.parameters
      .map((p) => `${p.symbol}=${p.value_si} ${p.unit_si}`)
      .slice(0, 3).join(", ");
    return `<tr data-record-id="${esc(r.record_id)}">
      <td>${renderLatex(r.equation_latex)}</td>
      <td>${esc(r.material.material_name)}</td>
      <td>${esc(r.mechanism)}</td>
      <td>${statusChip(r.review_status)}</td>
      <td class="params-summary">${esc(summary)}</td>
    </tr>`;
  }).join("");
  const pages = Math.max(1, Math.ceil(page.total / page.page_size));
  return `
<p class="count">${page.total} record(s), page ${page.page}/${pages}</p>
<table class="results">
  <thead><tr><th>equation</th><th>material</th><th>mechanism</th>
  <th>status</th><th>parameters</th></tr></thead>
  <tbody>${rows}</tbody>
</table>`;
}

export function renderHistogram(histogram: MechanismHistogram): string {
  if (histogram.total === 0) {
    return `<p class="empty">no records yet</p>`;
  }
  const maxCount = Math.max(...histogram.buckets.map((b) => b.count));
  const bars = histogram.buckets.map((b) =>
    `<div class="bar-row">
      <span class="bar-label">${esc(b.mechanism)}</span>
      <span class="bar" style="width:${(100 * b.count / maxCount).toFixed(1)}%"></span>
      <span class="bar-value">${b.count} (${b.percentage}%)</span>
    </div>`).join("");
  return `<div class="histogram">${bars}
    <p class="total">${histogram.total} records</p></div>`;
}

export function renderFilterProblems(problems: string[]): string {
  if (!problems.length) return "";
  return `<ul class="filter-problems">` +
    problems.map((p) => `<li>${esc(p)}</li>`).join("") + `</ul>`;
}
