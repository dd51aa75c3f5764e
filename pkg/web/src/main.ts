// Browser bootstrap: hash routing (#/upload, #/doc/<id>, #/search?...),
// thin DOM glue around the pure renderers, polling and review wiring.
// All state lives in the URL and the API; refresh reconstructs everything.

import { ApiClient, ApiError } from "./api.js";
import { renderFilterProblems, renderHistogram, renderJobView,
         renderSearchResults } from "./render.js";
import { checkEditPayload, filtersFromHash, filtersToHash, isSettled,
         pollDocument, reviewOptimistically, validateFilters } from "./state.js";
import type { JobView, ModelRecord, QueryFilters } from "./types.js";
import { MATERIAL_CLASSES, MECHANISM_CLASSES } from "./types.js";

const client = new ApiClient("", localStorage.getItem("cmdb_token") ?? "");
const app = document.getElementById("app") as HTMLElement;
let pollToken = 0; // invalidates stale pollers when the route changes

function nav(): string {
  return `<nav>
    <a href="#/upload">upload</a>
    <a href="#/search">search</a>
  </nav>`;
}

function setContent(html: string): void {
  app.innerHTML = nav() + html;
}

function showError(error: unknown, target?: HTMLElement): void {
  const message = error instanceof ApiError
    ? `${error.code}: ${error.message}` : String(error);
  const box = document.createElement("p");
  box.className = "error";
  box.textContent = message;
  const retry = document.createElement("button");
  retry.textContent = "retry";
  retry.onclick = () => route();
  box.appendChild(retry);
  (target ?? app).appendChild(box);
}

// ---------------------------------------------------------------- upload

function uploadView(): void {
  setContent(`
    <h1>upload a paper</h1>
    <p>PDF documents are parsed, gated for relevance and, when relevant,
       mined for constitutive models. Track progress on the document page.</p>
    <form id="upload-form">
      <input type="file" name="file" accept="application/pdf" required>
      <button type="submit">upload</button>
    </form>
    <p id="upload-status"></p>`);
  const form = document.getElementById("upload-form") as HTMLFormElement;
  const status = document.getElementById("upload-status") as HTMLElement;
  form.onsubmit = async (event) => {
    event.preventDefault();
    const input = form.elements.namedItem("file") as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    status.textContent = "uploading…";
    try {
      const response = await client.uploadPdf(file, file.name);
      location.hash = `#/doc/${response.doc_id}`;
    } catch (error) {
      status.textContent = "";
      showError(error, status.parentElement as HTMLElement);
    }
  };
}

// ----------------------------------------------------------- document view

function wireReviewButtons(view: JobView): void {
  for (const article of app.querySelectorAll<HTMLElement>("article.record")) {
    const recordId = article.dataset.recordId!;
    const record = view.records.find((r) => r.record_id === recordId)!;
    const note = article.querySelector(".action-note") as HTMLElement;
    for (const button of article.querySelectorAll<HTMLButtonElement>("button[data-action]")) {
      button.onclick = async () => {
        const action = button.dataset.action as "verify" | "reject" | "edit";
        if (action === "edit") {
          openEditDialog(record, note);
          return;
        }
        const chip = article.querySelector(".chip") as HTMLElement;
        const previous = chip.textContent ?? "";
        chip.textContent = action === "verify" ? "verified" : "rejected";
        try {
          const outcome = await reviewOptimistically(client, record, action);
          if (outcome.conflicted) {
            chip.textContent = previous; // roll back the optimistic flip
            note.textContent = outcome.message;
          } else {
            renderDocument(view.doc_id); // re-render from the server state
          }
        } catch (error) {
          chip.textContent = previous;
          showError(error, note);
        }
      };
    }
  }
}

function openEditDialog(record: ModelRecord, note: HTMLElement): void {
  const editable: Partial<ModelRecord> = {
    equation_latex: record.equation_latex,
    symbol_map: record.symbol_map,
    material: record.material,
    parameters: record.parameters,
    validation: record.validation,
    mechanism: record.mechanism,
    confidence: record.confidence,
  };
  const text = prompt("edit the record payload (JSON)",
                      JSON.stringify(editable, null, 2));
  if (text === null) return;
  let payload: Partial<ModelRecord>;
  try {
    payload = JSON.parse(text) as Partial<ModelRecord>;
  } catch {
    note.textContent = "not valid JSON";
    return;
  }
  const problems = checkEditPayload(payload);
  if (problems.length) {
    // the client-side schema check blocks the submit entirely
    note.textContent = `not submitted: ${problems.join("; ")}`;
    return;
  }
  reviewOptimistically(client, record, "edit", { payload })
    .then((outcome) => {
      note.textContent = outcome.conflicted ? outcome.message : "edit saved";
      if (!outcome.conflicted) renderDocument(record.doc_id);
    })
    .catch((error) => showError(error, note));
}

function renderDocument(docId: string): void {
  const token = ++pollToken;
  setContent(`<p class="spinner">loading document…</p>`);
  pollDocument(client, docId, (view) => {
    if (token !== pollToken) return;
    setContent(renderJobView(view));
    if (isSettled(view)) wireReviewButtons(view);
  }).catch((error) => {
    if (token === pollToken) showError(error);
  });
}

// --------------------------------------------------------------- search

function optionList(values: readonly string[], selected?: string): string {
  return `<option value=""></option>` + values.map((v) =>
    `<option value="${v}" ${v === selected ? "selected" : ""}>${v}</option>`
  ).join("");
}

function searchView(filters: QueryFilters): void {
  setContent(`
    <h1>search the database</h1>
    <form id="filters">
      <label>material class
        <select name="material_class">${optionList(MATERIAL_CLASSES, filters.material_class)}</select>
      </label>
      <label>mechanism
        <select name="mechanism">${optionList(MECHANISM_CLASSES, filters.mechanism)}</select>
      </label>
      <label>material contains <input name="q" value="${filters.q ?? ""}"></label>
      <label>parameter <input name="param" value="${filters.param ?? ""}" size="6"></label>
      <label>min (SI) <input name="min" value="${filters.min ?? ""}" size="8"></label>
      <label>max (SI) <input name="max" value="${filters.max ?? ""}" size="8"></label>
      <button type="submit">search</button>
    </form>
    <div id="filter-problems"></div>
    <div id="results"><p class="spinner">searching…</p></div>
    <h2>mechanism distribution</h2>
    <div id="histogram"></div>`);

  const form = document.getElementById("filters") as HTMLFormElement;
  form.onsubmit = (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const next: QueryFilters = {};
    for (const key of ["material_class", "mechanism", "q", "param", "min",
                       "max"] as const) {
      const value = (data.get(key) as string | null) ?? "";
      if (value) next[key] = value;
    }
    const problems = validateFilters(next);
    const problemBox = document.getElementById("filter-problems") as HTMLElement;
    problemBox.innerHTML = renderFilterProblems(problems);
    if (problems.length) return; // inline validation, no request
    location.hash = filtersToHash(next);
  };

  const problems = validateFilters(filters);
  const problemBox = document.getElementById("filter-problems") as HTMLElement;
  problemBox.innerHTML = renderFilterProblems(problems);
  const results = document.getElementById("results") as HTMLElement;
  if (problems.length) {
    results.innerHTML = "";
    return;
  }
  client.searchModels(filters)
    .then((page) => { results.innerHTML = renderSearchResults(page); })
    .catch((error) => {
      results.innerHTML = "";
      if (error instanceof ApiError && error.status === 400) {
        problemBox.innerHTML = renderFilterProblems([error.message]);
      } else {
        showError(error, results);
      }
    });
  client.mechanismStats()
    .then((histogram) => {
      const target = document.getElementById("histogram");
      if (target) target.innerHTML = renderHistogram(histogram);
    })
    .catch(() => undefined);
}

// --------------------------------------------------------------- router

function route(): void {
  pollToken += 1;
  const hash = location.hash || "#/upload";
  const docMatch = /^#\/doc\/([^/?]+)/.exec(hash);
  if (docMatch) {
    renderDocument(decodeURIComponent(docMatch[1]));
  } else if (hash.startsWith("#/search")) {
    searchView(filtersFromHash(hash));
  } else {
    uploadView();
  }
}

window.addEventListener("hashchange", route);
route();
