// View-model logic kept free of DOM concerns: job polling, optimistic
// review with rollback on version conflicts, filter validation, and the
// client-side record check that gates the edit form. The server stays the
// authority on all of it.

import { ApiClient, ApiError } from "./api.js";
import type { JobView, ModelRecord, QueryFilters } from "./types.js";
import {
  MATERIAL_CLASSES, MECHANISM_CLASSES, SETTLED_STATES as SETTLED,
} from "./types.js";

export const POLL_INTERVAL_MS = 2000;

export function isSettled(view: JobView): boolean {
  return (SETTLED as JobView["state"][]).includes(view.state);
}

/** Poll a document until it settles; `onUpdate` fires for every fetch so
 * the page can re-render from the response alone. */
export async function pollDocument(
  client: ApiClient,
  docId: string,
  onUpdate: (view: JobView) => void,
  options: { intervalMs?: number; maxPolls?: number; sleep?: (ms: number) => Promise<void> } = {},
): Promise<JobView> {
  const interval = options.intervalMs ?? POLL_INTERVAL_MS;
  const maxPolls = options.maxPolls ?? 1000;
  const sleep = options.sleep ?? ((ms) => new Promise((r) => setTimeout(r, ms)));
  let view = await client.getDocument(docId);
  onUpdate(view);
  let polls = 1;
  while (!isSettled(view) && polls < maxPolls) {
    await sleep(interval);
    view = await client.getDocument(docId);
    onUpdate(view);
    polls += 1;
  }
  return view;
}

export interface ReviewOutcome {
  record: ModelRecord;
  conflicted: boolean;
  message: string;
}

/** Optimistic review: callers may render `optimistic(record)` right away;
 * on a 409 the previous record is handed back so the UI rolls back and
 * asks the user to reload. */
export async function reviewOptimistically(
  client: ApiClient,
  record: ModelRecord,
  action: "verify" | "reject" | "edit",
  options: { payload?: unknown; note?: string } = {},
): Promise<ReviewOutcome> {
  try {
    const updated = await client.review(record.record_id, action, {
      ...options,
      baseVersion: record.version,
    });
    return { record: updated, conflicted: false, message: "" };
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      return {
        record,
        conflicted: true,
        message: "record changed on the server, reload to continue",
      };
    }
    throw error;
  }
}

/** Inline filter validation; invalid filters never reach the network. */
export function validateFilters(filters: QueryFilters): string[] {
  const problems: string[] = [];
  const min = filters.min === undefined || filters.min === "" ? undefined : Number(filters.min);
  const max = filters.max === undefined || filters.max === "" ? undefined : Number(filters.max);
  if (min !== undefined && Number.isNaN(min)) problems.push("min must be a number");
  if (max !== undefined && Number.isNaN(max)) problems.push("max must be a number");
  if (min !== undefined && max !== undefined && !Number.isNaN(min)
      && !Number.isNaN(max) && min > max) {
    problems.push("min must not exceed max");
  }
  if ((min !== undefined || max !== undefined) && !filters.param) {
    problems.push("parameter ranges need a symbol");
  }
  if (filters.material_class &&
      !(MATERIAL_CLASSES as readonly string[]).includes(filters.material_class)) {
    problems.push(`unknown material class ${filters.material_class}`);
  }
  if (filters.mechanism &&
      !(MECHANISM_CLASSES as readonly string[]).includes(filters.mechanism)) {
    problems.push(`unknown mechanism ${filters.mechanism}`);
  }
  return problems;
}

function braceBalanced(text: string): boolean {
  let depth = 0;
  for (const c of text) {
    if (c === "{") depth += 1;
    if (c === "}") depth -= 1;
    if (depth < 0) return false;
  }
  return depth === 0;
}

/** Client-side mirror of the record schema; the edit form cannot submit a
 * payload this rejects (the backend re-validates regardless). */
export function checkEditPayload(payload: Partial<ModelRecord>): string[] {
  const problems: string[] = [];
  if (!payload.equation_latex || !payload.equation_latex.trim()) {
    problems.push("equation_latex must be non-empty");
  } else if (!braceBalanced(payload.equation_latex)) {
    problems.push("equation_latex has unbalanced braces");
  }
  const bindings = payload.symbol_map ?? [];
  const seen = new Set<string>();
  for (const b of bindings) {
    if (!b.symbol || !b.definition) {
      problems.push("every symbol binding needs symbol and definition");
      break;
    }
    if (seen.has(b.symbol)) {
      problems.push(`duplicate symbol ${b.symbol} in symbol map`);
      break;
    }
    seen.add(b.symbol);
  }
  for (const p of payload.parameters ?? []) {
    if (!seen.has(p.symbol)) {
      problems.push(`parameter symbol ${p.symbol} is not in the symbol map`);
    }
    if (!Number.isFinite(p.value_raw) || !Number.isFinite(p.value_si)) {
      problems.push(`parameter ${p.symbol} needs finite values`);
    }
  }
  if (!payload.material?.material_name?.trim()) {
    problems.push("material_name must be non-empty");
  }
  if (payload.mechanism &&
      !(MECHANISM_CLASSES as readonly string[]).includes(payload.mechanism)) {
    problems.push(`unknown mechanism ${payload.mechanism}`);
  }
  if (payload.confidence !== undefined &&
      (payload.confidence < 0 || payload.confidence > 1)) {
    problems.push("confidence must be within [0, 1]");
  }
  const validation = payload.validation;
  if (validation && validation.present !== Boolean(validation.method?.trim())) {
    problems.push("validation.present must match whether a method is given");
  }
  return problems;
}

/** Filters round-trip through the URL hash so refresh loses nothing. */
export function filtersToHash(filters: QueryFilters): string {
  const params = new URLSearchParams();
  for (const [key, value] of Object.entries(filters)) {
    if (value !== undefined && `${value}` !== "") params.set(key, `${value}`);
  }
  const qs = params.toString();
  return qs ? `#/search?${qs}` : "#/search";
}

export function filtersFromHash(hash: string): QueryFilters {
  const queryStart = hash.indexOf("?");
  if (queryStart < 0) return {};
  const params = new URLSearchParams(hash.slice(queryStart + 1));
  const filters: QueryFilters = {};
  for (const key of ["material_class", "mechanism", "q", "param", "min",
                     "max", "review_status"] as const) {
    const value = params.get(key);
    if (value) filters[key] = value;
  }
  const page = params.get("page");
  if (page) filters.page = Number(page);
  return filters;
}
