// Typed client over the documented backend endpoints. Every request the
// UI makes goes through here, so the surface is contract-testable against
// a stubbed server.

import type {
  ApiErrorBody, JobView, MechanismHistogram, ModelPage, ModelRecord,
  QueryFilters, UploadResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail?: unknown,
  ) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl = "",
    private token = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private headers(json = false): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["Content-Type"] = "application/json";
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async handle<T>(response: Response): Promise<T> {
    if (response.ok) return (await response.json()) as T;
    let body: ApiErrorBody;
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      body = { code: "unknown", message: `HTTP ${response.status}` };
    }
    throw new ApiError(response.status, body.code, body.message, body.detail);
  }

  async health(): Promise<{ status: string; version: string }> {
    return this.handle(await this.fetchImpl(`${this.baseUrl}/health`));
  }

  async uploadPdf(file: File | Blob, name: string): Promise<UploadResponse> {
    const form = new FormData();
    form.append("file", file, name);
    const response = await this.fetchImpl(`${this.baseUrl}/documents`, {
      method: "POST",
      headers: this.headers(),
      body: form,
    });
    return this.handle(response);
  }

  async getDocument(docId: string): Promise<JobView> {
    return this.handle(await this.fetchImpl(
      `${this.baseUrl}/documents/${encodeURIComponent(docId)}`));
  }

  async searchModels(filters: QueryFilters): Promise<ModelPage> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filters)) {
      if (value !== undefined && value !== null && `${value}` !== "") {
        params.set(key, `${value}`);
      }
    }
    const qs = params.toString();
    return this.handle(await this.fetchImpl(
      `${this.baseUrl}/models${qs ? "?" + qs : ""}`));
  }

  async review(
    recordId: string,
    action: "verify" | "reject" | "edit",
    options: { payload?: unknown; note?: string; baseVersion?: number } = {},
  ): Promise<ModelRecord> {
    const body: Record<string, unknown> = { action };
    if (options.payload !== undefined) body.payload = options.payload;
    if (options.note) body.note = options.note;
    if (options.baseVersion !== undefined) body.base_version = options.baseVersion;
    const response = await this.fetchImpl(
      `${this.baseUrl}/extractions/${encodeURIComponent(recordId)}/review`,
      { method: "POST", headers: this.headers(true), body: JSON.stringify(body) });
    return this.handle(response);
  }

  async mechanismStats(): Promise<MechanismHistogram> {
    return this.handle(await this.fetchImpl(`${this.baseUrl}/stats/mechanisms`));
  }
}
