// Thin typed client over the orchestrator's HTTP+JSON interface. One base
// URL setting, no other state; every portal action goes through here so the
// whole session is replayable from the network log.

import type {
  AuditReport, Preset, SliceDescriptor, SliceRecord, SliceSummary,
} from "./model.js";

export interface ApiErrorBody {
  detail?: string;
  field?: string;
  role?: string;
  reason?: string;
  [key: string]: unknown;
}

export class ApiError extends Error {
  readonly status: number;
  readonly body: ApiErrorBody;

  constructor(status: number, body: ApiErrorBody) {
    super(body.detail ? `${status}: ${body.detail}`
                      : `request failed with status ${status}`);
    this.name = "ApiError";
    this.status = status;
    this.body = body;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const defaultFetch: FetchLike = (input, init) => globalThis.fetch(input, init);

export interface HealthInfo {
  status: string;
  version: string;
  simulated_time_s: number;
}

export class PortalApi {
  constructor(readonly baseUrl: string = "",
              private readonly fetchFn: FetchLike = defaultFetch) {}

  private async request<T>(method: string, path: string,
                           body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let parsed: ApiErrorBody = {};
      try {
        parsed = await resp.json();
      } catch {
        // non-JSON error body; status alone will have to do
      }
      throw new ApiError(resp.status, parsed);
    }
    return resp.json() as Promise<T>;
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("GET", "/health");
  }

  async presets(): Promise<Preset[]> {
    const doc = await this.request<{ presets: Preset[] }>("GET", "/presets");
    return doc.presets;
  }

  topology(): Promise<{ sites: { id: string; kind: string }[] }> {
    return this.request("GET", "/topology");
  }

  async listSlices(): Promise<SliceSummary[]> {
    const doc = await this.request<{ slices: SliceSummary[] }>(
      "GET", "/slices");
    return doc.slices;
  }

  submitSlice(descriptor: SliceDescriptor,
              useCase?: number): Promise<SliceRecord> {
    const query = useCase == null ? "" : `?use_case=${useCase}`;
    return this.request<SliceRecord>("POST", `/slices${query}`, descriptor);
  }

  provisionSlice(sliceId: string): Promise<SliceRecord> {
    return this.request<SliceRecord>(
      "POST", `/slices/${encodeURIComponent(sliceId)}/provision`);
  }

  getSlice(sliceId: string): Promise<SliceRecord> {
    return this.request<SliceRecord>(
      "GET", `/slices/${encodeURIComponent(sliceId)}`);
  }

  auditSlice(sliceId: string): Promise<AuditReport> {
    return this.request<AuditReport>(
      "GET", `/slices/${encodeURIComponent(sliceId)}/audit`);
  }

  deprovisionSlice(sliceId: string): Promise<SliceRecord> {
    return this.request<SliceRecord>(
      "DELETE", `/slices/${encodeURIComponent(sliceId)}`);
  }

  async timingsCsv(): Promise<string> {
    const resp = await this.fetchFn(this.baseUrl + "/metrics/timings.csv");
    if (!resp.ok) throw new ApiError(resp.status, {});
    return resp.text();
  }
}
