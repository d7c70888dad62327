import {
  DatasetManifest,
  DatasetSummary,
  InferOutcome,
  InferRequest,
  ModelInfo,
} from "./types.js";

// An error body the gateway produced: {code, message, request_id}.
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public requestId: string | null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  private baseUrl: string;

  constructor(baseUrl: string, private token: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async listModels(): Promise<ModelInfo[]> {
    return this.getJson("/models");
  }

  async listDatasets(): Promise<DatasetSummary[]> {
    return this.getJson("/datasets");
  }

  async getManifest(datasetId: string): Promise<DatasetManifest> {
    return this.getJson(`/datasets/${encodeURIComponent(datasetId)}`);
  }

  async fetchScan(datasetId: string, scanId: string): Promise<ArrayBuffer> {
    const path = `/datasets/${encodeURIComponent(datasetId)}/scans/${encodeURIComponent(scanId)}`;
    const resp = await this.send(path, { method: "GET" });
    return resp.arrayBuffer();
  }

  async infer(body: InferRequest): Promise<InferOutcome> {
    const resp = await this.send("/infer", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return resp.json();
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.send(path, { method: "GET" });
    return resp.json();
  }

  private async send(path: string, init: RequestInit): Promise<Response> {
    const headers = new Headers(init.headers);
    headers.set("authorization", `Bearer ${this.token}`);
    const resp = await fetch(this.baseUrl + "/api/v1" + path, { ...init, headers });
    if (!resp.ok) {
      throw await this.toApiError(resp);
    }
    return resp;
  }

  private async toApiError(resp: Response): Promise<ApiError> {
    let code = `HTTP${resp.status}`;
    let message = resp.statusText || "request failed";
    let requestId: string | null = null;
    try {
      const body = await resp.json();
      if (body && typeof body.code === "string") code = body.code;
      if (body && typeof body.message === "string") message = body.message;
      if (body && typeof body.request_id === "string") requestId = body.request_id;
    } catch {
      // non-JSON error body, keep the status line
    }
    return new ApiError(resp.status, code, message, requestId);
  }
}
