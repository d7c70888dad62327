import { ApiClient, ApiError } from "./api.js";
import { InferOutcome, InferRequest, ModelInfo, ParamSpec } from "./types.js";

export type ParamValue = number | boolean;

export interface RunError {
  code: string;
  message: string;
  network: boolean;
}

export function clampParam(spec: ParamSpec, value: ParamValue): ParamValue {
  if (spec.kind === "bool") {
    return Boolean(value);
  }
  let num = Number(value);
  if (!Number.isFinite(num)) {
    return spec.default;
  }
  if (spec.kind === "int") {
    num = Math.round(num);
  }
  if (spec.min !== null && num < spec.min) num = spec.min;
  if (spec.max !== null && num > spec.max) num = spec.max;
  return num;
}

export function defaultParams(schema: ParamSpec[]): Record<string, ParamValue> {
  const values: Record<string, ParamValue> = {};
  for (const spec of schema) {
    values[spec.name] = spec.default;
  }
  return values;
}

/**
 * Everything the panel shows and the run action sends. Mutated only through
 * the methods below so the schema/param-values pairing cannot drift.
 */
export class ViewState {
  selectedDataset: string | null = null;
  selectedScan: string | null = null;
  selectedModel: ModelInfo | null = null;
  paramValues: Record<string, ParamValue> = {};
  lastOutcome: InferOutcome | null = null;
  lastError: RunError | null = null;
  busy = false;

  selectDataset(datasetId: string | null): void {
    this.selectedDataset = datasetId;
    this.selectedScan = null;
    this.lastOutcome = null;
  }

  selectScan(scanId: string | null): void {
    this.selectedScan = scanId;
    this.lastOutcome = null;
  }

  selectModel(model: ModelInfo | null): void {
    this.selectedModel = model;
    this.paramValues = model ? defaultParams(model.param_schema) : {};
    this.lastOutcome = null;
  }

  setParam(name: string, value: ParamValue): void {
    const spec = this.findSpec(name);
    this.paramValues[name] = clampParam(spec, value);
  }

  getParam(name: string): ParamValue {
    this.findSpec(name);
    return this.paramValues[name];
  }

  canRun(): boolean {
    return (
      !this.busy &&
      this.selectedDataset !== null &&
      this.selectedScan !== null &&
      this.selectedModel !== null
    );
  }

  buildRequest(): InferRequest {
    if (this.selectedDataset === null || this.selectedScan === null || this.selectedModel === null) {
      throw new Error("cannot build a request without dataset, scan and model");
    }
    return {
      model_id: this.selectedModel.model_id,
      params: { ...this.paramValues },
      data: { dataset_id: this.selectedDataset, scan_id: this.selectedScan },
    };
  }

  /** Issue one inference. A no-op while busy; never queues. */
  async run(client: ApiClient): Promise<void> {
    if (!this.canRun()) {
      return;
    }
    this.busy = true;
    this.lastError = null;
    try {
      this.lastOutcome = await client.infer(this.buildRequest());
    } catch (err) {
      this.lastOutcome = null;
      if (err instanceof ApiError) {
        this.lastError = { code: err.code, message: err.message, network: false };
      } else {
        this.lastError = { code: "NetworkError", message: String(err), network: true };
      }
    } finally {
      this.busy = false;
    }
  }

  private findSpec(name: string): ParamSpec {
    const schema = this.selectedModel ? this.selectedModel.param_schema : [];
    for (const spec of schema) {
      if (spec.name === name) return spec;
    }
    throw new Error(`no parameter ${name} in the selected model's schema`);
  }
}
