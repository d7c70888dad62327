// Wire shapes of the gateway API, field names as served.

export interface ParamSpec {
  name: string;
  kind: "float" | "int" | "bool";
  min: number | null;
  max: number | null;
  default: number | boolean;
}

export interface ModelInfo {
  model_id: string;
  version: number;
  display_name: string;
  detector: string;
  param_schema: ParamSpec[];
  state: string;
  validated: boolean;
  created_at: string;
  checksum: string;
}

export interface DatasetSummary {
  dataset_id: string;
  name: string;
  description: string;
  scan_count: number;
}

export interface ScanInfo {
  scan_id: string;
  file: string;
  height: number;
  width: number;
}

export interface DatasetManifest {
  dataset_id: string;
  name: string;
  description: string;
  scans: ScanInfo[];
}

export interface Roi {
  row: number;
  col: number;
  score: number;
}

export interface InferRequest {
  model_id: string;
  params: Record<string, number | boolean>;
  data: { dataset_id: string; scan_id: string };
}

export interface InferOutcome {
  model_id: string;
  version: number;
  rois: Roi[];
  params_used: Record<string, number | boolean>;
  duration_ms: number;
}
