import { ApiClient, ApiError } from "./api.js";
import { decodeNpy, NpyError, ScanGrid } from "./npy.js";
import { ParamPanel } from "./panel.js";
import { ScanView } from "./render.js";
import { ViewState } from "./state.js";
import { DatasetSummary, ModelInfo } from "./types.js";

export class App {
  readonly state = new ViewState();
  client: ApiClient | null = null;

  // settles when the most recently started async handler finishes; tests
  // await this instead of sleeping
  pendingWork: Promise<void> = Promise.resolve();

  private models: ModelInfo[] = [];
  private datasets: DatasetSummary[] = [];
  private scan: ScanGrid | null = null;

  private serverInput: HTMLInputElement;
  private tokenInput: HTMLInputElement;
  private connectButton: HTMLButtonElement;
  private connStatus: HTMLSpanElement;
  private datasetSelect: HTMLSelectElement;
  private scanSelect: HTMLSelectElement;
  private modelSelect: HTMLSelectElement;
  private runButton: HTMLButtonElement;
  private outcomeBox: HTMLDivElement;
  private errorBox: HTMLDivElement;
  private scanView: ScanView;
  private panel: ParamPanel;

  constructor(root: HTMLElement) {
    root.innerHTML = `
      <div class="settings">
        <label>server <input id="server-url" size="28"></label>
        <label>token <input id="token" type="password" size="24"></label>
        <button id="connect">connect</button>
        <span id="conn-status"></span>
      </div>
      <div class="pickers">
        <label>dataset <select id="dataset-select"></select></label>
        <label>scan <select id="scan-select"></select></label>
        <label>model <select id="model-select"></select></label>
      </div>
      <div class="workspace">
        <div id="scan-panel"></div>
        <div class="sidebar">
          <div id="param-panel"></div>
          <button id="run" disabled>run inference</button>
          <div id="error-box" style="display: none"></div>
          <div id="outcome-box"></div>
        </div>
      </div>
    `;
    this.serverInput = root.querySelector("#server-url")!;
    this.tokenInput = root.querySelector("#token")!;
    this.connectButton = root.querySelector("#connect")!;
    this.connStatus = root.querySelector("#conn-status")!;
    this.datasetSelect = root.querySelector("#dataset-select")!;
    this.scanSelect = root.querySelector("#scan-select")!;
    this.modelSelect = root.querySelector("#model-select")!;
    this.runButton = root.querySelector("#run")!;
    this.outcomeBox = root.querySelector("#outcome-box")!;
    this.errorBox = root.querySelector("#error-box")!;
    this.scanView = new ScanView(root.querySelector("#scan-panel")!);
    this.panel = new ParamPanel(root.querySelector("#param-panel")!, this.state);

    this.serverInput.value = window.location.origin.startsWith("http")
      ? window.location.origin
      : "http://127.0.0.1:8080";

    this.connectButton.addEventListener("click", () => this.track(this.connect()));
    this.datasetSelect.addEventListener("change", () => this.track(this.onDatasetChange()));
    this.scanSelect.addEventListener("change", () => this.track(this.onScanChange()));
    this.modelSelect.addEventListener("change", () => this.onModelChange());
    this.runButton.addEventListener("click", () => this.track(this.onRun()));

    this.panel.render();
    this.refreshRunButton();
  }

  private track(work: Promise<void>): void {
    this.pendingWork = work;
  }

  private async connect(): Promise<void> {
    this.client = new ApiClient(this.serverInput.value, this.tokenInput.value);
    this.connStatus.textContent = "connecting...";
    try {
      this.models = await this.client.listModels();
      this.datasets = await this.client.listDatasets();
    } catch (err) {
      this.client = null;
      this.connStatus.textContent = `connection failed: ${describe(err)}`;
      return;
    }
    fillSelect(
      this.datasetSelect,
      this.datasets.map((d) => [d.dataset_id, `${d.name} (${d.scan_count} scans)`]),
    );
    fillSelect(this.scanSelect, []);
    fillSelect(
      this.modelSelect,
      this.models.map((m) => [m.model_id, m.display_name]),
    );
    this.connStatus.textContent = `connected: ${this.models.length} models, ${this.datasets.length} datasets`;
    this.state.selectDataset(null);
    this.state.selectModel(null);
    this.scan = null;
    this.panel.render();
    this.renderResults();
  }

  private async onDatasetChange(): Promise<void> {
    const datasetId = this.datasetSelect.value || null;
    this.state.selectDataset(datasetId);
    this.scan = null;
    this.scanView.showNotice("no scan loaded");
    if (datasetId && this.client) {
      try {
        const manifest = await this.client.getManifest(datasetId);
        fillSelect(
          this.scanSelect,
          manifest.scans.map((s) => [s.scan_id, `${s.scan_id} (${s.height}x${s.width})`]),
        );
      } catch (err) {
        this.scanView.showNotice(`could not list scans: ${describe(err)}`);
        fillSelect(this.scanSelect, []);
      }
    } else {
      fillSelect(this.scanSelect, []);
    }
    this.renderResults();
    this.refreshRunButton();
  }

  private async onScanChange(): Promise<void> {
    const scanId = this.scanSelect.value || null;
    this.state.selectScan(scanId);
    this.scan = null;
    if (scanId && this.state.selectedDataset && this.client) {
      try {
        const buffer = await this.client.fetchScan(this.state.selectedDataset, scanId);
        this.scan = decodeNpy(buffer);
        this.scanView.show(this.scan, []);
      } catch (err) {
        const reason = err instanceof NpyError ? `bad scan file: ${err.message}` : describe(err);
        this.scanView.showNotice(reason);
      }
    } else {
      this.scanView.showNotice("no scan loaded");
    }
    this.renderResults();
    this.refreshRunButton();
  }

  private onModelChange(): void {
    const modelId = this.modelSelect.value;
    const model = this.models.find((m) => m.model_id === modelId) ?? null;
    this.state.selectModel(model);
    this.panel.render();
    this.renderResults();
    this.refreshRunButton();
  }

  private async onRun(): Promise<void> {
    if (!this.client || !this.state.canRun()) {
      return;
    }
    this.refreshRunButton();
    await this.state.run(this.client);
    this.renderResults();
    this.refreshRunButton();
  }

  private refreshRunButton(): void {
    this.runButton.disabled = !this.state.canRun();
  }

  private renderResults(): void {
    const outcome = this.state.lastOutcome;
    const error = this.state.lastError;

    if (error) {
      this.errorBox.style.display = "";
      this.errorBox.innerHTML = "";
      const text = document.createElement("span");
      text.textContent = `${error.code}: ${error.message}`;
      this.errorBox.appendChild(text);
      if (error.network) {
        const retry = document.createElement("button");
        retry.id = "retry";
        retry.textContent = "retry";
        retry.addEventListener("click", () => this.track(this.onRun()));
        this.errorBox.appendChild(retry);
      }
    } else {
      this.errorBox.style.display = "none";
      this.errorBox.innerHTML = "";
    }

    if (!outcome) {
      this.outcomeBox.innerHTML = "";
      if (this.scan) {
        this.scanView.show(this.scan, []);
      }
      return;
    }

    const rows = outcome.rois
      .map(
        (roi, i) =>
          `<tr><td>${i + 1}</td><td>${roi.row}</td><td>${roi.col}</td><td>${roi.score.toFixed(4)}</td></tr>`,
      )
      .join("");
    this.outcomeBox.innerHTML = `
      <div class="outcome-head">
        <span class="version-badge">${outcome.model_id} v${outcome.version}</span>
        <span class="duration">${outcome.duration_ms.toFixed(1)} ms</span>
      </div>
      <table class="roi-table">
        <thead><tr><th>#</th><th>row</th><th>col</th><th>score</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>
    `;
    if (this.scan) {
      this.scanView.show(this.scan, outcome.rois);
    }
  }
}

function fillSelect(select: HTMLSelectElement, options: [string, string][]): void {
  select.innerHTML = "";
  const blank = document.createElement("option");
  blank.value = "";
  blank.textContent = "--";
  select.appendChild(blank);
  for (const [value, label] of options) {
    const opt = document.createElement("option");
    opt.value = value;
    opt.textContent = label;
    select.appendChild(opt);
  }
  select.value = "";
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return `${err.code}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}
