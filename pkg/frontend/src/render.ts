import { ScanGrid } from "./npy.js";
import { Roi } from "./types.js";

// Longest canvas edge the raster is scaled up to.
const TARGET_EDGE_PX = 640;

export function grayLevels(values: Float64Array): Uint8ClampedArray {
  let min = Infinity;
  let max = -Infinity;
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    if (!Number.isFinite(v)) continue;
    if (v < min) min = v;
    if (v > max) max = v;
  }
  const out = new Uint8ClampedArray(values.length);
  if (!(max > min)) {
    // all-equal scan (or nothing finite) renders mid-gray
    out.fill(128);
    return out;
  }
  const span = max - min;
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    out[i] = Number.isFinite(v) ? Math.round((255 * (v - min)) / span) : 0;
  }
  return out;
}

export function markerRadius(score: number): number {
  const clamped = Math.min(1, Math.max(0, score));
  return 2 + 4 * clamped;
}

export interface Marker {
  x: number;
  y: number;
  r: number;
  roi: Roi;
}

export function markerLayout(rois: Roi[], cellPx: number): Marker[] {
  return rois.map((roi) => ({
    x: (roi.col + 0.5) * cellPx,
    y: (roi.row + 0.5) * cellPx,
    r: markerRadius(roi.score),
    roi,
  }));
}

export function cellSize(height: number, width: number): number {
  return Math.max(1, Math.floor(TARGET_EDGE_PX / Math.max(height, width)));
}

/**
 * Scan raster plus ROI overlay. The raster goes on a canvas; markers are
 * positioned DOM nodes so the overlay stays inspectable and countable even
 * where no 2D context exists.
 */
export class ScanView {
  private frame: HTMLDivElement;
  private canvas: HTMLCanvasElement;
  private overlay: HTMLDivElement;
  private notice: HTMLDivElement;

  constructor(container: HTMLElement) {
    this.frame = document.createElement("div");
    this.frame.className = "scan-frame";
    this.frame.style.position = "relative";
    this.frame.style.display = "inline-block";

    this.canvas = document.createElement("canvas");
    this.canvas.className = "scan-canvas";

    this.overlay = document.createElement("div");
    this.overlay.className = "scan-overlay";
    this.overlay.style.position = "absolute";
    this.overlay.style.left = "0";
    this.overlay.style.top = "0";

    this.notice = document.createElement("div");
    this.notice.className = "scan-notice";
    this.notice.textContent = "no scan loaded";

    this.frame.appendChild(this.canvas);
    this.frame.appendChild(this.overlay);
    container.appendChild(this.frame);
    container.appendChild(this.notice);
  }

  show(scan: ScanGrid, rois: Roi[]): void {
    if (scan.shape.length !== 2) {
      this.showNotice(`cannot render a ${scan.shape.length}-dimensional scan`);
      return;
    }
    const [height, width] = scan.shape;
    if (height === 0 || width === 0) {
      this.showNotice("scan has no cells");
      return;
    }
    const cell = cellSize(height, width);
    this.canvas.width = width * cell;
    this.canvas.height = height * cell;
    this.canvas.style.display = "";
    this.notice.style.display = "none";

    const drawn = this.drawRaster(scan, height, width, cell);
    if (!drawn) {
      // keep the overlay working, but say why the raster is missing
      this.notice.textContent = "canvas 2D rendering is unavailable in this browser";
      this.notice.style.display = "";
    }

    this.overlay.innerHTML = "";
    for (const marker of markerLayout(rois, cell)) {
      const dot = document.createElement("div");
      dot.className = "roi-marker";
      dot.style.position = "absolute";
      dot.style.left = `${marker.x - marker.r}px`;
      dot.style.top = `${marker.y - marker.r}px`;
      dot.style.width = `${2 * marker.r}px`;
      dot.style.height = `${2 * marker.r}px`;
      dot.style.borderRadius = "50%";
      dot.style.background = "#ffffff";
      dot.title = `(${marker.roi.row}, ${marker.roi.col}) score ${marker.roi.score.toFixed(3)}`;
      this.overlay.appendChild(dot);
    }
  }

  showNotice(message: string): void {
    this.canvas.style.display = "none";
    this.overlay.innerHTML = "";
    this.notice.textContent = message;
    this.notice.style.display = "";
  }

  markerCount(): number {
    return this.overlay.querySelectorAll(".roi-marker").length;
  }

  private drawRaster(scan: ScanGrid, height: number, width: number, cell: number): boolean {
    const raster = document.createElement("canvas");
    raster.width = width;
    raster.height = height;
    const rctx = raster.getContext("2d");
    const ctx = this.canvas.getContext("2d");
    if (!rctx || !ctx) {
      return false;
    }
    const gray = grayLevels(scan.values);
    const image = rctx.createImageData(width, height);
    for (let i = 0; i < gray.length; i++) {
      image.data[4 * i] = gray[i];
      image.data[4 * i + 1] = gray[i];
      image.data[4 * i + 2] = gray[i];
      image.data[4 * i + 3] = 255;
    }
    rctx.putImageData(image, 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.drawImage(raster, 0, 0, width * cell, height * cell);
    return true;
  }
}
