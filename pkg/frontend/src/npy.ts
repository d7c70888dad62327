// Decoder for NPY version 1.0 files as served by the gateway's scan endpoint.
// Decode only; the browser never writes arrays back.

export class NpyError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NpyError";
  }
}

export interface ScanGrid {
  dtype: string;
  shape: number[];
  values: Float64Array;
}

const MAGIC = [0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59];

// 256 MiB, same ceiling the server applies before touching a payload.
const MAX_PAYLOAD_BYTES = 256 * 1024 * 1024;

interface DtypeReader {
  size: number;
  read: (view: DataView, offset: number) => number;
}

// All reads go through DataView with an explicit little-endian flag, so the
// host byte order never matters.
const DTYPES: Record<string, DtypeReader> = {
  "<f4": { size: 4, read: (v, o) => v.getFloat32(o, true) },
  "<f8": { size: 8, read: (v, o) => v.getFloat64(o, true) },
  "<i4": { size: 4, read: (v, o) => v.getInt32(o, true) },
  "<i8": { size: 8, read: (v, o) => Number(v.getBigInt64(o, true)) },
  "|u1": { size: 1, read: (v, o) => v.getUint8(o) },
};

export function decodeNpy(buffer: ArrayBuffer): ScanGrid {
  const bytes = new Uint8Array(buffer);
  if (bytes.length < 10) {
    throw new NpyError("file too short for an NPY prelude");
  }
  for (let i = 0; i < MAGIC.length; i++) {
    if (bytes[i] !== MAGIC[i]) {
      throw new NpyError("bad magic, not an NPY file");
    }
  }
  const major = bytes[6];
  const minor = bytes[7];
  if (major !== 1 || minor !== 0) {
    throw new NpyError(`unsupported NPY version ${major}.${minor}`);
  }
  const view = new DataView(buffer);
  const headerLen = view.getUint16(8, true);
  const dataStart = 10 + headerLen;
  if (dataStart > bytes.length) {
    throw new NpyError("header length exceeds file size");
  }

  let headerText = "";
  for (let i = 10; i < dataStart; i++) {
    headerText += String.fromCharCode(bytes[i]);
  }
  const { descr, fortran, shape } = parseHeader(headerText);

  const dtype = DTYPES[descr];
  if (!dtype) {
    throw new NpyError(`unsupported dtype ${descr}`);
  }

  let count = 1;
  for (const dim of shape) {
    count *= dim;
  }
  const declared = count * dtype.size;
  if (declared > MAX_PAYLOAD_BYTES) {
    throw new NpyError(`declared payload of ${declared} bytes exceeds the decode cap`);
  }
  const actual = bytes.length - dataStart;
  if (actual !== declared) {
    throw new NpyError(`payload is ${actual} bytes, header declares ${declared}`);
  }

  const values = new Float64Array(count);
  if (!fortran || shape.length < 2) {
    for (let i = 0; i < count; i++) {
      values[i] = dtype.read(view, dataStart + i * dtype.size);
    }
  } else {
    // Column-major file, row-major output: walk C-order indices and map each
    // through the Fortran strides.
    const fstride = new Array(shape.length).fill(1);
    for (let d = 1; d < shape.length; d++) {
      fstride[d] = fstride[d - 1] * shape[d - 1];
    }
    const coords = new Array(shape.length).fill(0);
    for (let i = 0; i < count; i++) {
      let off = 0;
      for (let d = 0; d < shape.length; d++) {
        off += coords[d] * fstride[d];
      }
      values[i] = dtype.read(view, dataStart + off * dtype.size);
      for (let d = shape.length - 1; d >= 0; d--) {
        coords[d] += 1;
        if (coords[d] < shape[d]) break;
        coords[d] = 0;
      }
    }
  }
  return { dtype: descr, shape, values };
}

function parseHeader(text: string): { descr: string; fortran: boolean; shape: number[] } {
  const descrMatch = text.match(/'descr'\s*:\s*'([^']+)'/);
  const orderMatch = text.match(/'fortran_order'\s*:\s*(True|False)/);
  const shapeMatch = text.match(/'shape'\s*:\s*\(([^)]*)\)/);
  if (!descrMatch || !orderMatch || !shapeMatch) {
    throw new NpyError("malformed NPY header dictionary");
  }
  const shape: number[] = [];
  for (const piece of shapeMatch[1].split(",")) {
    const trimmed = piece.trim();
    if (trimmed === "") continue;
    if (!/^\d+$/.test(trimmed)) {
      throw new NpyError(`bad shape entry ${trimmed}`);
    }
    shape.push(parseInt(trimmed, 10));
  }
  return { descr: descrMatch[1], fortran: orderMatch[1] === "True", shape };
}
