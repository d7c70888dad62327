// Shared builders for the decoder and UI tests.

export function base64ToBuffer(base64: string): ArrayBuffer {
  const binary = atob(base64);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  return bytes.buffer;
}

/** Assemble an NPY file from explicit parts, so malformed ones are easy. */
export function buildNpy(
  headerText: string,
  payload: Uint8Array,
  version: [number, number] = [1, 0],
): ArrayBuffer {
  const header = new TextEncoder().encode(headerText);
  const out = new Uint8Array(10 + header.length + payload.length);
  out.set([0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59], 0);
  out[6] = version[0];
  out[7] = version[1];
  out[8] = header.length & 0xff;
  out[9] = header.length >> 8;
  out.set(header, 10);
  out.set(payload, 10 + header.length);
  return out.buffer;
}

function shapeText(shape: number[]): string {
  if (shape.length === 0) return "()";
  if (shape.length === 1) return `(${shape[0]},)`;
  return `(${shape.join(", ")})`;
}

/** Well-formed little-endian f8 file with the usual padded header. */
export function npyFromF64(shape: number[], values: number[]): ArrayBuffer {
  let count = 1;
  for (const dim of shape) count *= dim;
  if (values.length !== count) {
    throw new Error("value count does not match shape");
  }
  let header = `{'descr': '<f8', 'fortran_order': False, 'shape': ${shapeText(shape)}, }`;
  // pad to the reference writer's 64-byte alignment, newline last
  const preludeLen = 10 + header.length + 1;
  header += " ".repeat((64 - (preludeLen % 64)) % 64) + "\n";

  const payload = new Uint8Array(count * 8);
  const view = new DataView(payload.buffer);
  for (let i = 0; i < count; i++) {
    view.setFloat64(i * 8, values[i], true);
  }
  return buildNpy(header, payload);
}

export async function waitFor(
  condition: () => boolean,
  timeoutMs = 5000,
  what = "condition",
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (condition()) return;
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
  throw new Error(`timed out waiting for ${what}`);
}
