// Frame payloads arrive as base64 binary PGM (P5); decode to raw pixels.

export interface DecodedFrame {
  width: number;
  height: number;
  pixels: Uint8Array;
}

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  // node (tests) without atob
  const nodeBuffer = (globalThis as unknown as {
    Buffer?: { from(data: string, enc: string): Uint8Array };
  }).Buffer;
  if (nodeBuffer) return new Uint8Array(nodeBuffer.from(b64, "base64"));
  throw new Error("no base64 decoder available");
}

export function decodePgm(data: Uint8Array): DecodedFrame {
  if (data[0] !== 0x50 || data[1] !== 0x35) throw new Error("not a P5 PGM");
  const isSpace = (b: number) => b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;
  let idx = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (idx < data.length && isSpace(data[idx])) idx++;
    if (data[idx] === 0x23) { // comment line
      while (idx < data.length && data[idx] !== 0x0a) idx++;
      continue;
    }
    let value = 0;
    while (idx < data.length && !isSpace(data[idx])) {
      value = value * 10 + (data[idx] - 0x30);
      idx++;
    }
    fields.push(value);
  }
  idx++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (maxval !== 255) throw new Error("only 8-bit PGM supported");
  const pixels = data.slice(idx, idx + width * height);
  if (pixels.length !== width * height) throw new Error("truncated PGM payload");
  return { width, height, pixels };
}

export function decodePgmBase64(b64: string): DecodedFrame {
  return decodePgm(base64ToBytes(b64));
}
