import { describe, expect, test } from "vitest";

import { decodePgm, decodePgmBase64 } from "../src/frames.js";

function makePgm(width: number, height: number): Uint8Array {
  const header = new TextEncoder().encode(`P5\n${width} ${height}\n255\n`);
  const body = new Uint8Array(width * height);
  for (let i = 0; i < body.length; i++) body[i] = i % 256;
  const out = new Uint8Array(header.length + body.length);
  out.set(header);
  out.set(body, header.length);
  return out;
}

describe("pgm decoding", () => {
  test("round trips dimensions and pixels", () => {
    const frame = decodePgm(makePgm(48, 32));
    expect(frame.width).toBe(48);
    expect(frame.height).toBe(32);
    expect(frame.pixels).toHaveLength(48 * 32);
    expect(frame.pixels[10]).toBe(10);
    expect(frame.pixels[300]).toBe(300 % 256);
  });

  test("rejects non-P5 and truncated data", () => {
    expect(() => decodePgm(new TextEncoder().encode("P6\n1 1\n255\nxxx")))
      .toThrow(/P5/);
    const short = makePgm(16, 16).slice(0, 40);
    expect(() => decodePgm(short)).toThrow(/truncated/);
  });

  test("decodes base64 payloads", () => {
    const raw = makePgm(8, 8);
    const b64 = Buffer.from(raw).toString("base64");
    const frame = decodePgmBase64(b64);
    expect(frame.width).toBe(8);
    expect(Array.from(frame.pixels.slice(0, 4))).toEqual([0, 1, 2, 3]);
  });
});
