import { describe, expect, it } from "vitest";

import { parsePgm, pgmToRgba } from "../src/pgm";

function ascii(s: string): number[] {
  return [...s].map((c) => c.charCodeAt(0));
}

describe("parsePgm", () => {
  it("decodes the hub's P5 layout", () => {
    const raster = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120];
    const bytes = new Uint8Array([...ascii("P5\n4 3\n255\n"), ...raster]);
    const img = parsePgm(bytes);
    expect(img.width).toBe(4);
    expect(img.height).toBe(3);
    expect(img.maxval).toBe(255);
    expect([...img.pixels]).toEqual(raster);
  });

  it("tolerates extra header whitespace", () => {
    const bytes = new Uint8Array([...ascii("P5\n2\t1\n255\n"), 1, 2]);
    expect(parsePgm(bytes).width).toBe(2);
  });

  it("rejects wrong magic, bad sizes and truncation", () => {
    expect(() => parsePgm(new Uint8Array(ascii("P6\n1 1\n255\nx")))).toThrow(/P5/);
    expect(() => parsePgm(new Uint8Array(ascii("P5\n0 3\n255\n")))).toThrow(/size/);
    expect(() => parsePgm(new Uint8Array(ascii("P5\n4 3\n255\n")))).toThrow(/truncated/);
    expect(() => parsePgm(new Uint8Array(ascii("P5\n4\n")))).toThrow(/truncated header/);
  });
});

describe("pgmToRgba", () => {
  it("replicates gray into rgb and pins alpha", () => {
    const img = { width: 2, height: 1, maxval: 255, pixels: new Uint8Array([0, 200]) };
    expect([...pgmToRgba(img)]).toEqual([0, 0, 0, 255, 200, 200, 200, 255]);
  });

  it("rescales when maxval is below 255", () => {
    const img = { width: 1, height: 1, maxval: 100, pixels: new Uint8Array([50]) };
    expect(pgmToRgba(img)[0]).toBe(128);
  });
});
