/** Decoder for the binary PGM (P5) files the hub stores on intrusion. */

export interface PgmImage {
  width: number;
  height: number;
  maxval: number;
  pixels: Uint8Array;
}

export function parsePgm(bytes: Uint8Array): PgmImage {
  const scan = new HeaderScanner(bytes);
  if (scan.token() !== "P5") throw new Error("not a P5 image");
  const width = scan.int();
  const height = scan.int();
  const maxval = scan.int();
  if (width < 1 || height < 1) throw new Error("bad image size");
  if (maxval < 1 || maxval > 255) throw new Error(`unsupported maxval ${maxval}`);
  // exactly one whitespace byte separates the header from the raster
  const start = scan.pos + 1;
  const pixels = bytes.slice(start, start + width * height);
  if (pixels.length !== width * height) {
    throw new Error(`truncated raster: want ${width * height}, have ${pixels.length}`);
  }
  return { width, height, maxval, pixels };
}

/** Expand grayscale to RGBA for putImageData. */
export function pgmToRgba(img: PgmImage) {
  const out = new Uint8ClampedArray(img.width * img.height * 4);
  for (let i = 0; i < img.pixels.length; i++) {
    const v = img.maxval === 255 ? img.pixels[i] : Math.round((img.pixels[i] * 255) / img.maxval);
    out[i * 4] = v;
    out[i * 4 + 1] = v;
    out[i * 4 + 2] = v;
    out[i * 4 + 3] = 255;
  }
  return out;
}

class HeaderScanner {
  pos = 0;

  constructor(private readonly bytes: Uint8Array) {}

  token(): string {
    while (this.pos < this.bytes.length && isSpace(this.bytes[this.pos])) this.pos++;
    const start = this.pos;
    while (this.pos < this.bytes.length && !isSpace(this.bytes[this.pos])) this.pos++;
    if (this.pos === start) throw new Error("truncated header");
    let s = "";
    for (let i = start; i < this.pos; i++) s += String.fromCharCode(this.bytes[i]);
    return s;
  }

  int(): number {
    const t = this.token();
    const n = Number(t);
    if (!Number.isInteger(n)) throw new Error(`bad header number ${JSON.stringify(t)}`);
    return n;
  }
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;
}
