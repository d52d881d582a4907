/**
 * Incremental parser for the camera stream payload:
 *
 *     STREAM <width> <height>\n
 *     FRAME <seq> <at_ms> <len>\n
 *     <len raw grayscale bytes>
 *     FRAME ...
 *
 * Chunk boundaries from fetch() land anywhere, including inside a header
 * line or mid-pixels, so the parser buffers across push() calls. Frames
 * must arrive with strictly increasing seq; anything else is counted in
 * `stale` and discarded. Gaps in seq are legal (the hub evicts when a
 * reader lags) and are tallied in `missed`.
 */

export interface VideoFrame {
  seq: number;
  atMs: number;
  pixels: Uint8Array;
}

const STREAM_RE = /^STREAM (\d+) (\d+)$/;
const FRAME_RE = /^FRAME (\d+) (\d+) (\d+)$/;

export class FrameParser {
  width = 0;
  height = 0;
  accepted = 0;
  stale = 0; // frames rejected by the monotone-seq guard
  missed = 0; // frames the hub dropped before us, inferred from seq gaps

  private headerSeen = false;
  private lastSeq = 0;
  private want: { seq: number; atMs: number; len: number } | null = null;
  private buf = new Uint8Array(0);

  push(chunk: Uint8Array): VideoFrame[] {
    if (chunk.length > 0) {
      const merged = new Uint8Array(this.buf.length + chunk.length);
      merged.set(this.buf, 0);
      merged.set(chunk, this.buf.length);
      this.buf = merged;
    }
    const out: VideoFrame[] = [];
    for (;;) {
      if (this.want) {
        if (this.buf.length < this.want.len) break;
        const pixels = this.buf.slice(0, this.want.len);
        this.buf = this.buf.slice(this.want.len);
        const { seq, atMs } = this.want;
        this.want = null;
        if (seq <= this.lastSeq) {
          this.stale += 1;
          continue;
        }
        if (this.lastSeq > 0) this.missed += seq - this.lastSeq - 1;
        this.lastSeq = seq;
        this.accepted += 1;
        out.push({ seq, atMs, pixels });
        continue;
      }
      const nl = this.buf.indexOf(0x0a);
      if (nl < 0) break;
      const line = asciiOf(this.buf.slice(0, nl));
      this.buf = this.buf.slice(nl + 1);
      if (!this.headerSeen) {
        const m = STREAM_RE.exec(line);
        if (!m) throw new Error(`expected STREAM header, got ${JSON.stringify(line)}`);
        this.width = Number(m[1]);
        this.height = Number(m[2]);
        this.headerSeen = true;
      } else {
        const m = FRAME_RE.exec(line);
        if (!m) throw new Error(`bad frame header ${JSON.stringify(line)}`);
        this.want = { seq: Number(m[1]), atMs: Number(m[2]), len: Number(m[3]) };
      }
    }
    return out;
  }
}

function asciiOf(bytes: Uint8Array): string {
  let s = "";
  for (const b of bytes) s += String.fromCharCode(b);
  return s;
}

/**
 * Cameras stamp each frame: bytes 0..7 carry seq and 8..15 carry at_ms,
 * both big-endian u64. Handy for overlay and for end-to-end checks.
 */
export function decodeStamp(pixels: Uint8Array): { seq: number; atMs: number } {
  if (pixels.length < 16) throw new Error("frame too short for stamp");
  const view = new DataView(pixels.buffer, pixels.byteOffset, 16);
  return {
    seq: Number(view.getBigUint64(0)),
    atMs: Number(view.getBigUint64(8)),
  };
}
