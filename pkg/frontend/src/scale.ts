/**
 * Coordinate mapping between the on-screen click surface and the remote
 * desktop. Same convention as the hub: scale then round half up, all in
 * integer arithmetic so both sides land on identical pixels.
 */

export function scalePoint(
  x: number,
  y: number,
  fromW: number,
  fromH: number,
  toW: number,
  toH: number,
): [number, number] {
  if (fromW <= 0 || fromH <= 0 || toW <= 0 || toH <= 0) {
    throw new RangeError(`bad viewport ${fromW}x${fromH} -> ${toW}x${toH}`);
  }
  return [
    Math.floor((2 * x * toW + fromW) / (2 * fromW)),
    Math.floor((2 * y * toH + fromH) / (2 * fromH)),
  ];
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Map a desktop-space rectangle into canvas space for drawing. */
export function scaleRect(
  r: Rect,
  fromW: number,
  fromH: number,
  toW: number,
  toH: number,
): Rect {
  const [x1, y1] = scalePoint(r.x, r.y, fromW, fromH, toW, toH);
  const [x2, y2] = scalePoint(r.x + r.w, r.y + r.h, fromW, fromH, toW, toH);
  return { x: x1, y: y1, w: Math.max(1, x2 - x1), h: Math.max(1, y2 - y1) };
}
