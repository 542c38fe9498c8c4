// Deterministic SVG plotting primitives. No randomness, no timestamps:
// the output bytes are a pure function of the data and the frame spec.

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { left: 70, right: 18, top: 18, bottom: 50 };

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];

export interface Axis {
  min: number;
  max: number;
  log: boolean;
}

/** Data range with a small padding; degenerate ranges are widened. */
export function dataRange(values: number[], log: boolean): Axis {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (log && v <= 0) continue;
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (min > max) {
    throw new Error(log ? "no positive values to plot on a log axis" : "no finite values to plot");
  }
  if (log) {
    let lo = Math.log10(min);
    let hi = Math.log10(max);
    const pad = hi > lo ? 0.05 * (hi - lo) : 0.5;
    lo -= pad;
    hi += pad;
    return { min: Math.pow(10, lo), max: Math.pow(10, hi), log: true };
  }
  const pad = max > min ? 0.05 * (max - min) : Math.abs(min) > 0 ? 0.1 * Math.abs(min) : 1;
  return { min: min - pad, max: max + pad, log: false };
}

function niceStep(span: number, target: number): number {
  const raw = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const f = norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10;
  return f * mag;
}

export function ticks(a: Axis): number[] {
  const out: number[] = [];
  if (a.log) {
    const lo = Math.ceil(Math.log10(a.min));
    const hi = Math.floor(Math.log10(a.max));
    const step = Math.max(1, Math.ceil((hi - lo + 1) / 9));
    for (let k = lo; k <= hi; k += step) out.push(Math.pow(10, k));
    return out;
  }
  const step = niceStep(a.max - a.min, 6);
  const start = Math.ceil(a.min / step) * step;
  for (let v = start; v <= a.max + step * 1e-9; v += step) {
    // snap values that should be exact, e.g. -0.3000000000000004
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

export function fmtNum(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    return v.toExponential(1).replace("e+", "e");
  }
  return String(parseFloat(v.toPrecision(6)));
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function r2(p: number): number {
  return Math.round(p * 100) / 100;
}

export interface FrameSpec {
  x: Axis;
  y: Axis;
  xLabel: string;
  yLabel: string;
}

/**
 * A single plot frame: axes, ticks and grid are drawn on construction,
 * then marks are appended through the drawing methods.
 */
export class Figure {
  private parts: string[] = [];
  private spec: FrameSpec;

  constructor(spec: FrameSpec) {
    this.spec = spec;
    this.drawFrame();
  }

  get plotLeft(): number {
    return MARGIN.left;
  }
  get plotRight(): number {
    return WIDTH - MARGIN.right;
  }
  get plotTop(): number {
    return MARGIN.top;
  }
  get plotBottom(): number {
    return HEIGHT - MARGIN.bottom;
  }

  px(v: number): number {
    const a = this.spec.x;
    const t = a.log
      ? (Math.log10(v) - Math.log10(a.min)) / (Math.log10(a.max) - Math.log10(a.min))
      : (v - a.min) / (a.max - a.min);
    return r2(this.plotLeft + t * (this.plotRight - this.plotLeft));
  }

  py(v: number): number {
    const a = this.spec.y;
    const t = a.log
      ? (Math.log10(v) - Math.log10(a.min)) / (Math.log10(a.max) - Math.log10(a.min))
      : (v - a.min) / (a.max - a.min);
    return r2(this.plotBottom - t * (this.plotBottom - this.plotTop));
  }

  private drawFrame(): void {
    const { x, y, xLabel, yLabel } = this.spec;
    for (const ty of ticks(y)) {
      const p = this.py(ty);
      this.parts.push(
        `<line x1="${this.plotLeft}" y1="${p}" x2="${this.plotRight}" y2="${p}" stroke="#dddddd"/>`
      );
      this.parts.push(
        `<text x="${this.plotLeft - 6}" y="${r2(p + 3.5)}" text-anchor="end" font-size="11">${fmtNum(ty)}</text>`
      );
    }
    for (const tx of ticks(x)) {
      const p = this.px(tx);
      this.parts.push(
        `<line x1="${p}" y1="${this.plotBottom}" x2="${p}" y2="${this.plotBottom + 4}" stroke="#000000"/>`
      );
      this.parts.push(
        `<text x="${p}" y="${this.plotBottom + 17}" text-anchor="middle" font-size="11">${fmtNum(tx)}</text>`
      );
    }
    this.parts.push(
      `<rect x="${this.plotLeft}" y="${this.plotTop}" width="${this.plotRight - this.plotLeft}" height="${this.plotBottom - this.plotTop}" fill="none" stroke="#000000"/>`
    );
    const cx = r2((this.plotLeft + this.plotRight) / 2);
    this.parts.push(
      `<text x="${cx}" y="${HEIGHT - 12}" text-anchor="middle" font-size="13">${esc(xLabel)}</text>`
    );
    const cy = r2((this.plotTop + this.plotBottom) / 2);
    this.parts.push(
      `<text x="16" y="${cy}" text-anchor="middle" font-size="13" transform="rotate(-90 16 ${cy})">${esc(yLabel)}</text>`
    );
  }

  polyline(xs: number[], ys: number[], color: string): void {
    const pts: string[] = [];
    for (let i = 0; i < xs.length; i++) {
      pts.push(`${this.px(xs[i])},${this.py(ys[i])}`);
    }
    this.parts.push(
      `<polyline class="curve" points="${pts.join(" ")}" fill="none" stroke="${color}" stroke-width="1.6"/>`
    );
  }

  /** Axis-aligned bar given in data coordinates; y0 is the baseline. */
  bar(x0: number, x1: number, y0: number, y1: number, color: string): void {
    const pl = this.px(x0);
    const pr = this.px(x1);
    const pb = this.py(y0);
    const pt = this.py(y1);
    const top = Math.min(pb, pt);
    const h = r2(Math.abs(pb - pt));
    this.parts.push(
      `<rect class="bar" x="${pl}" y="${top}" width="${r2(pr - pl)}" height="${h}" fill="${color}" stroke="#ffffff" stroke-width="0.5"/>`
    );
  }

  legend(entries: { label: string; color: string }[]): void {
    if (entries.length === 0) return;
    let chars = 0;
    for (const e of entries) chars = Math.max(chars, e.label.length);
    const w = 30 + chars * 7;
    const h = 8 + entries.length * 16;
    const x0 = this.plotRight - w - 8;
    const y0 = this.plotTop + 8;
    this.parts.push(
      `<rect x="${x0}" y="${y0}" width="${w}" height="${h}" fill="#ffffff" stroke="#999999"/>`
    );
    entries.forEach((e, i) => {
      const y = y0 + 12 + i * 16;
      this.parts.push(
        `<rect x="${x0 + 6}" y="${y - 7}" width="12" height="9" fill="${e.color}"/>`
      );
      this.parts.push(
        `<text class="legend" x="${x0 + 23}" y="${y + 1}" font-size="11">${esc(e.label)}</text>`
      );
    });
  }

  toString(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif">`,
      `<rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`,
      ...this.parts,
      `</svg>`,
      ``,
    ].join("\n");
  }
}
