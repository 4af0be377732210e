/** Small SVG assembly helpers: scales, axes, and element builders. */

export interface Margins {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const PALETTE = [
  "#1b6ca8",
  "#d1495b",
  "#66a182",
  "#edae49",
  "#8d5a97",
  "#00798c",
  "#9a6d38",
  "#5d5d5d",
];

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export type Scale = (value: number) => number;

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function logScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const l0 = Math.log10(d0);
  const span = Math.log10(d1) - l0 || 1;
  return (v) => r0 + ((Math.log10(v) - l0) / span) * (r1 - r0);
}

export function niceTicks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo || 1;
  const step = 10 ** Math.floor(Math.log10(span / count));
  const candidates = [step, 2 * step, 2.5 * step, 5 * step, 10 * step];
  const chosen = candidates.find((s) => span / s <= count) ?? 10 * step;
  const first = Math.ceil(lo / chosen) * chosen;
  const ticks: number[] = [];
  for (let t = first; t <= hi + 1e-12; t += chosen) {
    ticks.push(Number(t.toPrecision(12)));
  }
  return ticks;
}

export function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e++) {
    const t = 10 ** e;
    if (t >= lo / 1.0001 && t <= hi * 1.0001) ticks.push(t);
  }
  return ticks.length >= 2 ? ticks : [lo, hi];
}

export function formatTick(v: number): string {
  if (v !== 0 && (Math.abs(v) >= 1e5 || Math.abs(v) < 1e-3)) {
    return v.toExponential(0);
  }
  return Number(v.toPrecision(6)).toString();
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  add(fragment: string): void {
    this.parts.push(fragment);
  }

  openGroup(attrs: string): void {
    this.parts.push(`<g ${attrs}>`);
  }

  closeGroup(): void {
    this.parts.push("</g>");
  }

  text(x: number, y: number, content: string, attrs = ""): void {
    this.add(`<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" ${attrs}>${esc(content)}</text>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, attrs: string): void {
    this.add(
      `<line x1="${x1.toFixed(2)}" y1="${y1.toFixed(2)}" x2="${x2.toFixed(2)}" ` +
        `y2="${y2.toFixed(2)}" ${attrs}/>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}" ` +
      `font-family="sans-serif" font-size="11">\n` +
      `<rect width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

export function drawAxes(
  doc: SvgDoc,
  margins: Margins,
  xTicks: { value: number; pos: number }[],
  yTicks: { value: number; pos: number }[],
  xLabel: string,
  yLabel: string,
): void {
  const x0 = margins.left;
  const x1 = doc.width - margins.right;
  const y0 = doc.height - margins.bottom;
  const y1 = margins.top;
  const axis = 'stroke="#333" stroke-width="1"';
  doc.line(x0, y0, x1, y0, axis);
  doc.line(x0, y0, x0, y1, axis);
  for (const t of xTicks) {
    doc.line(t.pos, y0, t.pos, y0 + 4, axis);
    doc.line(t.pos, y0, t.pos, y1, 'stroke="#ddd" stroke-width="0.5"');
    doc.text(t.pos, y0 + 16, formatTick(t.value), 'text-anchor="middle"');
  }
  for (const t of yTicks) {
    doc.line(x0 - 4, t.pos, x0, t.pos, axis);
    doc.line(x0, t.pos, x1, t.pos, 'stroke="#ddd" stroke-width="0.5"');
    doc.text(x0 - 7, t.pos + 3.5, formatTick(t.value), 'text-anchor="end"');
  }
  doc.text((x0 + x1) / 2, doc.height - 6, xLabel, 'text-anchor="middle"');
  doc.add(
    `<text x="12" y="${(y0 + y1) / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 12 ${(y0 + y1) / 2})">${esc(yLabel)}</text>`,
  );
}
