import * as path from "path";

import { Table, lambdaCount, num, requireColumns, requireSchema } from "./csv";
import { Axis, Figure, PALETTE, dataRange, fmtNum } from "./svg";

export type FigureKind =
  | "lyap-convergence"
  | "gap-decay"
  | "sweep-hist"
  | "jacobian-svals";

export const FIGURE_KINDS: FigureKind[] = [
  "lyap-convergence",
  "gap-decay",
  "sweep-hist",
  "jacobian-svals",
];

/** Input contract per figure kind: schema tag and the columns actually read. */
export const KIND_INPUT: Record<FigureKind, { schema: string; columns: string[] }> = {
  "lyap-convergence": { schema: "lyap/1", columns: ["n", "lambda_1"] },
  "gap-decay": { schema: "holonomy_gaps/1", columns: ["pair", "kind", "n", "cauchy_gap"] },
  "sweep-hist": { schema: "sweep/1", columns: ["amplitude", "lambda1"] },
  "jacobian-svals": {
    schema: "phi_rank/1",
    columns: ["index", "singular_value", "singular_value_fd"],
  },
};

export interface FigureJob {
  input: string | string[];
  kind: FigureKind;
  output: string;
  xLabel?: string;
  yLabel?: string;
  xScale?: "linear" | "log";
  yScale?: "linear" | "log";
}

const DEFAULTS: Record<FigureKind, { xLabel: string; yLabel: string }> = {
  "lyap-convergence": { xLabel: "n", yLabel: "exponent estimate" },
  "gap-decay": { xLabel: "n", yLabel: "Cauchy gap" },
  "sweep-hist": { xLabel: "lambda_1", yLabel: "trials" },
  "jacobian-svals": { xLabel: "singular value index", yLabel: "singular value" },
};

const SUBSCRIPTS = "₀₁₂₃₄₅₆₇₈₉";

function lambdaLabel(i: number): string {
  let s = "";
  for (const c of String(i)) s += SUBSCRIPTS[Number(c)];
  return "λ" + s;
}

function stem(p: string): string {
  return path.basename(p).replace(/\.csv$/, "");
}

function axis(values: number[], scale: "linear" | "log" | undefined): Axis {
  return dataRange(values, scale === "log");
}

interface Series {
  label: string;
  xs: number[];
  ys: number[];
}

function curveFigure(job: FigureJob, series: Series[], xVals: number[], yVals: number[]): string {
  const d = DEFAULTS[job.kind];
  const yScale = job.kind === "gap-decay" ? "log" : job.yScale;
  if (series.length === 0) {
    throw new Error(
      yScale === "log" ? "no positive values to plot on a log axis" : "no finite values to plot"
    );
  }
  const fig = new Figure({
    x: axis(xVals, job.xScale),
    y: axis(yVals, yScale),
    xLabel: job.xLabel ?? d.xLabel,
    yLabel: job.yLabel ?? d.yLabel,
  });
  series.forEach((s, i) => fig.polyline(s.xs, s.ys, PALETTE[i % PALETTE.length]));
  fig.legend(series.map((s, i) => ({ label: s.label, color: PALETTE[i % PALETTE.length] })));
  return fig.toString();
}

function renderLyap(job: FigureJob, tables: Table[]): string {
  const series: Series[] = [];
  const xVals: number[] = [];
  const yVals: number[] = [];
  for (const t of tables) {
    const d = lambdaCount(t);
    for (let i = 1; i <= d; i++) {
      const xs = t.rows.map((r) => num(r, "n"));
      const ys = t.rows.map((r) => num(r, `lambda_${i}`));
      xVals.push(...xs);
      yVals.push(...ys);
      const label = tables.length > 1 ? `${stem(t.path)} ${lambdaLabel(i)}` : lambdaLabel(i);
      series.push({ label, xs, ys });
    }
  }
  return curveFigure(job, series, xVals, yVals);
}

function renderGapDecay(job: FigureJob, tables: Table[]): string {
  const series: Series[] = [];
  const xVals: number[] = [];
  const yVals: number[] = [];
  for (const t of tables) {
    const groups = new Map<string, { xs: number[]; ys: number[] }>();
    for (const r of t.rows) {
      const key = `pair ${r.pair} ${r.kind}`;
      let g = groups.get(key);
      if (!g) {
        g = { xs: [], ys: [] };
        groups.set(key, g);
      }
      const gap = num(r, "cauchy_gap");
      // exact zeros mean the truncation froze; a log axis cannot show them
      if (gap > 0) {
        g.xs.push(num(r, "n"));
        g.ys.push(gap);
      }
    }
    for (const [key, g] of groups) {
      if (g.xs.length === 0) continue;
      const label = tables.length > 1 ? `${stem(t.path)} ${key}` : key;
      series.push({ label, xs: g.xs, ys: g.ys });
      xVals.push(...g.xs);
      yVals.push(...g.ys);
    }
  }
  return curveFigure(job, series, xVals, yVals);
}

function median(values: number[]): number {
  const s = [...values].sort((a, b) => a - b);
  const m = s.length >> 1;
  return s.length % 2 === 1 ? s[m] : 0.5 * (s[m - 1] + s[m]);
}

function renderSweepHist(job: FigureJob, tables: Table[]): string {
  const perFile = tables.map((t) => t.rows.map((r) => num(r, "lambda1")));
  const all = perFile.flat();
  let lo = Math.min(...all);
  let hi = Math.max(...all);
  if (!(hi > lo)) {
    const pad = Math.abs(lo) > 0 ? 0.1 * Math.abs(lo) : 0.5;
    lo -= pad;
    hi += pad;
  }
  const nBins = 12;
  const binw = (hi - lo) / nBins;
  const counts = perFile.map((vals) => {
    const c = new Array<number>(nBins).fill(0);
    for (const v of vals) {
      c[Math.min(nBins - 1, Math.floor((v - lo) / binw))] += 1;
    }
    return c;
  });
  const maxCount = Math.max(...counts.map((c) => Math.max(...c)));

  const d = DEFAULTS[job.kind];
  const fig = new Figure({
    x: axis([lo, hi], job.xScale),
    y:
      job.yScale === "log"
        ? dataRange([0.5, maxCount], true)
        : { min: 0, max: maxCount * 1.08, log: false },
    xLabel: job.xLabel ?? d.xLabel,
    yLabel: job.yLabel ?? d.yLabel,
  });
  const base = job.yScale === "log" ? dataRange([0.5, maxCount], true).min : 0;
  const sub = binw / tables.length;
  counts.forEach((c, f) => {
    for (let b = 0; b < nBins; b++) {
      if (c[b] === 0) continue;
      const x0 = lo + b * binw + f * sub;
      fig.bar(x0, x0 + sub, base, c[b], PALETTE[f % PALETTE.length]);
    }
  });
  fig.legend(
    tables.map((t, f) => {
      const amp = `amp ≈ ${fmtNum(median(t.rows.map((r) => num(r, "amplitude"))))}`;
      return {
        label: tables.length > 1 ? `${stem(t.path)}: ${amp}` : amp,
        color: PALETTE[f % PALETTE.length],
      };
    })
  );
  return fig.toString();
}

function renderJacobianSvals(job: FigureJob, tables: Table[]): string {
  const perFile = tables.map((t) =>
    t.rows
      .map((r) => ({
        index: num(r, "index"),
        sv: num(r, "singular_value"),
        fd: num(r, "singular_value_fd"),
      }))
      .sort((a, b) => a.index - b.index)
  );
  const m = Math.max(...perFile.map((rows) => rows.length));
  const yVals = perFile.flatMap((rows) => rows.flatMap((r) => [r.sv, r.fd]));

  const d = DEFAULTS[job.kind];
  const yAxis =
    job.yScale === "log"
      ? axis(yVals, "log")
      : { min: 0, max: Math.max(...yVals) * 1.08, log: false };
  const fig = new Figure({
    x: { min: -0.6, max: m - 0.4, log: false },
    y: yAxis,
    xLabel: job.xLabel ?? d.xLabel,
    yLabel: job.yLabel ?? d.yLabel,
  });
  const base = yAxis.log ? yAxis.min : 0;
  const nBars = 2 * tables.length;
  const sub = 0.8 / nBars;
  const entries: { label: string; color: string }[] = [];
  perFile.forEach((rows, f) => {
    const ca = PALETTE[(2 * f) % PALETTE.length];
    const cb = PALETTE[(2 * f + 1) % PALETTE.length];
    for (const r of rows) {
      const x0 = r.index - 0.4 + 2 * f * sub;
      fig.bar(x0, x0 + sub, base, r.sv, ca);
      fig.bar(x0 + sub, x0 + 2 * sub, base, r.fd, cb);
    }
    const prefix = tables.length > 1 ? `${stem(tables[f].path)} ` : "";
    entries.push({ label: `${prefix}analytic`, color: ca });
    entries.push({ label: `${prefix}finite difference`, color: cb });
  });
  fig.legend(entries);
  return fig.toString();
}

/**
 * Render one figure from already-parsed tables. Schema tags and required
 * columns are checked here so programmatic use gets the same guarantees
 * as the CLI.
 */
export function renderFigure(job: FigureJob, tables: Table[]): string {
  const expect = KIND_INPUT[job.kind];
  for (const t of tables) {
    requireSchema(t, expect.schema);
    requireColumns(t, expect.columns);
  }
  switch (job.kind) {
    case "lyap-convergence":
      return renderLyap(job, tables);
    case "gap-decay":
      return renderGapDecay(job, tables);
    case "sweep-hist":
      return renderSweepHist(job, tables);
    case "jacobian-svals":
      return renderJacobianSvals(job, tables);
  }
}
