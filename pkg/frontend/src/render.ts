#!/usr/bin/env node
// Render one figure from a job config: render-figure <job.json>

import * as fs from "fs";
import * as path from "path";

import { z } from "zod";

import { SchemaError, parseCsv } from "./csv";
import { FIGURE_KINDS, FigureJob, FigureKind, renderFigure } from "./figures";

export class JobError extends Error {}

export const JobSchema = z
  .object({
    input: z.union([z.string(), z.array(z.string()).min(1)]),
    kind: z.enum(FIGURE_KINDS as [FigureKind, ...FigureKind[]]),
    output: z.string(),
    xLabel: z.string().optional(),
    yLabel: z.string().optional(),
    xScale: z.enum(["linear", "log"]).optional(),
    yScale: z.enum(["linear", "log"]).optional(),
  })
  .strict()
  .refine((j) => !(j.kind === "gap-decay" && j.yScale === "linear"), {
    message: "gap-decay figures are always drawn on a log y axis",
  });

/**
 * Execute a job: read and validate the inputs, render, write the image.
 * Paths are resolved against baseDir (the CLI uses the job file's
 * directory). Returns the absolute output path.
 */
export function runJob(job: FigureJob, baseDir: string): string {
  const inputs = typeof job.input === "string" ? [job.input] : job.input;
  const tables = inputs.map((p) => {
    const full = path.resolve(baseDir, p);
    if (!fs.existsSync(full)) {
      throw new JobError(`${p}: input file not found`);
    }
    return parseCsv(fs.readFileSync(full, "utf8"), p);
  });
  const svg = renderFigure(job, tables);
  const out = path.resolve(baseDir, job.output);
  fs.mkdirSync(path.dirname(out), { recursive: true });
  fs.writeFileSync(out, svg);
  return out;
}

function report(kind: string, msg: string): void {
  console.error(`figure-error kind=${kind} msg="${msg}"`);
}

export function main(argv: string[]): number {
  if (argv.length !== 1) {
    console.error("usage: render-figure <job.json>");
    return 2;
  }
  const jobPath = argv[0];
  let raw: unknown;
  try {
    raw = JSON.parse(fs.readFileSync(jobPath, "utf8"));
  } catch (e) {
    report("job", `${jobPath}: ${(e as Error).message}`);
    return 2;
  }
  const parsed = JobSchema.safeParse(raw);
  if (!parsed.success) {
    const detail = parsed.error.issues
      .map((i) => (i.path.length > 0 ? `${i.path.join(".")}: ${i.message}` : i.message))
      .join("; ");
    report("job", detail);
    return 2;
  }
  try {
    const out = runJob(parsed.data, path.dirname(path.resolve(jobPath)));
    console.log(out);
    return 0;
  } catch (e) {
    if (e instanceof JobError) {
      report("job", e.message);
      return 2;
    }
    if (e instanceof SchemaError) {
      report("schema", e.message);
      return 2;
    }
    report("render", (e as Error).message);
    return 3;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
