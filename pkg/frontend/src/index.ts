export { SchemaError, Table, lambdaCount, parseCsv, requireColumns, requireSchema } from "./csv";
export { FIGURE_KINDS, FigureJob, FigureKind, KIND_INPUT, renderFigure } from "./figures";
export { JobError, JobSchema, main, runJob } from "./render";
export { Axis, Figure, dataRange, fmtNum, ticks } from "./svg";
