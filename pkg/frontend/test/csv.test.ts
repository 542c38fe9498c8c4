import * as fs from "fs";
import * as path from "path";
import { fileURLToPath } from "url";

import { describe, expect, it } from "vitest";

import { SchemaError, lambdaCount, parseCsv, requireColumns, requireSchema } from "../src/csv";

const FIXTURES = path.join(path.dirname(fileURLToPath(import.meta.url)), "fixtures");

function fixture(name: string) {
  return parseCsv(fs.readFileSync(path.join(FIXTURES, name), "utf8"), name);
}

describe("parseCsv", () => {
  it("reads a schema-tagged CSV into columns and rows", () => {
    const t = parseCsv("# schema=lyap/1\nx0,n,lambda_1\n0.5;0.5,100,0.69\n", "t.csv");
    expect(t.schema).toBe("lyap/1");
    expect(t.columns).toEqual(["x0", "n", "lambda_1"]);
    expect(t.rows).toHaveLength(1);
    expect(t.rows[0].lambda_1).toBe("0.69");
  });

  it("rejects a file without the schema header line", () => {
    expect(() => parseCsv("x0,n\n1,2\n", "t.csv")).toThrow(/missing "# schema=/);
  });

  it("rejects a header-only file with 'no data rows'", () => {
    expect(() => parseCsv("# schema=lyap/1\nx0,n,lambda_1\n", "t.csv")).toThrow(
      /no data rows/
    );
  });

  it("parses the real fixtures", () => {
    expect(fixture("lyap.csv").schema).toBe("lyap/1");
    expect(fixture("holonomy_gaps.csv").schema).toBe("holonomy_gaps/1");
    expect(fixture("sweep.csv").schema).toBe("sweep/1");
    expect(fixture("phi_rank.csv").schema).toBe("phi_rank/1");
  });

  it("counts contiguous lambda columns", () => {
    expect(lambdaCount(fixture("lyap.csv"))).toBe(2);
  });
});

describe("schema checks", () => {
  it("names the missing column", () => {
    const t = fixture("holonomy_gaps.csv");
    expect(() => requireColumns(t, ["cauchy_gap", "wobble"])).toThrow(
      /missing column wobble/
    );
  });

  it("names both schemas on mismatch", () => {
    const t = fixture("sweep.csv");
    let err: unknown;
    try {
      requireSchema(t, "lyap/1");
    } catch (e) {
      err = e;
    }
    expect(err).toBeInstanceOf(SchemaError);
    expect(String(err)).toMatch(/expected lyap\/1, found sweep\/1/);
  });
});
