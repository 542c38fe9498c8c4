// papaparse ships no type definitions; declare the slice used here.
declare module "papaparse" {
  interface ParseError {
    type: string;
    code: string;
    message: string;
    row?: number;
  }

  interface ParseMeta {
    delimiter: string;
    linebreak: string;
    aborted: boolean;
    truncated: boolean;
    fields?: string[];
  }

  interface ParseResult<T> {
    data: T[];
    errors: ParseError[];
    meta: ParseMeta;
  }

  interface ParseConfig {
    header?: boolean;
    skipEmptyLines?: boolean | "greedy";
    dynamicTyping?: boolean;
  }

  function parse<T>(input: string, config?: ParseConfig): ParseResult<T>;

  export default { parse };
  export { parse, ParseConfig, ParseError, ParseMeta, ParseResult };
}
