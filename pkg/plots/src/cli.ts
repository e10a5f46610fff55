#!/usr/bin/env node
import { writeFileSync } from "node:fs";
import { readCsv, SchemaError } from "./csv.js";
import { FigureKind, render } from "./figures.js";

const KINDS = new Set(["batchsize_curve", "training_curve", "heatmap", "rate_plot"]);

function usage(): string {
  return [
    "usage: krq-render render --kind KIND --in FILE [FILE...] --out FIG.svg [--value-column COL]",
    "  KIND: batchsize_curve | training_curve | heatmap | rate_plot",
    "  rate_plot expects rates.csv then slopes.csv; output is always SVG",
  ].join("\n");
}

interface Args {
  kind: FigureKind;
  inputs: string[];
  out: string;
  valueColumn?: string;
}

export function parseArgs(argv: string[]): Args {
  const rest = argv[0] === "render" ? argv.slice(1) : argv;
  let kind: string | undefined;
  let out: string | undefined;
  let valueColumn: string | undefined;
  const inputs: string[] = [];
  for (let i = 0; i < rest.length; i += 1) {
    const arg = rest[i];
    if (arg === "--kind") kind = rest[++i];
    else if (arg === "--out") out = rest[++i];
    else if (arg === "--value-column") valueColumn = rest[++i];
    else if (arg === "--in") {
      while (i + 1 < rest.length && !rest[i + 1].startsWith("--")) {
        inputs.push(rest[++i]);
      }
    } else {
      throw new Error(`unknown argument "${arg}"\n${usage()}`);
    }
  }
  if (!kind || !KINDS.has(kind)) {
    throw new Error(`--kind must be one of ${[...KINDS].join(", ")}\n${usage()}`);
  }
  if (inputs.length === 0 || !out) {
    throw new Error(`--in and --out are required\n${usage()}`);
  }
  if (!out.endsWith(".svg")) {
    throw new Error(`output is SVG; use a .svg path (got "${out}")`);
  }
  return { kind: kind as FigureKind, inputs, out, valueColumn };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  try {
    const tables = args.inputs.map(readCsv);
    const svg = render(args.kind, tables, args.valueColumn);
    writeFileSync(args.out, svg);
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
    } else {
      console.error((err as Error).message);
    }
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
