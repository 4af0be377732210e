#!/usr/bin/env node
/**
 * dcobench-plot --kind pareto|ar_box|fn_bars --input results.csv [--input ...]
 *               --output figure.svg [--dataset NAME] [--raw]
 *               [--width W] [--height H]
 */

import { realpathSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { EmptySelectionError, FigureKind, FigureSpec, renderToFile } from "./figures.js";

function usage(): never {
  process.stderr.write(
    "usage: dcobench-plot --kind pareto|ar_box|fn_bars --input CSV [--input CSV ...] " +
      "--output FILE.svg [--dataset NAME] [--raw] [--width W] [--height H]\n",
  );
  process.exit(2);
}

export function parseArgs(argv: string[]): FigureSpec {
  const inputs: string[] = [];
  let kind: string | undefined;
  let output: string | undefined;
  let dataset: string | undefined;
  let raw = false;
  let width: number | undefined;
  let height: number | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) usage();
      return argv[++i];
    };
    switch (arg) {
      case "--kind":
        kind = next();
        break;
      case "--input":
        inputs.push(next());
        break;
      case "--output":
        output = next();
        break;
      case "--dataset":
        dataset = next();
        break;
      case "--raw":
        raw = true;
        break;
      case "--width":
        width = Number(next());
        break;
      case "--height":
        height = Number(next());
        break;
      default:
        usage();
    }
  }
  if (!kind || !output || inputs.length === 0) usage();
  if (!["pareto", "ar_box", "fn_bars"].includes(kind)) {
    process.stderr.write(`error: unknown figure kind '${kind}'\n`);
    process.exit(2);
  }
  return { kind: kind as FigureKind, inputs, output, dataset, raw, width, height };
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    renderToFile(spec);
    process.stdout.write(`wrote ${spec.output}\n`);
    return 0;
  } catch (err) {
    if (err instanceof EmptySelectionError) {
      process.stderr.write(`error: empty selection: ${err.message}\n`);
      return 1;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

const entry = process.argv[1];
if (entry !== undefined) {
  const self = fileURLToPath(import.meta.url);
  let invoked = false;
  try {
    invoked = realpathSync(entry) === realpathSync(self);
  } catch {
    invoked = false;
  }
  if (invoked) {
    process.exit(main(process.argv.slice(2)));
  }
}
