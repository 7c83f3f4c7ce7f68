#!/usr/bin/env node
/**
 * Command-line front end.
 *
 *   checkpoint-export --model <dir> --filter '<pattern>' --out <dir> \
 *       [--sequences N] [--tokens N] [--seed N]
 *
 * A JSON summary of the written bundle goes to stdout; progress and error
 * lines go to stderr. Exit codes: 0 success, 2 usage, 1 export failure.
 */
import { parseArgs } from 'node:util';

import { ExportError } from './errors.js';
import { exportCheckpoint } from './export.js';

function usage(message?: string): never {
  if (message) {
    console.error(`error: ${message}`);
  }
  console.error(
    'usage: checkpoint-export --model <dir> --filter <pattern> [--filter <pattern> ...]' +
      ' --out <dir> [--sequences N] [--tokens N] [--seed N]',
  );
  process.exit(2);
}

export function main(argv: string[]): void {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        model: { type: 'string', short: 'm' },
        filter: { type: 'string', short: 'f', multiple: true },
        out: { type: 'string', short: 'o' },
        sequences: { type: 'string' },
        tokens: { type: 'string' },
        seed: { type: 'string' },
        help: { type: 'boolean', short: 'h' },
      },
    });
  } catch (err) {
    usage((err as Error).message);
  }
  const { values } = parsed;
  if (values.help) {
    usage();
  }
  if (!values.model || !values.out || !values.filter || values.filter.length === 0) {
    usage('--model, --filter and --out are required');
  }
  const toInt = (label: string, raw?: string): number | undefined => {
    if (raw === undefined) return undefined;
    const n = Number(raw);
    if (!Number.isInteger(n)) usage(`--${label} must be an integer, got '${raw}'`);
    return n;
  };

  try {
    const result = exportCheckpoint({
      modelDir: values.model as string,
      layerFilters: values.filter as string[],
      outDir: values.out as string,
      sequences: toInt('sequences', values.sequences),
      tokens: toInt('tokens', values.tokens),
      seed: toInt('seed', values.seed),
    });
    for (const layer of result.layers) {
      console.error(`exported ${layer.name}: ${layer.rows}x${layer.cols} -> ${layer.weightFile}`);
    }
    console.log(JSON.stringify(result, null, 2));
  } catch (err) {
    if (err instanceof ExportError) {
      console.error(`error: ${err.message}`);
      process.exit(1);
    }
    throw err;
  }
}

main(process.argv.slice(2));
