/**
 * CLI entry point: serve a template-matching classifier over stdio.
 *
 *   node dist/main.js --templates <dir> [--sharpness <x>]
 *
 * Every .pgm/.ppm file in the templates directory becomes one class, in
 * lexicographic order; class indices in requests are 1-based.
 */

import { loadTemplateModel } from './model.js';
import { serve } from './server.js';

function parseArgs(argv: string[]): { templates: string; sharpness: number } {
  let templates: string | undefined;
  let sharpness = 2e-3;
  for (let i = 0; i < argv.length; i += 1) {
    if (argv[i] === '--templates') {
      templates = argv[++i];
    } else if (argv[i] === '--sharpness') {
      sharpness = Number(argv[++i]);
    } else {
      throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  if (!templates) throw new Error('--templates <dir> is required');
  if (!Number.isFinite(sharpness) || sharpness <= 0) {
    throw new Error('--sharpness must be a positive number');
  }
  return { templates, sharpness };
}

async function main(): Promise<void> {
  const { templates, sharpness } = parseArgs(process.argv.slice(2));
  const model = loadTemplateModel(templates, sharpness);
  await serve(model, process.stdin, process.stdout);
}

main().catch((err) => {
  process.stderr.write(`fatal: ${err instanceof Error ? err.message : String(err)}\n`);
  process.exit(1);
});
