/**
 * Stdio protocol server.
 *
 *   startup:  READY <C>
 *   request:  CLASSIFY <absolute-path> <D>
 *   success:  OK <p1> ... <pC>
 *   failure:  ERR <message>
 *
 * One request in flight at a time; any failure produces an ERR line and the
 * loop continues.
 */

import { createInterface } from 'node:readline';
import { readFileSync } from 'node:fs';
import type { Readable, Writable } from 'node:stream';
import { decodePnm } from './pnm.js';
import type { Classifier } from './model.js';

function sanitize(message: string): string {
  return message.replace(/\s+/g, ' ').trim() || 'unspecified failure';
}

export async function serve(model: Classifier, input: Readable, output: Writable): Promise<void> {
  output.write(`READY ${model.numClasses}\n`);
  const lines = createInterface({ input, crlfDelay: Infinity });
  for await (const line of lines) {
    if (!line.trim()) continue;
    try {
      const parts = line.split(/\s+/);
      if (parts[0] !== 'CLASSIFY' || parts.length !== 3) {
        throw new Error(`bad request line: ${line}`);
      }
      const [, path, target] = parts;
      const targetIndex = Number(target);
      if (!Number.isInteger(targetIndex) || targetIndex < 1 || targetIndex > model.numClasses) {
        throw new Error(`target class ${target} out of range 1..${model.numClasses}`);
      }
      const raster = decodePnm(readFileSync(path));
      const probs = await model.classify(raster);
      output.write(`OK ${probs.map((p) => String(p)).join(' ')}\n`);
    } catch (err) {
      output.write(`ERR ${sanitize(err instanceof Error ? err.message : String(err))}\n`);
    }
  }
}
