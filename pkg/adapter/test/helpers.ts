import { Buffer } from 'node:buffer';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

export function pgmBytes(width: number, height: number, fill: (x: number, y: number) => number): Buffer {
  const payload = Buffer.alloc(width * height);
  for (let y = 0; y < height; y += 1) {
    for (let x = 0; x < width; x += 1) {
      payload[y * width + x] = fill(x, y) & 0xff;
    }
  }
  return Buffer.concat([Buffer.from(`P5\n${width} ${height}\n255\n`, 'ascii'), payload]);
}

export function ppmBytes(width: number, height: number, fill: (x: number, y: number) => [number, number, number]): Buffer {
  const payload = Buffer.alloc(width * height * 3);
  for (let y = 0; y < height; y += 1) {
    for (let x = 0; x < width; x += 1) {
      const [r, g, b] = fill(x, y);
      payload.set([r & 0xff, g & 0xff, b & 0xff], (y * width + x) * 3);
    }
  }
  return Buffer.concat([Buffer.from(`P6\n${width} ${height}\n255\n`, 'ascii'), payload]);
}

/** Three 8x8 flat gray templates at 0 / 128 / 255, written to a temp dir. */
export function writeTemplateDir(): string {
  const dir = mkdtempSync(join(tmpdir(), 'adapter-templates-'));
  const levels = [0, 128, 255];
  levels.forEach((level, i) => {
    writeFileSync(join(dir, `template_${i + 1}.pgm`), pgmBytes(8, 8, () => level));
  });
  return dir;
}
