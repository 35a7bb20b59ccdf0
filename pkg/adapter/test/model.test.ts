import { describe, expect, it } from 'vitest';
import { decodePnm } from '../src/pnm.js';
import { loadTemplateModel } from '../src/model.js';
import { pgmBytes, ppmBytes, writeTemplateDir } from './helpers.js';

describe('TemplateModel', () => {
  it('assigns the highest probability to the matching template', async () => {
    const model = loadTemplateModel(writeTemplateDir(), 0.01);
    const probs = await model.classify(decodePnm(pgmBytes(8, 8, () => 255)));
    expect(probs).toHaveLength(3);
    expect(probs.indexOf(Math.max(...probs))).toBe(2);
  });

  it('produces a normalized distribution', async () => {
    const model = loadTemplateModel(writeTemplateDir(), 1e-4);
    const probs = await model.classify(decodePnm(pgmBytes(8, 8, (x, y) => (x * y * 7) % 256)));
    const total = probs.reduce((a, b) => a + b, 0);
    expect(Math.abs(total - 1)).toBeLessThan(1e-6);
    for (const p of probs) expect(p).toBeGreaterThanOrEqual(0);
  });

  it('is deterministic for a fixed image', async () => {
    const model = loadTemplateModel(writeTemplateDir(), 2e-3);
    const image = decodePnm(pgmBytes(8, 8, (x, y) => (x * 31 + y * 17) % 256));
    const a = await model.classify(image);
    const b = await model.classify(image);
    expect(a).toEqual(b);
  });

  it('resizes and converts channels to the template layout', async () => {
    const model = loadTemplateModel(writeTemplateDir(), 0.01);
    // 16x16 RGB input against 8x8 gray templates
    const probs = await model.classify(decodePnm(ppmBytes(16, 16, () => [128, 128, 128])));
    expect(probs.indexOf(Math.max(...probs))).toBe(1);
  });

  it('rejects an empty template directory', () => {
    expect(() => loadTemplateModel('/nonexistent-dir-for-test', 1)).toThrow();
  });
});
