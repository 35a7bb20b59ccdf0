/**
 * Template-matching classifier on TensorFlow.js tensors.
 *
 * One template raster per class; an input is resized to the template
 * resolution, converted to the template channel count, and scored with
 * softmax(-sharpness * mean squared error) per class. Inference is
 * deterministic: the same image always produces the same probabilities.
 */

import * as tf from '@tensorflow/tfjs';
import { readFileSync, readdirSync } from 'node:fs';
import { join } from 'node:path';
import { decodePnm, type Raster } from './pnm.js';

export interface Classifier {
  readonly numClasses: number;
  /** Probability vector over classes, summing to 1. */
  classify(image: Raster): Promise<number[]>;
}

function rasterToTensor(raster: Raster): tf.Tensor3D {
  return tf.tensor3d(Array.from(raster.data), [raster.height, raster.width, raster.channels], 'float32');
}

/** Resize to the target resolution and match the target channel count. */
export function preprocess(
  image: Raster,
  height: number,
  width: number,
  channels: 1 | 3,
): tf.Tensor3D {
  return tf.tidy(() => {
    let t = rasterToTensor(image);
    if (image.channels === 1 && channels === 3) {
      t = tf.tile(t, [1, 1, 3]);
    } else if (image.channels === 3 && channels === 1) {
      t = tf.mean(t, 2, true);
    }
    if (image.height !== height || image.width !== width) {
      t = tf.image.resizeBilinear(t, [height, width]);
    }
    return t as tf.Tensor3D;
  });
}

export class TemplateModel implements Classifier {
  readonly numClasses: number;
  private readonly templates: tf.Tensor3D[];
  private readonly sharpness: number;

  constructor(templates: Raster[], sharpness: number) {
    if (templates.length === 0) throw new Error('need at least one template');
    if (sharpness <= 0) throw new Error('sharpness must be positive');
    const [first] = templates;
    for (const t of templates) {
      if (t.width !== first.width || t.height !== first.height || t.channels !== first.channels) {
        throw new Error('all templates must share dimensions');
      }
    }
    this.templates = templates.map(rasterToTensor);
    this.sharpness = sharpness;
    this.numClasses = templates.length;
  }

  async classify(image: Raster): Promise<number[]> {
    const [ref] = this.templates;
    const [height, width, channels] = ref.shape;
    const probs = tf.tidy(() => {
      const input = preprocess(image, height, width, channels as 1 | 3);
      const mses = this.templates.map((t) => tf.mean(tf.square(tf.sub(input, t))));
      const logits = tf.mul(tf.stack(mses), -this.sharpness);
      return tf.softmax(logits as tf.Tensor1D);
    });
    const out = Array.from(await probs.data());
    probs.dispose();
    return out;
  }
}

/**
 * Load a template model from a directory: every .pgm/.ppm file, sorted by
 * name, becomes one class in order.
 */
export function loadTemplateModel(dir: string, sharpness: number): TemplateModel {
  const names = readdirSync(dir)
    .filter((n) => n.endsWith('.pgm') || n.endsWith('.ppm'))
    .sort();
  if (names.length === 0) throw new Error(`no .pgm/.ppm templates in ${dir}`);
  const rasters = names.map((n) => decodePnm(readFileSync(join(dir, n))));
  return new TemplateModel(rasters, sharpness);
}
