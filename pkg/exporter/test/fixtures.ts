/**
 * Builds real TensorFlow.js layers-model checkpoints on disk for the
 * tests: tf constructs and serializes the model, a file IOHandler writes
 * the standard `model.json` + weight-shard layout, and the kernels are
 * filled from a seeded generator so fixtures are reproducible.
 */
import * as fs from 'node:fs';
import * as path from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { Rng } from '../src/rng.js';

export interface FixtureSpec {
  /** Layer widths, e.g. [12, 16, 16, 8] builds three dense layers. */
  dims: number[];
  /** Per-dense activation identifiers; defaults to relu except the head. */
  activations?: string[];
  names?: string[];
  useBias?: boolean;
  seed?: number;
}

/** Write a sequential dense checkpoint under `dir`; returns the layer names. */
export async function buildCheckpoint(dir: string, spec: FixtureSpec): Promise<string[]> {
  const { dims } = spec;
  const nLayers = dims.length - 1;
  const useBias = spec.useBias ?? false;
  const names = spec.names ?? Array.from({ length: nLayers }, (_, i) => `dense${i + 1}`);
  const activations =
    spec.activations ?? Array.from({ length: nLayers }, (_, i) => (i < nLayers - 1 ? 'relu' : 'linear'));

  const model = tf.sequential();
  for (let i = 0; i < nLayers; i++) {
    model.add(
      tf.layers.dense({
        name: names[i],
        units: dims[i + 1] as number,
        activation: activations[i] as 'relu' | 'linear',
        useBias,
        ...(i === 0 ? { inputShape: [dims[0] as number] } : {}),
      }),
    );
  }

  const rng = new Rng(spec.seed ?? 1234);
  const tensors = [];
  for (let i = 0; i < nLayers; i++) {
    const rows = dims[i] as number;
    const cols = dims[i + 1] as number;
    const values = new Float32Array(rows * cols);
    for (let j = 0; j < values.length; j++) {
      values[j] = Math.fround(rng.gaussian() / Math.sqrt(rows));
    }
    tensors.push(tf.tensor(values, [rows, cols]));
    if (useBias) {
      tensors.push(tf.zeros([cols]));
    }
  }
  model.setWeights(tensors);

  fs.mkdirSync(dir, { recursive: true });
  await model.save({
    save: async (artifacts) => {
      const shard = 'group1-shard1of1.bin';
      fs.writeFileSync(path.join(dir, shard), Buffer.from(artifacts.weightData as ArrayBuffer));
      fs.writeFileSync(
        path.join(dir, 'model.json'),
        JSON.stringify(
          {
            modelTopology: artifacts.modelTopology,
            weightsManifest: [{ paths: [shard], weights: artifacts.weightSpecs }],
            format: 'layers-model',
            generatedBy: artifacts.generatedBy ?? 'TensorFlow.js',
            convertedBy: null,
          },
          null,
          2,
        ),
      );
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON' as const,
        },
      };
    },
  });
  tf.dispose(tensors);
  return names;
}
