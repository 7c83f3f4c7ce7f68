/**
 * Reader for TensorFlow.js layers-model checkpoints on disk: `model.json`
 * holding the topology plus a weights manifest, and binary shard files
 * holding the raw float32 parameters.
 *
 * Only the subset the compression engine can consume is modeled:
 * sequential stacks of Dense layers with elementwise activations.
 */
import * as fs from 'node:fs';
import * as path from 'node:path';

import { FormatError, UnsupportedError, ValidationError } from './errors.js';

/** One Dense layer, with its kernel already transposed to units x in
 * (row-major), matching the engine's d_row x d_col weight convention. */
export interface DenseNode {
  kind: 'dense';
  name: string;
  inFeatures: number;
  units: number;
  /** Fused activation identifier: 'relu' | 'gelu' | 'linear'. */
  activation: string;
  useBias: boolean;
  kernel: Float64Array;
  bias: Float64Array | null;
}

/** A standalone elementwise activation layer. */
export interface ActivationNode {
  kind: 'activation';
  name: string;
  activation: string;
}

export type ModelNode = DenseNode | ActivationNode;

export interface LoadedModel {
  /** Directory the checkpoint was loaded from. */
  dir: string;
  /** Width of the model input. */
  inputDim: number;
  /** Layers in execution order (Dropout layers are dropped: identity at inference). */
  nodes: ModelNode[];
}

interface WeightSpec {
  name: string;
  shape: number[];
  dtype: string;
}

interface WeightsGroup {
  paths: string[];
  weights: WeightSpec[];
}

const SUPPORTED_ACTIVATIONS = new Set(['relu', 'gelu', 'linear']);

function asObject(value: unknown, label: string): Record<string, unknown> {
  if (typeof value !== 'object' || value === null || Array.isArray(value)) {
    throw new FormatError(`${label} is not a JSON object`);
  }
  return value as Record<string, unknown>;
}

/** Read every shard of every weight group into a name -> values table. */
function readWeightTable(dir: string, groups: WeightsGroup[]): Map<string, { shape: number[]; data: Float64Array }> {
  const table = new Map<string, { shape: number[]; data: Float64Array }>();
  for (const group of groups) {
    const blob = Buffer.concat(
      group.paths.map((p) => fs.readFileSync(path.join(dir, p))),
    );
    let offset = 0;
    for (const spec of group.weights) {
      if (spec.dtype !== 'float32') {
        throw new UnsupportedError(`weight '${spec.name}': dtype ${spec.dtype} is not supported`);
      }
      const count = spec.shape.reduce((a, b) => a * b, 1);
      const end = offset + count * 4;
      if (end > blob.length) {
        throw new FormatError(
          `weight '${spec.name}': shard data ends at ${blob.length} bytes, needs ${end}`,
        );
      }
      const data = new Float64Array(count);
      for (let i = 0; i < count; i++) {
        data[i] = blob.readFloatLE(offset + i * 4);
      }
      table.set(spec.name, { shape: spec.shape, data });
      offset = end;
    }
  }
  return table;
}

/** [in, units] column-major-by-output kernel -> row-major units x in. */
function transposeKernel(shape: number[], data: Float64Array): Float64Array {
  const [inFeatures, units] = shape as [number, number];
  const out = new Float64Array(units * inFeatures);
  for (let i = 0; i < inFeatures; i++) {
    for (let u = 0; u < units; u++) {
      out[u * inFeatures + i] = data[i * units + u] as number;
    }
  }
  return out;
}

/**
 * Load a layers-model checkpoint from a directory containing `model.json`.
 *
 * Accepts both topology spellings in the wild: tfjs-native
 * (`modelTopology.config.layers`) and Keras-converted
 * (`modelTopology.model_config.config.layers`).
 */
export function loadCheckpoint(modelDir: string): LoadedModel {
  const jsonPath = path.join(modelDir, 'model.json');
  let doc: Record<string, unknown>;
  try {
    doc = asObject(JSON.parse(fs.readFileSync(jsonPath, 'utf-8')), 'model.json');
  } catch (err) {
    if (err instanceof FormatError) throw err;
    throw new FormatError(`${jsonPath}: ${(err as Error).message}`);
  }

  let topology = asObject(doc.modelTopology, 'modelTopology');
  if (topology.model_config !== undefined) {
    topology = asObject(topology.model_config, 'model_config');
  }
  const className = topology.class_name;
  if (className !== 'Sequential') {
    throw new UnsupportedError(
      `only Sequential models are supported, got class_name=${JSON.stringify(className)}`,
    );
  }
  const config = asObject(topology.config, 'model config');
  const layerDocs = config.layers;
  if (!Array.isArray(layerDocs) || layerDocs.length === 0) {
    throw new FormatError('model config carries no layers');
  }

  const groups = doc.weightsManifest;
  if (!Array.isArray(groups)) {
    throw new FormatError('model.json carries no weightsManifest');
  }
  const weights = readWeightTable(modelDir, groups as WeightsGroup[]);

  const nodes: ModelNode[] = [];
  let inputDim = 0;
  let width = 0; // features flowing out of the last processed layer
  for (const entry of layerDocs) {
    const layer = asObject(entry, 'layer entry');
    const cls = layer.class_name;
    const cfg = asObject(layer.config, 'layer config');
    const name = String(cfg.name ?? '');

    if (width === 0) {
      const batchShape = cfg.batch_input_shape;
      if (Array.isArray(batchShape) && batchShape.length === 2) {
        width = Number(batchShape[1]);
        inputDim = width;
      }
    }

    if (cls === 'Dense') {
      const units = Number(cfg.units);
      const activation = String(cfg.activation ?? 'linear');
      const useBias = cfg.use_bias !== false;
      const kernelSpec = weights.get(`${name}/kernel`);
      if (!kernelSpec) {
        throw new FormatError(`dense layer '${name}': no kernel in the weights manifest`);
      }
      if (kernelSpec.shape.length !== 2 || kernelSpec.shape[1] !== units) {
        throw new FormatError(
          `dense layer '${name}': kernel shape [${kernelSpec.shape}] does not match units=${units}`,
        );
      }
      const inFeatures = kernelSpec.shape[0] as number;
      if (width === 0) {
        width = inFeatures;
        inputDim = inFeatures;
      } else if (width !== inFeatures) {
        throw new ValidationError(
          `dense layer '${name}' expects ${inFeatures} input features but receives ${width}`,
        );
      }
      const biasSpec = weights.get(`${name}/bias`) ?? null;
      nodes.push({
        kind: 'dense',
        name,
        inFeatures,
        units,
        activation,
        useBias,
        kernel: transposeKernel(kernelSpec.shape, kernelSpec.data),
        bias: biasSpec ? biasSpec.data : null,
      });
      width = units;
    } else if (cls === 'Activation') {
      nodes.push({ kind: 'activation', name, activation: String(cfg.activation ?? 'linear') });
    } else if (cls === 'Dropout' || cls === 'InputLayer') {
      // identity at inference time; nothing to capture or export
    } else {
      throw new UnsupportedError(`layer '${name}': class ${JSON.stringify(cls)} is not supported`);
    }
  }

  if (inputDim <= 0) {
    throw new FormatError('could not determine the model input width');
  }
  for (const node of nodes) {
    if (!SUPPORTED_ACTIVATIONS.has(node.activation)) {
      throw new UnsupportedError(
        `layer '${node.name}': activation '${node.activation}' is not supported ` +
          '(use relu, gelu or linear)',
      );
    }
  }
  return { dir: modelDir, inputDim, nodes };
}

/** gelu(x) = 0.5 x (1 + erf(x / sqrt(2))) with a rational erf
 * approximation (absolute error < 1.5e-7, plenty for calibration data
 * that the engine treats as opaque samples). */
export function gelu(x: number): number {
  return 0.5 * x * (1 + erf(x / Math.SQRT2));
}

function erf(x: number): number {
  const sign = x < 0 ? -1 : 1;
  const a = Math.abs(x);
  const t = 1 / (1 + 0.3275911 * a);
  const y =
    1 -
    (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t +
      0.254829592) *
      t *
      Math.exp(-a * a);
  return sign * y;
}

/** Apply one model node to activations held as features x samples. */
export function applyNode(node: ModelNode, x: { rows: number; cols: number; data: Float64Array }): {
  rows: number;
  cols: number;
  data: Float64Array;
} {
  if (node.kind === 'activation') {
    return applyActivation(node.activation, x);
  }
  const { units, inFeatures, kernel } = node;
  if (x.rows !== inFeatures) {
    throw new ValidationError(
      `layer '${node.name}' expects ${inFeatures} features, got ${x.rows}`,
    );
  }
  const out = { rows: units, cols: x.cols, data: new Float64Array(units * x.cols) };
  for (let u = 0; u < units; u++) {
    const krow = u * inFeatures;
    for (let s = 0; s < x.cols; s++) {
      let acc = 0;
      for (let i = 0; i < inFeatures; i++) {
        acc += (kernel[krow + i] as number) * (x.data[i * x.cols + s] as number);
      }
      out.data[u * x.cols + s] = acc;
    }
  }
  if (node.bias) {
    for (let u = 0; u < units; u++) {
      const b = node.bias[u] as number;
      for (let s = 0; s < x.cols; s++) {
        out.data[u * x.cols + s] = (out.data[u * x.cols + s] as number) + b;
      }
    }
  }
  return applyActivation(node.activation, out);
}

function applyActivation(
  activation: string,
  x: { rows: number; cols: number; data: Float64Array },
): { rows: number; cols: number; data: Float64Array } {
  if (activation === 'linear') {
    return x;
  }
  const data = new Float64Array(x.data.length);
  if (activation === 'relu') {
    for (let i = 0; i < data.length; i++) {
      const v = x.data[i] as number;
      data[i] = v > 0 ? v : 0;
    }
  } else if (activation === 'gelu') {
    for (let i = 0; i < data.length; i++) {
      data[i] = gelu(x.data[i] as number);
    }
  } else {
    throw new UnsupportedError(`activation '${activation}' is not supported`);
  }
  return { rows: x.rows, cols: x.cols, data };
}
