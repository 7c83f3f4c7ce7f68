/**
 * The actual exporter: selects dense layers from a loaded checkpoint,
 * drives seeded calibration data through the network to capture each
 * selected layer's input, and writes a bundle (weight tensors, activation
 * tensors, manifest) the compression engine consumes as-is.
 */
import * as fs from 'node:fs';
import * as path from 'node:path';

import { ValidationError } from './errors.js';
import { Manifest, ManifestLayer, writeManifest } from './manifest.js';
import { Matrix, writeNpy } from './npy.js';
import { Rng } from './rng.js';
import { ActivationNode, DenseNode, LoadedModel, applyNode, loadCheckpoint } from './tfjs_model.js';

export interface ExportSpec {
  /** Directory holding `model.json` plus its weight shards. */
  modelDir: string;
  /** Layer-name patterns ('*' wildcards); a dense layer is exported when
   * any pattern matches its name. */
  layerFilters: string[];
  /** Calibration size: sequences x tokens samples total. */
  sequences?: number;
  tokens?: number;
  seed?: number;
  outDir: string;
}

export interface ExportedLayer {
  name: string;
  rows: number;
  cols: number;
  weightFile: string;
  captureFile: string;
}

export interface ExportResult {
  manifestPath: string;
  outDir: string;
  layers: ExportedLayer[];
  samples: number;
  seed: number;
}

const DEFAULT_SEQUENCES = 128;
const DEFAULT_TOKENS = 8;
/** The corpus is larger than the draw so "without replacement" means
 * something: 4 candidate sequences for every one exported. */
const POOL_FACTOR = 4;

function patternToRegex(pattern: string): RegExp {
  const escaped = pattern.replace(/[.+?^${}()|[\]\\]/g, '\\$&').replace(/\*/g, '.*');
  return new RegExp(`^${escaped}$`);
}

function matchesAny(name: string, regexes: RegExp[]): boolean {
  return regexes.some((r) => r.test(name));
}

/** Seeded Gaussian calibration corpus (inputDim x poolColumns), then a
 * without-replacement draw of `sequences` whole sequences from it. */
function buildCalibration(
  inputDim: number,
  sequences: number,
  tokens: number,
  seed: number,
): Matrix {
  const rng = new Rng(seed);
  const poolSeqs = POOL_FACTOR * sequences;
  const poolCols = poolSeqs * tokens;
  const pool = new Float64Array(inputDim * poolCols);
  for (let c = 0; c < poolCols; c++) {
    for (let f = 0; f < inputDim; f++) {
      pool[f * poolCols + c] = rng.gaussian();
    }
  }
  const chosen = rng.sampleWithoutReplacement(poolSeqs, sequences);
  const cols = sequences * tokens;
  const data = new Float64Array(inputDim * cols);
  for (let s = 0; s < sequences; s++) {
    const src = (chosen[s] as number) * tokens;
    for (let t = 0; t < tokens; t++) {
      for (let f = 0; f < inputDim; f++) {
        // round to float32 now, not at write time: downstream captures are
        // computed from exactly the values the stored calibration holds
        data[f * cols + s * tokens + t] = Math.fround(pool[f * poolCols + src + t] as number);
      }
    }
  }
  return { rows: inputDim, cols, dtype: 'float32', data };
}

/** Manifest entries for whatever sits between two exported dense layers:
 * the earlier layer's fused activation, then any standalone activation
 * layers. A plain linear gap still gets an explicit identity entry. */
function gapEntries(prev: DenseNode, between: ActivationNode[]): ManifestLayer[] {
  const entries: ManifestLayer[] = [];
  if (prev.activation === 'relu' || prev.activation === 'gelu') {
    entries.push({ name: `${prev.name}_act`, kind: prev.activation });
  }
  for (const node of between) {
    if (node.activation === 'relu' || node.activation === 'gelu') {
      entries.push({ name: node.name, kind: node.activation });
    }
  }
  if (entries.length === 0) {
    entries.push({ name: `${prev.name}_act`, kind: 'identity' });
  }
  return entries;
}

/**
 * Export the selected dense layers of a checkpoint as an engine bundle.
 *
 * The selected layers must form a contiguous run of dense layers: a gap
 * would make the captured input of the later layer disagree with the
 * output of the earlier one, and the engine (which re-propagates
 * calibration data through the exported chain itself) would silently
 * compress against the wrong distribution.
 */
export function exportCheckpoint(spec: ExportSpec): ExportResult {
  const sequences = spec.sequences ?? DEFAULT_SEQUENCES;
  const tokens = spec.tokens ?? DEFAULT_TOKENS;
  const seed = spec.seed ?? 0;
  if (!Number.isInteger(sequences) || sequences < 1) {
    throw new ValidationError(`sequences must be a positive integer, got ${sequences}`);
  }
  if (!Number.isInteger(tokens) || tokens < 1) {
    throw new ValidationError(`tokens must be a positive integer, got ${tokens}`);
  }
  if (spec.layerFilters.length === 0) {
    throw new ValidationError('at least one layer filter is required');
  }

  const model: LoadedModel = loadCheckpoint(spec.modelDir);
  const regexes = spec.layerFilters.map(patternToRegex);
  const denses = model.nodes.filter((n): n is DenseNode => n.kind === 'dense');
  const selected = denses.filter((d) => matchesAny(d.name, regexes));
  if (selected.length === 0) {
    throw new ValidationError(
      `no dense layers match [${spec.layerFilters.join(', ')}]; ` +
        `checkpoint has [${denses.map((d) => d.name).join(', ')}]`,
    );
  }
  for (const dense of selected) {
    if (dense.useBias || dense.bias) {
      throw new ValidationError(
        `dense layer '${dense.name}' carries a bias; the engine compresses ` +
          'pure matrix multiplies, retrain or fold the bias away first',
      );
    }
  }
  const firstIdx = denses.indexOf(selected[0] as DenseNode);
  for (let i = 1; i < selected.length; i++) {
    const prev = selected[i - 1] as DenseNode;
    const cur = selected[i] as DenseNode;
    if (denses[firstIdx + i] !== cur || prev.units !== cur.inFeatures) {
      throw new ValidationError(
        `dimension capture mismatch: '${prev.name}' (${prev.units} outputs) and ` +
          `'${cur.name}' (${cur.inFeatures} inputs) are not consecutive dense layers`,
      );
    }
  }

  // drive the calibration corpus through the network, capturing the
  // activations flowing INTO each selected layer
  const calibration = buildCalibration(model.inputDim, sequences, tokens, seed);
  const captures = new Map<string, Matrix>();
  const selectedNames = new Set(selected.map((d) => d.name));
  let flow = { rows: calibration.rows, cols: calibration.cols, data: calibration.data };
  for (const node of model.nodes) {
    if (node.kind === 'dense' && selectedNames.has(node.name)) {
      if (flow.rows !== node.inFeatures) {
        throw new ValidationError(
          `dimension capture mismatch at '${node.name}': captured ${flow.rows} ` +
            `features, layer expects ${node.inFeatures}`,
        );
      }
      captures.set(node.name, {
        rows: flow.rows,
        cols: flow.cols,
        dtype: 'float32',
        data: flow.data,
      });
    }
    flow = applyNode(node, flow);
  }

  fs.mkdirSync(spec.outDir, { recursive: true });
  const layers: ExportedLayer[] = [];
  const manifestLayers: ManifestLayer[] = [];
  const captured: Record<string, string> = {};
  for (let i = 0; i < selected.length; i++) {
    const dense = selected[i] as DenseNode;
    const weightFile = `${dense.name}.npy`;
    writeNpy(path.join(spec.outDir, weightFile), {
      rows: dense.units,
      cols: dense.inFeatures,
      dtype: 'float32',
      data: dense.kernel,
    });
    // the first capture is the bundle's calibration tensor; later ones are
    // informational (the engine re-derives them while compressing)
    const captureFile = i === 0 ? 'calibration.npy' : `${dense.name}.input.npy`;
    writeNpy(path.join(spec.outDir, captureFile), captures.get(dense.name) as Matrix);
    captured[dense.name] = captureFile;
    if (i > 0) {
      const between = model.nodes
        .slice(model.nodes.indexOf(selected[i - 1] as DenseNode) + 1, model.nodes.indexOf(dense))
        .filter((n): n is ActivationNode => n.kind === 'activation');
      manifestLayers.push(...gapEntries(selected[i - 1] as DenseNode, between));
    }
    manifestLayers.push({ name: dense.name, kind: 'linear', weight: weightFile });
    layers.push({
      name: dense.name,
      rows: dense.units,
      cols: dense.inFeatures,
      weightFile,
      captureFile,
    });
  }

  const manifest: Manifest = {
    layers: manifestLayers,
    calibration: 'calibration.npy',
    metadata: {
      captured,
      exporter: 'checkpoint-exporter',
      seed,
      sequences,
      source: path.basename(path.resolve(spec.modelDir)),
      tokens,
    },
  };
  const manifestPath = path.join(spec.outDir, 'manifest.json');
  writeManifest(manifestPath, manifest);
  return {
    manifestPath,
    outDir: spec.outDir,
    layers,
    samples: sequences * tokens,
    seed,
  };
}
