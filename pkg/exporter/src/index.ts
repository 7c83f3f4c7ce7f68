export { ExportError, FormatError, UnsupportedError, ValidationError } from './errors.js';
export { exportCheckpoint } from './export.js';
export type { ExportSpec, ExportResult, ExportedLayer } from './export.js';
export { decodeNpy, encodeNpy, matrix, readNpy, writeNpy } from './npy.js';
export type { Dtype, Matrix } from './npy.js';
export { writeManifest } from './manifest.js';
export type { Manifest, ManifestLayer, LayerKind } from './manifest.js';
export { applyNode, gelu, loadCheckpoint } from './tfjs_model.js';
export type { ActivationNode, DenseNode, LoadedModel, ModelNode } from './tfjs_model.js';
export { Rng } from './rng.js';
