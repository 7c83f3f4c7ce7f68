/**
 * Model manifest JSON in the layout the compression engine loads: ordered
 * layer entries (linear layers reference a weight tensor file; relu/gelu/
 * identity entries sit between them), one calibration tensor reference,
 * and free-form metadata. All file references are relative to the
 * manifest's own directory.
 */
import * as fs from 'node:fs';

export type LayerKind = 'linear' | 'relu' | 'gelu' | 'identity';

export interface ManifestLayer {
  name: string;
  kind: LayerKind;
  /** Relative NPY path; present exactly when kind is 'linear'. */
  weight?: string;
}

export interface Manifest {
  layers: ManifestLayer[];
  calibration: string;
  metadata: Record<string, unknown>;
}

/** JSON.stringify with object keys sorted at every level, so a manifest's
 * bytes depend only on its content. */
function canonicalJson(value: unknown, indent: number, level = 0): string {
  const pad = ' '.repeat(indent * (level + 1));
  const closePad = ' '.repeat(indent * level);
  if (Array.isArray(value)) {
    if (value.length === 0) return '[]';
    const items = value.map((v) => pad + canonicalJson(v, indent, level + 1));
    return '[\n' + items.join(',\n') + '\n' + closePad + ']';
  }
  if (typeof value === 'object' && value !== null) {
    const keys = Object.keys(value as Record<string, unknown>).sort();
    if (keys.length === 0) return '{}';
    const items = keys.map(
      (k) =>
        pad +
        JSON.stringify(k) +
        ': ' +
        canonicalJson((value as Record<string, unknown>)[k], indent, level + 1),
    );
    return '{\n' + items.join(',\n') + '\n' + closePad + '}';
  }
  return JSON.stringify(value);
}

export function writeManifest(path: string, manifest: Manifest): void {
  const doc = {
    calibration: manifest.calibration,
    layers: manifest.layers.map((l) =>
      l.weight === undefined
        ? { name: l.name, kind: l.kind }
        : { name: l.name, kind: l.kind, weight: l.weight },
    ),
    metadata: manifest.metadata,
  };
  fs.writeFileSync(path, canonicalJson(doc, 2) + '\n');
}
