/**
 * Minimal NPY v1.0 serialization, byte-compatible with the compression
 * engine's tensor store: 2-D, C-order, little-endian float32/float64,
 * finite values only. Writes are canonical -- for a given matrix the
 * output bytes are always identical.
 */
import * as fs from 'node:fs';

import { FormatError, UnsupportedError, ValidationError } from './errors.js';

const MAGIC = Buffer.from([0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59]); // \x93NUMPY
const VERSION = Buffer.from([0x01, 0x00]);

export type Dtype = 'float32' | 'float64';

/** A dense row-major matrix with an explicit element type. */
export interface Matrix {
  rows: number;
  cols: number;
  dtype: Dtype;
  /** Row-major values, length rows*cols. Always held as float64 in memory. */
  data: Float64Array;
}

export function matrix(rows: number, cols: number, dtype: Dtype = 'float64'): Matrix {
  return { rows, cols, dtype, data: new Float64Array(rows * cols) };
}

function buildHeader(rows: number, cols: number, descr: string): Buffer {
  const dict = `{'descr': '${descr}', 'fortran_order': False, 'shape': (${rows}, ${cols}), }`;
  const raw = Buffer.from(dict, 'latin1');
  // pad so magic(6) + version(2) + length field(2) + header is a multiple of 64
  const pad = (64 - ((MAGIC.length + VERSION.length + 2 + raw.length + 1) % 64)) % 64;
  return Buffer.concat([raw, Buffer.alloc(pad, 0x20), Buffer.from('\n', 'latin1')]);
}

/** Serialize a matrix to canonical NPY v1.0 bytes. */
export function encodeNpy(m: Matrix): Buffer {
  if (m.rows <= 0 || m.cols <= 0 || m.data.length !== m.rows * m.cols) {
    throw new ValidationError(
      `matrix shape (${m.rows}, ${m.cols}) does not match data length ${m.data.length}`,
    );
  }
  for (let i = 0; i < m.data.length; i++) {
    if (!Number.isFinite(m.data[i] as number)) {
      throw new ValidationError('tensor contains NaN or Inf');
    }
  }
  const descr = m.dtype === 'float32' ? '<f4' : '<f8';
  const header = buildHeader(m.rows, m.cols, descr);
  const lenField = Buffer.alloc(2);
  lenField.writeUInt16LE(header.length, 0);
  const itemsize = m.dtype === 'float32' ? 4 : 8;
  const payload = Buffer.alloc(m.data.length * itemsize);
  if (m.dtype === 'float32') {
    for (let i = 0; i < m.data.length; i++) {
      payload.writeFloatLE(Math.fround(m.data[i] as number), i * 4);
    }
  } else {
    for (let i = 0; i < m.data.length; i++) {
      payload.writeDoubleLE(m.data[i] as number, i * 8);
    }
  }
  return Buffer.concat([MAGIC, VERSION, lenField, header, payload]);
}

export function writeNpy(path: string, m: Matrix): void {
  fs.writeFileSync(path, encodeNpy(m));
}

const HEADER_RE =
  /^\{'descr': '(<f[48])', 'fortran_order': (False|True), 'shape': \((\d+), (\d+)\), \} *\n$/;

/** Parse NPY v1.0 bytes produced by this module or by the engine. */
export function decodeNpy(blob: Buffer, label = 'tensor'): Matrix {
  if (blob.length < 10 || !blob.subarray(0, 6).equals(MAGIC)) {
    throw new FormatError(`${label}: bad magic bytes`);
  }
  if (!blob.subarray(6, 8).equals(VERSION)) {
    throw new FormatError(`${label}: unsupported NPY version`);
  }
  const hlen = blob.readUInt16LE(8);
  if (blob.length < 10 + hlen) {
    throw new FormatError(`${label}: truncated header`);
  }
  const header = blob.subarray(10, 10 + hlen).toString('latin1');
  const match = HEADER_RE.exec(header);
  if (!match) {
    throw new FormatError(`${label}: unparseable header ${JSON.stringify(header)}`);
  }
  const [, descr, fortran, rowsStr, colsStr] = match;
  if (fortran !== 'False') {
    throw new UnsupportedError(`${label}: fortran_order=True is not supported`);
  }
  const dtype: Dtype = descr === '<f4' ? 'float32' : 'float64';
  const rows = Number(rowsStr);
  const cols = Number(colsStr);
  if (rows <= 0 || cols <= 0) {
    throw new UnsupportedError(`${label}: only positive 2-D shapes supported`);
  }
  const itemsize = dtype === 'float32' ? 4 : 8;
  const payload = blob.subarray(10 + hlen);
  if (payload.length !== rows * cols * itemsize) {
    throw new FormatError(
      `${label}: payload is ${payload.length} bytes, expected ${rows * cols * itemsize}`,
    );
  }
  const data = new Float64Array(rows * cols);
  for (let i = 0; i < data.length; i++) {
    const v = dtype === 'float32' ? payload.readFloatLE(i * 4) : payload.readDoubleLE(i * 8);
    if (!Number.isFinite(v)) {
      throw new ValidationError(`${label}: tensor contains NaN or Inf`);
    }
    data[i] = v;
  }
  return { rows, cols, dtype, data };
}

export function readNpy(path: string): Matrix {
  return decodeNpy(fs.readFileSync(path), path);
}
