/**
 * Error taxonomy mirroring the compression engine's categories, so callers
 * can tell "the file is malformed" from "the request doesn't make sense"
 * without string matching.
 */

/** Base class for everything this package throws deliberately. */
export class ExportError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** A file exists but its bytes don't parse as the expected format. */
export class FormatError extends ExportError {}

/** The input is well-formed but outside the supported subset. */
export class UnsupportedError extends ExportError {}

/** The request or the data violates a documented invariant. */
export class ValidationError extends ExportError {}
