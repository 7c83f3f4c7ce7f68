"""Bit-exact tensor and manifest I/O.

Tensors travel as NPY v1.0 files restricted to the smallest surface that
two independent implementations can agree on byte for byte: 2-D,
little-endian float32/float64, C order, finite values. Model structure
travels as a JSON manifest listing linear layers (with weight file
references) and elementwise nonlinearities, in execution order.

Conventions: a weight tensor is stored as d_row x d_col (output x input);
a calibration activation tensor is stored as d_col x n (features x samples).
"""

from __future__ import annotations

import ast
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, UnsupportedError, ValidationError, WriteError

_MAGIC = b"\x93NUMPY"
_VERSION = b"\x01\x00"
_DESCRS = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}

LAYER_KINDS = ("linear", "relu", "gelu", "identity")


def _build_header(shape, descr):
    """Render the canonical v1.0 header, padded so that the total preamble
    (magic + version + length field + header) is a multiple of 64 bytes."""
    dict_str = "{'descr': '%s', 'fortran_order': False, 'shape': (%d, %d), }" % (
        descr,
        shape[0],
        shape[1],
    )
    raw = dict_str.encode("latin1")
    pad = (-(len(_MAGIC) + len(_VERSION) + 2 + len(raw) + 1)) % 64
    return raw + b" " * pad + b"\n"


def write_tensor(t: np.ndarray, path) -> None:
    """Write a 2-D float tensor to `path` in canonical NPY v1.0 form.

    Raises ValidationError for non-finite values, UnsupportedError for
    dtypes other than float32/float64 or for non-2-D arrays, and
    WriteError if the OS rejects the write.
    """
    arr = np.asarray(t)
    if arr.ndim != 2:
        raise UnsupportedError(f"only 2-D tensors are supported, got ndim={arr.ndim}")
    if arr.dtype == np.float32:
        descr = "<f4"
    elif arr.dtype == np.float64:
        descr = "<f8"
    else:
        raise UnsupportedError(f"unsupported dtype {arr.dtype}; use float32 or float64")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("tensor contains NaN or Inf")
    payload = np.ascontiguousarray(arr.astype(_DESCRS[descr], copy=False))
    header = _build_header(arr.shape, descr)
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(_VERSION)
            fh.write(len(header).to_bytes(2, "little"))
            fh.write(header)
            fh.write(payload.tobytes("C"))
    except OSError as exc:
        raise WriteError(f"cannot write tensor to {path}: {exc}") from exc


def read_tensor(path) -> np.ndarray:
    """Read an NPY v1.0 file written by `write_tensor` (or any producer of
    the same restricted subset) and return its values exactly."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(_MAGIC)] != _MAGIC:
        raise FormatError(f"{path}: bad magic bytes")
    off = len(_MAGIC)
    if blob[off : off + 2] != _VERSION:
        raise FormatError(f"{path}: unsupported NPY version {blob[off:off + 2]!r}")
    off += 2
    if len(blob) < off + 2:
        raise FormatError(f"{path}: truncated header length field")
    hlen = int.from_bytes(blob[off : off + 2], "little")
    off += 2
    header = blob[off : off + hlen]
    if len(header) != hlen:
        raise FormatError(f"{path}: truncated header")
    off += hlen
    try:
        meta = ast.literal_eval(header.decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"{path}: unparseable header: {exc}") from exc
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"{path}: header keys {sorted(meta) if isinstance(meta, dict) else meta}")
    if meta["descr"] not in _DESCRS:
        raise UnsupportedError(f"{path}: unsupported dtype {meta['descr']!r}")
    if meta["fortran_order"] is not False:
        raise UnsupportedError(f"{path}: fortran_order=True is not supported")
    shape = meta["shape"]
    if (
        not isinstance(shape, tuple)
        or len(shape) != 2
        or not all(isinstance(s, int) and s > 0 for s in shape)
    ):
        raise UnsupportedError(f"{path}: only 2-D positive shapes supported, got {shape}")
    dtype = _DESCRS[meta["descr"]]
    nbytes = shape[0] * shape[1] * dtype.itemsize
    payload = blob[off:]
    if len(payload) != nbytes:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {nbytes} for shape {shape}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{path}: tensor contains NaN or Inf")
    return arr


def read_tensor_shape(path) -> tuple[int, int]:
    """Parse only the header of an NPY file and return its (rows, cols).

    Used for manifest validation where loading payloads would be wasteful.
    Performs the same format checks as `read_tensor` minus the payload scan.
    """
    with open(path, "rb") as fh:
        head = fh.read(10)
        if head[:6] != _MAGIC:
            raise FormatError(f"{path}: bad magic bytes")
        if head[6:8] != _VERSION:
            raise FormatError(f"{path}: unsupported NPY version")
        hlen = int.from_bytes(head[8:10], "little")
        header = fh.read(hlen)
    if len(header) != hlen:
        raise FormatError(f"{path}: truncated header")
    try:
        meta = ast.literal_eval(header.decode("latin1"))
        shape = meta["shape"]
    except Exception as exc:
        raise FormatError(f"{path}: unparseable header: {exc}") from exc
    if not isinstance(shape, tuple) or len(shape) != 2:
        raise UnsupportedError(f"{path}: only 2-D tensors supported, got shape {shape}")
    return shape


@dataclass
class LayerSpec:
    """One node of the model graph.

    Linear layers carry a weight file reference; nonlinearities do not.
    `skip` excludes the layer from compression; `pattern` overrides the
    run-level sparsity mode with an "n:m" pattern for this layer only.
    """

    name: str
    kind: str
    weight: str | None = None
    skip: bool = False
    pattern: str | None = None


@dataclass
class ModelManifest:
    layers: list[LayerSpec]
    calibration: str
    metadata: dict = field(default_factory=dict)
    # Directory the manifest was loaded from; lets consumers resolve
    # relative references kept in free-form metadata. Not serialized.
    root: str | None = field(default=None, compare=False)

    def linear_layers(self) -> list[LayerSpec]:
        return [l for l in self.layers if l.kind == "linear"]


def _validate_manifest(m: ModelManifest, base_dir: str) -> None:
    names = [l.name for l in m.layers]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise ValidationError(f"duplicate layer names: {dup}")
    for l in m.layers:
        if l.kind not in LAYER_KINDS:
            raise ValidationError(f"layer '{l.name}': unknown kind {l.kind!r}")
        if l.kind == "linear" and not l.weight:
            raise ValidationError(f"linear layer '{l.name}' has no weight reference")
        if l.kind != "linear" and l.weight:
            raise ValidationError(f"nonlinearity '{l.name}' must not carry a weight reference")
    linear = m.linear_layers()
    shapes = [read_tensor_shape(l.weight) for l in linear]
    for (a, sa), (b, sb) in zip(zip(linear, shapes), zip(linear[1:], shapes[1:])):
        if sa[0] != sb[1]:
            raise ValidationError(
                f"dimension chain broken between '{a.name}' ({sa[0]}x{sa[1]}) and "
                f"'{b.name}' ({sb[0]}x{sb[1]}): {a.name} outputs {sa[0]} features "
                f"but {b.name} expects {sb[1]}"
            )


def load_manifest(path) -> ModelManifest:
    """Load and validate a model manifest.

    File references are resolved relative to the manifest's directory and
    returned as absolute paths. The dimension chain across consecutive
    linear layers is verified against the referenced weight headers.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "layers" not in doc or "calibration" not in doc:
        raise FormatError(f"{path}: manifest must carry 'layers' and 'calibration'")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(ref):
        return ref if os.path.isabs(ref) else os.path.normpath(os.path.join(base, ref))

    layers = []
    for entry in doc["layers"]:
        if not isinstance(entry, dict) or "name" not in entry or "kind" not in entry:
            raise FormatError(f"{path}: malformed layer entry {entry!r}")
        layers.append(
            LayerSpec(
                name=entry["name"],
                kind=entry["kind"],
                weight=resolve(entry["weight"]) if entry.get("weight") else None,
                skip=bool(entry.get("skip", False)),
                pattern=entry.get("pattern"),
            )
        )
    meta = doc.get("metadata", {})
    if not isinstance(meta, dict):
        raise FormatError(f"{path}: metadata must be an object")
    m = ModelManifest(
        layers=layers, calibration=resolve(doc["calibration"]), metadata=meta, root=base
    )
    _validate_manifest(m, base)
    return m


def save_manifest(m: ModelManifest, path) -> None:
    """Write a manifest as JSON with file references relative to `path`."""
    base = os.path.dirname(os.path.abspath(path))

    def relativize(ref):
        return os.path.relpath(ref, base) if os.path.isabs(ref) else ref

    doc = {
        "calibration": relativize(m.calibration),
        "layers": [],
        "metadata": m.metadata,
    }
    for l in m.layers:
        entry = {"name": l.name, "kind": l.kind}
        if l.weight:
            entry["weight"] = relativize(l.weight)
        if l.skip:
            entry["skip"] = True
        if l.pattern:
            entry["pattern"] = l.pattern
        doc["layers"].append(entry)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise WriteError(f"cannot write manifest to {path}: {exc}") from exc
