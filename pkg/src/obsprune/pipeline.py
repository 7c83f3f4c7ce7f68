"""Sequential whole-model compression and reporting.

A model is a manifest: linear layers interleaved with elementwise
nonlinearities. Compression walks it in execution order, and for each
non-skipped linear layer builds the Hessian from the activations produced
by the *already-compressed* upstream layers (the memory-friendly setup;
dense propagation is available as an ablation flag), prunes, and swaps the
weights before moving on.

Also here: a synthetic-model generator (correlated Gaussian calibration
data so error compensation actually has something to do), model-level
evaluation against the dense reference, and the exact-reconstruction
ratio report for small layers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np
import scipy.special
from threadpoolctl import threadpool_limits

from .errors import ValidationError
from .hessian import build_hessian, factorize
from .oracle import RowProblem, exact_reconstruct_row
from .quant import fit_grid, rtn_quantize
from .solver import MaskedLayerResult, PruneConfig, layer_error, prune_layer
from .baselines import magnitude_prune, magnitude_prune_nm
from .tensor_io import LayerSpec, ModelManifest, load_manifest, read_tensor, save_manifest, write_tensor

ORACLE_DIM_GUARD = 256
_EVAL_STREAM = 0xE7A1


def parse_pattern(text: str) -> tuple[int, int]:
    """Parse an "n:m" pattern string into an (n, m) integer pair."""
    parts = text.split(":")
    try:
        n, m = (int(x) for x in parts)
    except ValueError:
        raise ValidationError(f"pattern must look like 'n:m', got {text!r}") from None
    if len(parts) != 2 or not (0 < n < m):
        raise ValidationError(f"pattern needs 0 < n < m, got {text!r}")
    return n, m


def _nonlinearity(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "gelu":
        return 0.5 * x * (1.0 + scipy.special.erf(x / np.sqrt(2.0)))
    if kind == "identity":
        return x
    raise ValidationError(f"unknown nonlinearity kind {kind!r}")


def forward_model(manifest: ModelManifest, weights: dict, X: np.ndarray) -> np.ndarray:
    """Run inputs through the model (weights given by name) in float64."""
    act = np.asarray(X, dtype=np.float64)
    with threadpool_limits(limits=1):
        for layer in manifest.layers:
            if layer.kind == "linear":
                act = np.asarray(weights[layer.name], dtype=np.float64) @ act
            else:
                act = _nonlinearity(layer.kind, act)
    return act


def load_weights(manifest: ModelManifest) -> dict:
    return {l.name: read_tensor(l.weight) for l in manifest.linear_layers()}


@dataclass(frozen=True)
class SkipPolicy:
    """Which layers to leave dense: explicit names, plus optionally a
    contiguous fraction of the linear layers ("front"/"middle"/"back", f)."""

    names: tuple = ()
    fraction: tuple | None = None


def resolve_skips(manifest: ModelManifest, policy: SkipPolicy | None) -> set:
    skips = {l.name for l in manifest.layers if l.skip}
    if policy is None:
        return skips
    linear_names = [l.name for l in manifest.linear_layers()]
    unknown = [n for n in policy.names if n not in {l.name for l in manifest.layers}]
    if unknown:
        raise ValidationError(f"skip names not present in manifest: {unknown}")
    skips |= set(policy.names)
    if policy.fraction is not None:
        where, f = policy.fraction
        if where not in ("front", "middle", "back") or not (0.0 <= f <= 1.0):
            raise ValidationError(
                f"skip fraction must be front|middle|back with f in [0,1], got {policy.fraction}"
            )
        count = int(np.floor(f * len(linear_names) + 0.5))
        if where == "front":
            chosen = linear_names[:count]
        elif where == "back":
            chosen = linear_names[len(linear_names) - count :]
        else:
            start = (len(linear_names) - count) // 2
            chosen = linear_names[start : start + count]
        skips |= set(chosen)
    return skips


def gen_synthetic(
    dims,
    out_dir,
    nonlinearity: str = "relu",
    n_samples: int | None = None,
    mixing: bool = True,
    seed: int = 0,
) -> tuple[str, ModelManifest]:
    """Write a synthetic model bundle: seeded Gaussian weights, correlated
    calibration inputs X = A @ Z (A a seeded random mixer), a held-out
    evaluation tensor from a disjoint seed stream, and the manifest.

    Returns (manifest path, loaded manifest). Everything is reproducible
    from `seed`; the same seed yields byte-identical files.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValidationError(f"need at least two positive layer dims, got {dims}")
    if nonlinearity not in ("relu", "gelu", "identity"):
        raise ValidationError(f"unknown nonlinearity {nonlinearity!r}")
    n = int(n_samples) if n_samples is not None else 8 * dims[0]
    if n < 1:
        raise ValidationError(f"n_samples must be >= 1, got {n}")
    os.makedirs(out_dir, exist_ok=True)
    d0 = dims[0]
    mixer = np.random.default_rng((seed, 0)).standard_normal((d0, d0))
    Z = np.random.default_rng((seed, 1)).standard_normal((d0, n))
    Z_eval = np.random.default_rng((seed, 2)).standard_normal((d0, 8 * d0))
    X = mixer @ Z if mixing else Z
    X_eval = mixer @ Z_eval if mixing else Z_eval
    write_tensor(X, os.path.join(out_dir, "calibration.npy"))
    write_tensor(X_eval, os.path.join(out_dir, "eval.npy"))

    layers = []
    for i in range(len(dims) - 1):
        W = np.random.default_rng((seed, 3 + i)).standard_normal(
            (dims[i + 1], dims[i])
        ) / np.sqrt(dims[i])
        fname = f"linear{i + 1}.npy"
        write_tensor(W, os.path.join(out_dir, fname))
        layers.append(LayerSpec(name=f"linear{i + 1}", kind="linear", weight=fname))
        if i < len(dims) - 2:
            layers.append(LayerSpec(name=f"{nonlinearity}{i + 1}", kind=nonlinearity))
    manifest = ModelManifest(
        layers=layers,
        calibration="calibration.npy",
        metadata={
            "generator": "synthetic-mlp",
            "seed": str(seed),
            "dims": ",".join(str(d) for d in dims),
            "nonlinearity": nonlinearity,
            "mixing": "true" if mixing else "false",
            "eval": "eval.npy",
        },
    )
    path = os.path.join(out_dir, "manifest.json")
    save_manifest(manifest, path)
    return path, load_manifest(path)


def evaluate_model(
    manifest: ModelManifest,
    compressed_weights: dict,
    X_eval: np.ndarray,
    reference_weights: dict | None = None,
) -> dict:
    """Model-level quality of compressed weights vs the dense reference.

    mse is the mean squared difference of the two models' outputs on
    X_eval; relative_error normalizes by the dense output's mean square.
    """
    X_eval = np.asarray(X_eval, dtype=np.float64)
    ref = reference_weights if reference_weights is not None else load_weights(manifest)
    first = manifest.linear_layers()[0]
    d_in = np.asarray(ref[first.name]).shape[1]
    if X_eval.ndim != 2 or X_eval.shape[0] != d_in:
        raise ValidationError(
            f"evaluation inputs must be {d_in} x n, got {X_eval.shape}"
        )
    dense_out = forward_model(manifest, ref, X_eval)
    comp_out = forward_model(manifest, {**ref, **compressed_weights}, X_eval)
    mse = float(np.mean((dense_out - comp_out) ** 2))
    denom = float(np.mean(dense_out**2))
    if denom > 0.0:
        rel = mse / denom
    else:
        rel = 0.0 if mse == 0.0 else float("inf")
    return {"mse": mse, "relative_error": rel}


def oracle_ratio_report(
    W: np.ndarray,
    X: np.ndarray,
    result: MaskedLayerResult,
    cfg: PruneConfig,
    force: bool = False,
) -> dict:
    """Solver error divided by the exact same-mask reconstruction error.

    The primary ratio uses the dampened Hessian (the objective the solver
    actually optimizes); the undampened variant is also reported when the
    raw Gram matrix is invertible, else carried as None. Guarded against
    accidental O(d_col^3)-per-row blowups on large layers.
    """
    W = np.asarray(W)
    d_col = W.shape[1]
    if d_col > ORACLE_DIM_GUARD and not force:
        raise ValidationError(
            f"oracle too expensive for d_col={d_col} (guard {ORACLE_DIM_GUARD}); "
            "pass force=True to override"
        )
    solver_err = layer_error(W, result.weights, X)
    mask = result.mask.astype(bool)

    def total_oracle(damp):
        H = build_hessian(X, damp).H
        total = 0.0
        for r in range(W.shape[0]):
            _, err = exact_reconstruct_row(RowProblem(w=W[r], H=H, mask=mask[r]), X)
            total += err
        return total

    oracle_err = total_oracle(cfg.damp_frac)
    ratio = solver_err / oracle_err if oracle_err > 0 else 1.0
    report = {"oracle_ratio": ratio}
    try:
        undamped = total_oracle(0.0)
        report["oracle_ratio_undamped"] = solver_err / undamped if undamped > 0 else 1.0
    except Exception:
        report["oracle_ratio_undamped"] = None
    return report


def _mode_string(cfg: PruneConfig) -> str:
    if cfg.pattern is not None:
        return f"{cfg.pattern[0]}:{cfg.pattern[1]}"
    return "unstructured"


def _config_echo(cfg: PruneConfig, policy: SkipPolicy | None, dense_acts: bool) -> dict:
    return {
        "sparsity": cfg.sparsity,
        "pattern": f"{cfg.pattern[0]}:{cfg.pattern[1]}" if cfg.pattern else None,
        "lazy_block": cfg.lazy_block,
        "mask_block": cfg.effective_mask_block(),
        "damp_frac": cfg.damp_frac,
        "quant_bits": cfg.quant_bits,
        "seed": cfg.seed,
        "skip_names": sorted(policy.names) if policy else [],
        "skip_fraction": (
            f"{policy.fraction[0]}:{policy.fraction[1]}" if policy and policy.fraction else None
        ),
        "dense_activations": dense_acts,
    }


def eval_inputs(manifest: ModelManifest, cfg: PruneConfig) -> np.ndarray:
    """Held-out evaluation inputs: the bundle's own eval tensor when the
    manifest references one, else a seeded standard-normal fallback."""
    ref = manifest.metadata.get("eval")
    if ref:
        base = getattr(manifest, "root", None)
        path = ref if os.path.isabs(ref) else os.path.join(base or ".", ref)
        return read_tensor(path)
    first = manifest.linear_layers()[0]
    from .tensor_io import read_tensor_shape

    d_in = read_tensor_shape(first.weight)[1]
    return np.random.default_rng((_EVAL_STREAM, cfg.seed)).standard_normal((d_in, 8 * d_in))


def run_sequential(
    manifest: ModelManifest,
    cfg: PruneConfig,
    skip_policy: SkipPolicy | None = None,
    out_dir: str | None = None,
    use_dense_activations: bool = False,
    oracle_ratio: bool = False,
    force_oracle: bool = False,
    inspect_hook=None,
    timing: bool = False,
) -> tuple[ModelManifest, dict, dict]:
    """Compress every non-skipped linear layer in execution order.

    Returns (output manifest, weights-by-name, run report). When `out_dir`
    is given the pruned tensors, manifest, and report-ready weights are
    written there and the returned manifest references them.

    `inspect_hook(layer_name, activations)` is called with the exact
    activation matrix each layer's Hessian is built from (test hook for
    the propagation contract). Timing fields are zeroed unless `timing` is
    set, keeping reports byte-reproducible.
    """
    cfg.validate()
    X0 = read_tensor(manifest.calibration)
    linear = manifest.linear_layers()
    if not linear:
        raise ValidationError("manifest contains no linear layers")
    weights = load_weights(manifest)
    first_W = weights[linear[0].name]
    if X0.shape[0] != first_W.shape[1]:
        raise ValidationError(
            f"calibration has {X0.shape[0]} features but '{linear[0].name}' expects "
            f"{first_W.shape[1]}"
        )
    skips = resolve_skips(manifest, skip_policy)

    act = X0.astype(np.float64)
    act_dense = act.copy() if use_dense_activations else None
    new_weights: dict = {}
    layer_rows = []
    for layer in manifest.layers:
        if layer.kind != "linear":
            act = _nonlinearity(layer.kind, act)
            if act_dense is not None:
                act_dense = _nonlinearity(layer.kind, act_dense)
            continue
        W = weights[layer.name]
        if layer.name in skips:
            new_weights[layer.name] = W
            layer_rows.append(
                {
                    "name": layer.name,
                    "mode": "skipped",
                    "sparsity": 0.0,
                    "layer_error": 0.0,
                    "oracle_ratio": None,
                    "elapsed_s": 0.0,
                }
            )
        else:
            lcfg = cfg
            if layer.pattern:
                lcfg = replace(cfg, sparsity=None, pattern=parse_pattern(layer.pattern))
            src = act_dense if use_dense_activations else act
            if inspect_hook is not None:
                inspect_hook(layer.name, src.copy())
            hs = factorize(build_hessian(src, lcfg.damp_frac))
            res = prune_layer(W, hs, lcfg)
            err = layer_error(W, res.weights, src)
            ratio = None
            if oracle_ratio:
                ratio = oracle_ratio_report(W, src, res, lcfg, force=force_oracle)[
                    "oracle_ratio"
                ]
            new_weights[layer.name] = res.weights
            layer_rows.append(
                {
                    "name": layer.name,
                    "mode": _mode_string(lcfg),
                    "sparsity": 1.0 - float(np.mean(res.mask)),
                    "layer_error": err,
                    "oracle_ratio": ratio,
                    "elapsed_s": res.elapsed if timing else 0.0,
                }
            )
        with threadpool_limits(limits=1):
            act = np.asarray(new_weights[layer.name], dtype=np.float64) @ act
            if act_dense is not None:
                act_dense = np.asarray(W, dtype=np.float64) @ act_dense

    X_eval = eval_inputs(manifest, cfg)
    model_metrics = evaluate_model(manifest, new_weights, X_eval, reference_weights=weights)
    report = {
        "layers": layer_rows,
        "model": model_metrics,
        "config": _config_echo(cfg, skip_policy, use_dense_activations),
        "seed": cfg.seed,
    }

    out_manifest = manifest
    if out_dir is not None:
        out_dir = os.path.abspath(out_dir)
        os.makedirs(out_dir, exist_ok=True)
        out_layers = []
        for layer in manifest.layers:
            if layer.kind == "linear":
                path = os.path.join(out_dir, f"{layer.name}.npy")
                write_tensor(new_weights[layer.name], path)
                out_layers.append(replace(layer, weight=path))
            else:
                out_layers.append(replace(layer))
        out_manifest = ModelManifest(
            layers=out_layers,
            calibration=manifest.calibration,
            metadata={**manifest.metadata, "compressed": "true"},
        )
        save_manifest(out_manifest, os.path.join(out_dir, "manifest.json"))
        out_manifest = load_manifest(os.path.join(out_dir, "manifest.json"))
    return out_manifest, new_weights, report


def _run_transform_sequential(manifest, weights, skips, transform) -> tuple[dict, list]:
    """Shared scaffold for baseline arms: walk the model, replace each
    non-skipped linear layer via `transform(layer, W) -> W_hat`, and report
    layer errors against the arm's own propagated activations."""
    X0 = read_tensor(manifest.calibration)
    act = X0.astype(np.float64)
    new_weights: dict = {}
    rows = []
    for layer in manifest.layers:
        if layer.kind != "linear":
            act = _nonlinearity(layer.kind, act)
            continue
        W = weights[layer.name]
        if layer.name in skips:
            W_hat = W
            rows.append(
                {"name": layer.name, "mode": "skipped", "sparsity": 0.0, "layer_error": 0.0}
            )
        else:
            W_hat, mode = transform(layer, W)
            rows.append(
                {
                    "name": layer.name,
                    "mode": mode,
                    "sparsity": 1.0 - float(np.count_nonzero(W_hat)) / W_hat.size,
                    "layer_error": layer_error(W, W_hat, act),
                }
            )
        new_weights[layer.name] = W_hat
        with threadpool_limits(limits=1):
            act = np.asarray(W_hat, dtype=np.float64) @ act
    return new_weights, rows


def compare_methods(
    manifest: ModelManifest,
    cfg: PruneConfig,
    bits: int | None = None,
    skip_policy: SkipPolicy | None = None,
) -> dict:
    """Side-by-side run of four arms on one manifest: the solver, magnitude
    pruning (no reconstruction), round-to-nearest quantization of the dense
    weights, and the solver with fused quantization.

    `bits` applies to the two quantization arms (default 4).
    """
    cfg.validate()
    qbits = bits if bits is not None else (cfg.quant_bits or 4)
    weights = load_weights(manifest)
    skips = resolve_skips(manifest, skip_policy)
    X_eval = eval_inputs(manifest, cfg)

    arms = {}
    base_cfg = replace(cfg, quant_bits=None)
    _, w_obs, rep_obs = run_sequential(manifest, base_cfg, skip_policy=skip_policy)
    arms["obs"] = {"layers": rep_obs["layers"], "model": rep_obs["model"]}

    joint_cfg = replace(cfg, quant_bits=qbits)
    _, w_joint, rep_joint = run_sequential(manifest, joint_cfg, skip_policy=skip_policy)
    arms["obs_quant"] = {"layers": rep_joint["layers"], "model": rep_joint["model"]}

    def magnitude_arm(layer, W):
        if layer.pattern:
            n, m = parse_pattern(layer.pattern)
            return magnitude_prune_nm(W, n, m).weights, f"{n}:{m}"
        if cfg.pattern is not None:
            n, m = cfg.pattern
            return magnitude_prune_nm(W, n, m).weights, f"{n}:{m}"
        if cfg.sparsity and cfg.sparsity > 0:
            return magnitude_prune(W, cfg.sparsity, scope="layer").weights, "magnitude"
        return W, "magnitude"

    w_mag, rows_mag = _run_transform_sequential(manifest, weights, skips, magnitude_arm)
    arms["magnitude"] = {
        "layers": rows_mag,
        "model": evaluate_model(manifest, w_mag, X_eval, reference_weights=weights),
    }

    def rtn_arm(layer, W):
        return rtn_quantize(W, qbits), f"rtn{qbits}"

    w_rtn, rows_rtn = _run_transform_sequential(manifest, weights, skips, rtn_arm)
    arms["rtn"] = {
        "layers": rows_rtn,
        "model": evaluate_model(manifest, w_rtn, X_eval, reference_weights=weights),
    }

    return {
        "arms": arms,
        "config": {**_config_echo(cfg, skip_policy, False), "compare_bits": qbits},
        "seed": cfg.seed,
    }
