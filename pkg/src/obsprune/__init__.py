"""One-shot post-training weight compression.

Prunes (and optionally quantizes) the weight matrices of a trained model
layer by layer, choosing masks and compensating kept weights against the
curvature of each layer's reconstruction loss on a small calibration set.
Exact closed-form reference solutions are included for verification at
small scale.
"""

from .errors import (
    CompressionError,
    DegenerateInputError,
    FactorizationError,
    FormatError,
    SingularMatrixError,
    UnsupportedError,
    ValidationError,
    WriteError,
)
from .hessian import HessianState, build_hessian, eliminate_leading, factorize
from .oracle import RowProblem, exact_reconstruct_row, iterative_obs, obs_prune_one
from .quant import QuantGrid, fit_grid, quantize_value, quantize_with_grid, rtn_quantize
from .solver import (
    MaskedLayerResult,
    PruneConfig,
    layer_error,
    prune_layer,
    select_block_mask,
    select_nm_mask,
)
from .baselines import magnitude_prune, magnitude_prune_nm
from .pipeline import (
    SkipPolicy,
    compare_methods,
    evaluate_model,
    forward_model,
    gen_synthetic,
    load_weights,
    oracle_ratio_report,
    parse_pattern,
    resolve_skips,
    run_sequential,
)
from .tensor_io import (
    LayerSpec,
    ModelManifest,
    load_manifest,
    read_tensor,
    read_tensor_shape,
    save_manifest,
    write_tensor,
)

__version__ = "0.1.0"

__all__ = [
    "CompressionError",
    "DegenerateInputError",
    "FactorizationError",
    "FormatError",
    "SingularMatrixError",
    "UnsupportedError",
    "ValidationError",
    "WriteError",
    "HessianState",
    "build_hessian",
    "eliminate_leading",
    "factorize",
    "RowProblem",
    "exact_reconstruct_row",
    "iterative_obs",
    "obs_prune_one",
    "QuantGrid",
    "fit_grid",
    "quantize_value",
    "quantize_with_grid",
    "rtn_quantize",
    "MaskedLayerResult",
    "PruneConfig",
    "layer_error",
    "prune_layer",
    "select_block_mask",
    "select_nm_mask",
    "magnitude_prune",
    "magnitude_prune_nm",
    "SkipPolicy",
    "compare_methods",
    "evaluate_model",
    "forward_model",
    "gen_synthetic",
    "load_weights",
    "oracle_ratio_report",
    "parse_pattern",
    "resolve_skips",
    "run_sequential",
    "LayerSpec",
    "ModelManifest",
    "load_manifest",
    "read_tensor",
    "read_tensor_shape",
    "save_manifest",
    "write_tensor",
    "__version__",
]
