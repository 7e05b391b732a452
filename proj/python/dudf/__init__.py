"""Neural unsigned distance fields with hyperbolic scaling."""

from ._core import (
    Network,
    analytic_udf,
    chamfer,
    evaluate_mesh,
    invert_scaled_distance,
    load_checkpoint,
    normal_consistency,
    phi,
    reconstruct,
    reconstruct_shape,
    render_shape,
    sample_shape,
    save_checkpoint,
    scaled_distance,
    set_thread_count,
    train,
)

__all__ = [
    "Network",
    "analytic_udf",
    "chamfer",
    "evaluate_mesh",
    "invert_scaled_distance",
    "load_checkpoint",
    "normal_consistency",
    "phi",
    "reconstruct",
    "reconstruct_shape",
    "render_shape",
    "sample_shape",
    "save_checkpoint",
    "scaled_distance",
    "set_thread_count",
    "train",
]
