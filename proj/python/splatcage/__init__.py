"""Cage-based deformation of 3D Gaussian splat models."""

from ._core import (
    Error,
    GaussianCloud,
    PipelineError,
    chamfer_distance,
    deform_cloud,
    deform_points,
    fit_cage,
    jacobian,
    mvc_weights,
    read_ply,
    run_pipeline,
    template_cage,
    transform_covariance,
    validate_cage,
    write_ply,
)

__all__ = [
    "Error",
    "GaussianCloud",
    "PipelineError",
    "chamfer_distance",
    "deform_cloud",
    "deform_points",
    "fit_cage",
    "jacobian",
    "mvc_weights",
    "read_ply",
    "run_pipeline",
    "template_cage",
    "transform_covariance",
    "validate_cage",
    "write_ply",
]
