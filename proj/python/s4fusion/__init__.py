"""Selective state space infrared/visible image fusion."""

from ._s4fusion import (
    Weights,
    default_config_json,
    discretize,
    fuse,
    gradient_loss,
    perception_loss,
    quality_metrics,
    read_image,
    selective_scan_chunked,
    selective_scan_ref,
    sobel_magnitude,
    ssim,
    weighted_fidelity,
    write_image,
)

__all__ = [
    "Weights",
    "default_config_json",
    "discretize",
    "fuse",
    "gradient_loss",
    "perception_loss",
    "quality_metrics",
    "read_image",
    "selective_scan_chunked",
    "selective_scan_ref",
    "sobel_magnitude",
    "ssim",
    "weighted_fidelity",
    "write_image",
]
