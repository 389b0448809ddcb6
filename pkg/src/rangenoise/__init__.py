"""Noise models for 3D range cameras.

Estimate lateral and axial noise from repeated captures of a planar board,
fit degree-2 polynomial models sigma(z, theta), and emulate calibrated
noise on clean synthetic range images.
"""
__version__ = "0.1.0"

from .emulate import EmulationConfig, emulate_noise, emulate_stack, sweep_mn
from .errors import (
    ConfigError,
    DegenerateError,
    EstimationError,
    FitError,
    FormatError,
    InsufficientDataError,
    RangeNoiseError,
    TruncationError,
    UnknownPresetError,
)
from .noiseestim import (
    EdgeResidualSet,
    NoiseSample,
    estimate_axial,
    estimate_lateral,
    extract_edge_pixels,
    fit_line_odr,
    ks_normality,
    lowpass_reference,
)
from .noisemodel import (
    NoiseModel,
    TheoreticalSLParams,
    eval_sigma,
    fit_polynomial,
    preset,
    read_model,
    theoretical_axial_sigma,
    write_model,
)
from .planescene import SynthesisConfig, board_edge_ground_truth, synth_plane
from .rangeimg import (
    CameraIntrinsics,
    PlaneSceneSpec,
    RangeImage,
    average_frames,
    compute_normals,
    mm_to_px,
    px_to_mm,
    read_range_image,
    surface_angle_deg,
    to_point_cloud,
    write_range_image,
)

__all__ = [
    "CameraIntrinsics",
    "ConfigError",
    "DegenerateError",
    "EdgeResidualSet",
    "EmulationConfig",
    "EstimationError",
    "FitError",
    "FormatError",
    "InsufficientDataError",
    "NoiseModel",
    "NoiseSample",
    "PlaneSceneSpec",
    "RangeImage",
    "RangeNoiseError",
    "SynthesisConfig",
    "TheoreticalSLParams",
    "TruncationError",
    "UnknownPresetError",
    "average_frames",
    "board_edge_ground_truth",
    "compute_normals",
    "emulate_noise",
    "emulate_stack",
    "estimate_axial",
    "estimate_lateral",
    "eval_sigma",
    "extract_edge_pixels",
    "fit_line_odr",
    "fit_polynomial",
    "ks_normality",
    "lowpass_reference",
    "mm_to_px",
    "preset",
    "px_to_mm",
    "read_model",
    "read_range_image",
    "surface_angle_deg",
    "sweep_mn",
    "synth_plane",
    "theoretical_axial_sigma",
    "to_point_cloud",
    "write_model",
    "write_range_image",
]
