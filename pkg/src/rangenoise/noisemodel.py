"""Bivariate degree-2 polynomial noise models sigma(z, theta).

Basis order is ``[1, z, theta, z**2, z*theta, theta**2]`` with ``z`` in
millimetres and ``theta`` in degrees. Lateral models return pixels, axial
models millimetres.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import FitError, FormatError, UnknownPresetError

BASIS_NAMES = ("1", "z", "theta", "z^2", "z*theta", "theta^2")
KINDS = ("lateral", "axial")
DEFAULT_UNITS = {"lateral": "px", "axial": "mm"}


class ClampWarning(UserWarning):
    """The polynomial went negative and sigma was clamped to 0."""


class ExtrapolationWarning(UserWarning):
    """Evaluation outside the range the model was measured on."""


@dataclass(frozen=True)
class Domain:
    z_min: float | None = None
    z_max: float | None = None
    theta_max: float | None = None

    def contains(self, z, theta) -> bool:
        return not (
            (self.z_min is not None and z < self.z_min)
            or (self.z_max is not None and z > self.z_max)
            or (self.theta_max is not None and theta > self.theta_max)
        )


class SigmaEvaluation(NamedTuple):
    sigma: float
    clamped: bool
    extrapolated: bool


@dataclass(frozen=True)
class NoiseModel:
    coeffs: tuple[float, float, float, float, float, float]
    noise_kind: str
    camera_name: str = "custom"
    units: str | None = None
    domain: Domain | None = None

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) != 6:
            raise ValueError(f"a noise model needs exactly 6 coefficients, got {len(coeffs)}")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("coefficients must be finite")
        if self.noise_kind not in KINDS:
            raise ValueError(f"noise_kind must be one of {KINDS}, got {self.noise_kind!r}")
        units = self.units or DEFAULT_UNITS[self.noise_kind]
        if units not in ("px", "mm"):
            raise ValueError(f"units must be 'px' or 'mm', got {units!r}")
        if self.noise_kind == "axial" and units != "mm":
            raise ValueError("axial models are expressed in mm")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "units", units)

    def polynomial(self, z, theta):
        """Raw polynomial value, no clamping, broadcasting over arrays."""
        c0, c1, c2, c3, c4, c5 = self.coeffs
        return c0 + c1 * z + c2 * theta + c3 * z * z + c4 * z * theta + c5 * theta * theta

    def sigma_array(self, z, theta) -> np.ndarray:
        """Clamped sigma over arrays; no range checks (used by the emulator)."""
        return np.maximum(self.polynomial(np.asarray(z, np.float64), np.asarray(theta, np.float64)), 0.0)

    def evaluate(self, z: float, theta: float) -> SigmaEvaluation:
        if not (math.isfinite(z) and z > 0):
            raise ValueError(f"z must be positive, got {z}")
        if not 0 <= theta < 90:
            raise ValueError(f"theta must be in [0, 90) degrees, got {theta}")
        raw = float(self.polynomial(float(z), float(theta)))
        extrapolated = self.domain is not None and not self.domain.contains(z, theta)
        return SigmaEvaluation(max(raw, 0.0), raw < 0, extrapolated)


def eval_sigma(model: NoiseModel, z: float, theta: float) -> float:
    """sigma(z, theta) clamped at zero.

    Emits :class:`ClampWarning` when clamping happens and
    :class:`ExtrapolationWarning` outside the preset's measured range. Use
    :meth:`NoiseModel.evaluate` to get the flags as values instead.
    """
    res = model.evaluate(z, theta)
    if res.clamped:
        warnings.warn(f"{model.camera_name} {model.noise_kind} model negative at z={z}, theta={theta}; clamped to 0",
                      ClampWarning, stacklevel=2)
    if res.extrapolated:
        warnings.warn(f"{model.camera_name} {model.noise_kind} model evaluated outside its measured range",
                      ExtrapolationWarning, stacklevel=2)
    return res.sigma


# Measured ranges: Kinect v1 0.8-4.0 m, Kinect v2 0.5-4.5 m; lateral noise was
# extractable up to 70 deg (Kinect v1, MotionCam-3D) and 80 deg (Kinect v2).
_DOMAINS = {
    "kinect-v1": Domain(800.0, 4000.0, 70.0),
    "kinect-v2": Domain(500.0, 4500.0, 80.0),
    "motioncam-3d": Domain(500.0, None, 70.0),
}

_PRESET_COEFFS = {
    ("kinect-v1", "lateral"): (0.94, 4.51e-5, 6.20e-4, 0.0, 0.0, 0.0),
    ("kinect-v2", "lateral"): (0.736, -6.20e-4, 5.35e-3, 2.13e-7, -1.40e-6, -4.13e-5),
    ("motioncam-3d", "lateral"): (0.915, -6.91e-5, 2.84e-3, 0.0, 0.0, 0.0),
    ("kinect-v1", "axial"): (-0.422, 6.89e-4, 2.24e-2, 5.99e-7, -2.70e-6, -1.52e-4),
    ("kinect-v2", "axial"): (1.17, 9.72e-5, -1.37e-2, -6.35e-9, 7.86e-6, 1.17e-4),
    ("motioncam-3d", "axial"): (0.599, -1.43e-3, -8.94e-3, 8.84e-7, 1.27e-5, 2.75e-5),
}

PRESET_CAMERAS = ("kinect-v1", "kinect-v2", "motioncam-3d")


def preset(camera: str, kind: str) -> NoiseModel:
    try:
        coeffs = _PRESET_COEFFS[(camera, kind)]
    except KeyError:
        raise UnknownPresetError(
            f"unknown preset {camera}:{kind}; cameras: {', '.join(PRESET_CAMERAS)}; kinds: {', '.join(KINDS)}"
        ) from None
    return NoiseModel(coeffs, kind, camera, domain=_DOMAINS[camera])


def list_presets() -> list[NoiseModel]:
    return [preset(cam, kind) for kind in KINDS for cam in PRESET_CAMERAS]


def parse_preset_ref(ref: str, default_kind: str | None = None) -> NoiseModel:
    """Resolve ``camera:kind`` (or bare ``camera`` with ``default_kind``)."""
    camera, _, kind = ref.partition(":")
    return preset(camera, kind or default_kind or "")


# ---------------------------------------------------------------- fitting

def _design(z, t):
    return np.column_stack([np.ones_like(z), z, t, z * z, z * t, t * t])


def fit_polynomial(samples, *, weighted: bool = False, camera_name: str = "fitted",
                   noise_kind: str | None = None, center=None, scale=None,
                   rcond: float = 1e-10) -> NoiseModel:
    """Ordinary least squares fit of sigma over the 6-term basis.

    The fit runs on centred and scaled regressors ``(z - cz)/sz`` and
    ``(theta - ct)/st`` and is mapped back to the raw basis. ``center`` and
    ``scale`` override the (mean, std) defaults. With ``weighted=True``
    each sample is weighted by its residual count ``n``.
    """
    samples = list(samples)
    if len(samples) < 6:
        raise FitError(f"need at least 6 samples to fit 6 coefficients, got {len(samples)}")
    kinds = {s.noise_kind for s in samples}
    if noise_kind is None:
        if len(kinds) != 1:
            raise FitError(f"samples mix noise kinds {sorted(kinds)}; pass noise_kind")
        noise_kind = kinds.pop()
    elif kinds != {noise_kind}:
        raise FitError(f"samples have kinds {sorted(kinds)}, expected only {noise_kind!r}")

    z = np.array([s.z_mm for s in samples], dtype=np.float64)
    t = np.array([s.theta_deg for s in samples], dtype=np.float64)
    y = np.array([s.sigma for s in samples], dtype=np.float64)

    cz, ct = center if center is not None else (z.mean(), t.mean())
    sz, st = scale if scale is not None else (z.std() or 1.0, t.std() or 1.0)
    if not (sz > 0 and st > 0):
        raise ValueError("scale factors must be positive")
    A = _design((z - cz) / sz, (t - ct) / st)

    if weighted:
        w = np.sqrt(np.array([s.n for s in samples], dtype=np.float64))
        A, y = A * w[:, None], y * w

    _, sv, vt = np.linalg.svd(A, full_matrices=False)
    deficient = sv < rcond * sv[0]
    if deficient.any():
        dirs = []
        for vec in vt[deficient]:
            vec = vec / np.abs(vec).max()
            terms = [f"{c:+.3g}*{name}" for c, name in zip(vec, BASIS_NAMES) if abs(c) > 1e-6]
            dirs.append(" ".join(terms))
        raise FitError("rank-deficient design; unidentifiable basis directions (scaled): " + "; ".join(dirs))

    d, *_ = np.linalg.lstsq(A, y, rcond=None)
    return NoiseModel(_unscale(d, cz, sz, ct, st), noise_kind, camera_name)


def _unscale(d, cz, sz, ct, st):
    """Expand the polynomial in scaled variables back into raw z, theta."""
    a, b = 1.0 / sz, -cz / sz
    c, e = 1.0 / st, -ct / st
    d0, d1, d2, d3, d4, d5 = d
    return (
        d0 + d1 * b + d2 * e + d3 * b * b + d4 * b * e + d5 * e * e,
        d1 * a + 2 * d3 * a * b + d4 * a * e,
        d2 * c + d4 * b * c + 2 * d5 * c * e,
        d3 * a * a,
        d4 * a * c,
        d5 * c * c,
    )


def fit_residual(model: NoiseModel, samples) -> float:
    """Sum of squared residuals of the raw polynomial on the samples."""
    z = np.array([s.z_mm for s in samples], dtype=np.float64)
    t = np.array([s.theta_deg for s in samples], dtype=np.float64)
    y = np.array([s.sigma for s in samples], dtype=np.float64)
    return float(np.sum((y - model.polynomial(z, t)) ** 2))


# ---------------------------------------------------------------- theory

@dataclass(frozen=True)
class TheoreticalSLParams:
    """Disparity-based structured-light axial noise parameters."""

    m: float
    f: float
    b: float
    sigma_rho: float

    def __post_init__(self):
        if not (self.f > 0 and self.b > 0):
            raise ValueError(f"focal length and baseline must be positive, got f={self.f}, b={self.b}")
        if self.sigma_rho < 0:
            raise ValueError("sigma_rho must be non-negative")


def theoretical_axial_sigma(p: TheoreticalSLParams, z: float) -> float:
    """Axial sigma growing with the square of depth: ``m/(f*b) * z**2 * sigma_rho``."""
    if not z > 0:
        raise ValueError(f"z must be positive, got {z}")
    return p.m / (p.f * p.b) * z * z * p.sigma_rho


# ---------------------------------------------------------------- file I/O

_MODEL_KEYS = ("camera", "kind", "units", "c0", "c1", "c2", "c3", "c4", "c5")


def format_model(model: NoiseModel) -> str:
    lines = [f"camera={model.camera_name}", f"kind={model.noise_kind}", f"units={model.units}"]
    lines += [f"c{i}={c!r}" for i, c in enumerate(model.coeffs)]
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> NoiseModel:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise FormatError(f"expected key=value, got {raw!r}", line=lineno)
        if key not in _MODEL_KEYS:
            raise FormatError(f"unknown key {key!r}", line=lineno)
        if key in values:
            raise FormatError(f"duplicate key {key!r}", line=lineno)
        value = value.strip()
        if key.startswith("c") and key != "camera":
            try:
                float(value)
            except ValueError:
                raise FormatError(f"{key} is not a number: {value!r}", line=lineno) from None
        values[key] = value
    missing = [k for k in _MODEL_KEYS if k not in values and k != "units"]
    if missing:
        raise FormatError(f"missing keys: {', '.join(missing)}")
    try:
        return NoiseModel(
            tuple(float(values[f"c{i}"]) for i in range(6)),
            values["kind"],
            values["camera"],
            units=values.get("units"),
        )
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_model(model: NoiseModel, path) -> None:
    Path(path).write_text(format_model(model), encoding="ascii")


def read_model(path) -> NoiseModel:
    return parse_model(Path(path).read_text(encoding="ascii"))
