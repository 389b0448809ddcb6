"""Inject calibrated lateral and axial noise into clean range images.

Noise levels come from :class:`~rangenoise.noisemodel.NoiseModel` and are
scaled by the multiplier ``m_n`` (``m_n = 0`` leaves the image untouched,
``m_n = 1`` reproduces the modelled level).

Lateral stage
    Every row draws one horizontal displacement and every column one
    vertical displacement from a standard normal. Pixel ``(u, v)`` copies
    the input at ``(u + ku, v + kv)`` with ``ku = rint(s * g_row[v])`` and
    ``kv = rint(s * g_col[u])``; ``s`` is chosen per pixel so that the
    *rounded* displacement has standard deviation ``m_n * sigma_L`` (see
    :func:`matched_scale`). A straight board edge is therefore displaced
    on each scanline by an integer with exactly the modelled spread, which
    is what edge-based lateral estimation measures. Samples falling outside
    the image become invalid.

Axial stage
    Each valid depth of the laterally resampled image gets
    ``m_n * sigma_z(z, theta) * g`` with one standard normal ``g`` per pixel.

All normals are counter-based (:mod:`rangenoise.rng`), so results do not
depend on how work is split across threads or processes.
"""
from __future__ import annotations

import functools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage, special

from . import kernels, rng
from .errors import ConfigError, FormatError
from .noisemodel import NoiseModel
from .rangeimg import RangeImage, compute_normals, read_range_image, surface_angles_deg, write_range_image

log = logging.getLogger(__name__)

ANGLE_MODES = ("normals", "distance")


@dataclass(frozen=True)
class EmulationConfig:
    """Noise emulation settings.

    Either model may be ``None`` to skip that stage. ``focal_px`` is only
    needed when the lateral model is expressed in mm. ``dropout`` is a
    reserved hook ``(depth, theta) -> keep_mask`` applied last; angle
    dependent dropout is not modelled by default.
    """

    axial_model: NoiseModel | None
    lateral_model: NoiseModel | None
    m_n: float = 1.0
    seed: int = 0
    angle_mode: str = "normals"
    focal_px: float | None = None
    dropout: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.axial_model is not None and self.axial_model.noise_kind != "axial":
            raise ConfigError(f"axial slot holds a {self.axial_model.noise_kind} model")
        if self.lateral_model is not None and self.lateral_model.noise_kind != "lateral":
            raise ConfigError(f"lateral slot holds a {self.lateral_model.noise_kind} model")
        if not (np.isfinite(self.m_n) and self.m_n >= 0):
            raise ConfigError(f"m_n must be a finite non-negative number, got {self.m_n}")
        if self.angle_mode not in ANGLE_MODES:
            raise ConfigError(f"angle_mode must be one of {ANGLE_MODES}, got {self.angle_mode!r}")
        if self.focal_px is not None and not self.focal_px > 0:
            raise ConfigError("focal_px must be positive")
        try:
            rng.check_seed(self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------- scale matching

def rounded_normal_std(s):
    """Std of ``rint(s * g)`` for standard normal ``g``.

    Uses ``E[k^2] = sum_j (2j - 1) P(|k| >= j)``; the series is truncated
    far in the tail.
    """
    s = np.asarray(s, dtype=np.float64)
    j = np.arange(1, 64, dtype=np.float64)
    with np.errstate(divide="ignore"):
        tail = 2.0 * special.ndtr(-(j - 0.5) / s[..., None])
    return np.sqrt(np.sum((2 * j - 1) * tail, axis=-1))


_SHEPPARD_FROM = 1.2  # above this std, rounding adds exactly 1/12 variance up to ~1e-12


@functools.lru_cache(maxsize=1)
def _scale_table():
    s = np.linspace(0.0, 1.5, 30001)
    stds, first = np.unique(rounded_normal_std(s), return_index=True)
    return stds, s[first]


def matched_scale(target_std):
    """Scale ``s`` such that ``rint(s * g)`` has the requested standard deviation."""
    t = np.asarray(target_std, dtype=np.float64)
    stds, scales = _scale_table()
    small = np.interp(t, stds, scales)
    with np.errstate(invalid="ignore"):
        large = np.sqrt(np.maximum(t * t - 1.0 / 12.0, 0.0))
    return np.where(t >= _SHEPPARD_FROM, large, small)


# ---------------------------------------------------------------- fields

@dataclass(frozen=True)
class NoiseFields:
    """Per-pixel depth and surface angle with invalid pixels filled from the nearest valid one."""

    z: np.ndarray
    theta: np.ndarray


def noise_fields(img: RangeImage, angle_mode: str = "normals") -> NoiseFields | None:
    if not img.valid.any():
        return None
    idx = ndimage.distance_transform_edt(~img.valid, return_distances=False, return_indices=True)
    z = img.depth.astype(np.float64)[idx[0], idx[1]]
    if angle_mode == "distance":
        theta = np.zeros(img.depth.shape)
    else:
        if img.intrinsics is None:
            raise ConfigError("angle_mode 'normals' needs camera intrinsics on the image")
        theta = surface_angles_deg(compute_normals(img, img.intrinsics))
        ok = ~np.isnan(theta)
        if ok.any():
            tidx = ndimage.distance_transform_edt(~ok, return_distances=False, return_indices=True)
            theta = theta[tidx[0], tidx[1]]
        else:
            theta = np.zeros(img.depth.shape)
    return NoiseFields(z, np.minimum(theta, 89.999))


def _lateral_sigma_px(cfg: EmulationConfig, fields: NoiseFields, img: RangeImage):
    model = cfg.lateral_model
    sigma = model.sigma_array(fields.z, fields.theta)
    if model.units == "mm":
        f = cfg.focal_px or (img.intrinsics.fx if img.intrinsics is not None else None)
        if f is None:
            raise ConfigError("lateral model in mm needs focal_px or image intrinsics")
        sigma = sigma * f / fields.z
    return sigma


def lateral_shifts(shape, scale, seed):
    """Integer (ku, kv) displacement fields for a per-pixel scale field."""
    h, w = shape
    g_row = rng.standard_normals(seed, rng.STAGE_LATERAL_U, 0, h)
    g_col = rng.standard_normals(seed, rng.STAGE_LATERAL_V, 0, w)
    ku = np.rint(scale * g_row[:, None]).astype(np.int64)
    kv = np.rint(scale * g_col[None, :]).astype(np.int64)
    return ku, kv


def axial_field(depth, theta, model: NoiseModel, m_n: float, seed: int) -> np.ndarray:
    """Additive axial perturbation ``m_n * (sigma_z * g)`` for every pixel (float64)."""
    h, w = depth.shape
    g = rng.standard_normals(seed, rng.STAGE_AXIAL, 0, h * w).reshape(h, w)
    sigma = model.sigma_array(np.nan_to_num(depth, nan=1.0), theta)
    return m_n * (sigma * g)


# ---------------------------------------------------------------- emulation

def emulate_noise(img: RangeImage, cfg: EmulationConfig, fields: NoiseFields | None = None) -> RangeImage:
    """Apply lateral then axial noise; deterministic in ``(img, cfg)``.

    ``fields`` may be passed to reuse :func:`noise_fields` across many
    realisations of the same clean image.
    """
    if cfg.m_n == 0 or (cfg.lateral_model is None and cfg.axial_model is None):
        return img.replace_depth(img.depth)
    if fields is None:
        fields = noise_fields(img, cfg.angle_mode)
    if fields is None:
        return img.replace_depth(img.depth)

    depth = np.ascontiguousarray(img.depth, dtype=np.float32)
    theta = fields.theta
    if cfg.lateral_model is not None:
        target = cfg.m_n * _lateral_sigma_px(cfg, fields, img)
        ku, kv = lateral_shifts(depth.shape, matched_scale(target), cfg.seed)
        depth, theta = kernels.remap_nearest(depth, np.ascontiguousarray(theta), ku, kv)

    valid = ~np.isnan(depth)
    out = depth.astype(np.float64)
    if cfg.axial_model is not None:
        out = out + axial_field(depth, theta, cfg.axial_model, cfg.m_n, cfg.seed)
    out = np.where(valid & (out > 0), out, np.nan)
    if cfg.dropout is not None:
        keep = np.asarray(cfg.dropout(out, theta), dtype=bool)
        out = np.where(keep, out, np.nan)
    return img.replace_depth(out.astype(np.float32))


def emulate_stack(img: RangeImage, cfg: EmulationConfig, n_frames: int) -> list[RangeImage]:
    """``n_frames`` independent realisations; frame ``i`` uses ``derive_seed(seed, i, m_n)``."""
    fields = None if cfg.m_n == 0 else noise_fields(img, cfg.angle_mode)
    return [
        emulate_noise(img, _with_seed(cfg, rng.derive_seed(cfg.seed, i, cfg.m_n)), fields)
        for i in range(n_frames)
    ]


def _with_seed(cfg: EmulationConfig, seed: int) -> EmulationConfig:
    return EmulationConfig(cfg.axial_model, cfg.lateral_model, cfg.m_n, seed, cfg.angle_mode,
                           cfg.focal_px, cfg.dropout)


def _with_mn(cfg: EmulationConfig, m_n: float) -> EmulationConfig:
    return EmulationConfig(cfg.axial_model, cfg.lateral_model, m_n, cfg.seed, cfg.angle_mode,
                           cfg.focal_px, cfg.dropout)


# ---------------------------------------------------------------- sweep

def mn_dirname(m: float) -> str:
    return f"mn_{float(m):g}"


@dataclass
class SweepReport:
    written: list[Path] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def sweep_mn(img_set, cfg: EmulationConfig, m_values, out_dir, *, names=None,
             workers: int = 1) -> SweepReport:
    """Write one emulated copy of every image for every multiplier.

    ``img_set`` holds :class:`RangeImage` objects or RIF paths. Output goes
    to ``out_dir/mn_<m>/<name>.rif``; image ``i`` at multiplier ``m`` is
    seeded with ``derive_seed(cfg.seed, i, m)``. Per-file failures are
    collected and the sweep continues.
    """
    m_values = [float(m) for m in m_values]
    if not m_values:
        raise ConfigError("m_values must not be empty")
    if any(not (np.isfinite(m) and m >= 0) for m in m_values):
        raise ConfigError(f"multipliers must be non-negative, got {m_values}")
    dirnames = [mn_dirname(m) for m in m_values]
    if len(set(dirnames)) != len(dirnames):
        raise ConfigError(f"duplicate multipliers in {m_values}")
    items = list(img_set)
    if names is None:
        names = [Path(x).stem if not isinstance(x, RangeImage) else f"frame_{i:04d}" for i, x in enumerate(items)]
    if len(set(names)) != len(names):
        raise ConfigError("output names must be unique")

    out_dir = Path(out_dir)
    report = SweepReport()
    for d in dirnames:
        (out_dir / d).mkdir(parents=True, exist_ok=True)

    def job(i):
        item = items[i]
        try:
            img = item if isinstance(item, RangeImage) else read_range_image(item)
        except (OSError, FormatError) as exc:
            return [(None, f"{names[i]}: {exc}")]
        results = []
        fields = {}
        for m, d in zip(m_values, dirnames):
            target = out_dir / d / f"{names[i]}.rif"
            try:
                c = _with_seed(_with_mn(cfg, m), rng.derive_seed(cfg.seed, i, m))
                if m != 0 and c.angle_mode not in fields:
                    fields[c.angle_mode] = noise_fields(img, c.angle_mode)
                write_range_image(emulate_noise(img, c, fields.get(c.angle_mode)), target)
                results.append((target, None))
            except (OSError, ConfigError, ValueError) as exc:
                results.append((None, f"{target}: {exc}"))
        return results

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_results = list(pool.map(job, range(len(items))))
    else:
        all_results = [job(i) for i in range(len(items))]
    for results in all_results:
        for path, err in results:
            if err is None:
                report.written.append(path)
            else:
                log.warning("sweep: %s", err)
                report.failures.append(err)
    return report
