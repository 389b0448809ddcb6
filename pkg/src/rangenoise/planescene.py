"""Noise-free range images of a rotated rectangular board.

Camera frame: x to the right (image u), y down (image v), z along the
optical axis. Pixel ``(u, v)`` looks along ``((u - cx)/fx, (v - cy)/fy, 1)``;
a pixel belongs to the board iff that centre ray hits it (no anti-aliasing).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .rangeimg import CameraIntrinsics, PlaneSceneSpec, RangeImage

EDGE_SIDES = ("left", "right", "top", "bottom")


@dataclass(frozen=True)
class SynthesisConfig:
    spec: PlaneSceneSpec
    K: CameraIntrinsics
    background: str | float = "invalid"

    def __post_init__(self):
        if isinstance(self.background, str):
            if self.background != "invalid":
                raise ValueError(f"background must be 'invalid' or a depth in mm, got {self.background!r}")
        elif not float(self.background) > self.spec.distance_mm:
            raise ValueError("constant background must lie behind the board")


@dataclass(frozen=True)
class EdgeLine:
    """Image-plane line ``normal . (u, v) = offset`` with a unit normal."""

    side: str
    normal: tuple[float, float]
    offset: float

    def distance(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ np.asarray(self.normal) - self.offset


def board_frame(spec: PlaneSceneSpec):
    """Board centre, camera-facing unit normal and in-plane unit axes (width, height)."""
    th = np.radians(spec.angle_deg)
    c, s = np.cos(th), np.sin(th)
    center = np.array([0.0, 0.0, float(spec.distance_mm)])
    if spec.rotation_axis == "vertical":
        axis_w = np.array([c, 0.0, s])
        axis_h = np.array([0.0, 1.0, 0.0])
        normal = np.array([s, 0.0, -c])
    else:
        axis_w = np.array([1.0, 0.0, 0.0])
        axis_h = np.array([0.0, c, s])
        normal = np.array([0.0, s, -c])
    return center, normal, axis_w, axis_h


def synth_plane(cfg: SynthesisConfig, backend=None) -> RangeImage:
    """Render the board; pixels off the board get the background.

    ``backend`` selects a kernel module explicitly (see
    :func:`rangenoise.kernels.available_backends`); by default the active
    one is used.
    """
    spec, K = cfg.spec, cfg.K
    center, normal, axis_w, axis_h = board_frame(spec)
    bg = np.nan if isinstance(cfg.background, str) else float(cfg.background)
    impl = backend or kernels
    depth = impl.plane_depth(
        K.width, K.height, float(K.fx), float(K.fy), float(K.cx), float(K.cy),
        center, normal, axis_w, axis_h,
        spec.board_width_mm / 2.0, spec.board_height_mm / 2.0, bg,
    )
    return RangeImage(
        depth, intrinsics=K, distance_mm=float(spec.distance_mm), angle_deg=float(spec.angle_deg)
    )


def board_corners(spec: PlaneSceneSpec) -> dict[str, np.ndarray]:
    """3D corners keyed tl, tr, br, bl (top = smaller image v)."""
    center, _, aw, ah = board_frame(spec)
    hw, hh = spec.board_width_mm / 2.0, spec.board_height_mm / 2.0
    return {
        "tl": center - hw * aw - hh * ah,
        "tr": center + hw * aw - hh * ah,
        "br": center + hw * aw + hh * ah,
        "bl": center - hw * aw + hh * ah,
    }


def _project(p, K: CameraIntrinsics):
    return np.array([K.fx * p[0] / p[2] + K.cx, K.fy * p[1] / p[2] + K.cy])


def _clip_segment(a, b, xmin, xmax, ymin, ymax):
    """Liang-Barsky clip; returns the clipped parameter interval or None."""
    d = b - a
    t0, t1 = 0.0, 1.0
    for p, q in ((-d[0], a[0] - xmin), (d[0], xmax - a[0]), (-d[1], a[1] - ymin), (d[1], ymax - a[1])):
        if p == 0:
            if q < 0:
                return None
            continue
        r = q / p
        if p < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return None
    return t0, t1


def board_edge_ground_truth(cfg: SynthesisConfig) -> list[EdgeLine]:
    """Exact projected lines of the board edges that are visible in the image.

    Normals point from the edge towards the board interior, so board pixels
    near an edge have positive distance.
    """
    spec, K = cfg.spec, cfg.K
    corners = board_corners(spec)
    proj = {k: _project(p, K) for k, p in corners.items()}
    center_px = _project(board_frame(spec)[0], K)
    segments = {"left": ("tl", "bl"), "right": ("tr", "br"), "top": ("tl", "tr"), "bottom": ("bl", "br")}
    lines = []
    for side in EDGE_SIDES:
        a, b = (proj[k] for k in segments[side])
        if _clip_segment(a, b, 0.0, K.width - 1.0, 0.0, K.height - 1.0) is None:
            continue
        d = b - a
        n = np.array([-d[1], d[0]]) / np.hypot(d[0], d[1])
        c = float(n @ a)
        if n @ center_px - c < 0:
            n, c = -n, -c
        lines.append(EdgeLine(side, (float(n[0]), float(n[1])), c))
    return lines
