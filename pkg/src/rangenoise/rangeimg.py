"""Range images: representation, RIF file I/O, frame averaging and geometry.

Depths are z-coordinates along the optical axis in millimetres. Invalid
pixels hold NaN in the depth array; the validity mask is kept alongside.
Pixel ``(u, v)`` is column ``u``, row ``v``, with the top-left pixel at
``(0, 0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, TruncationError

RIF_MAGIC = "RIF1"
META_KEYS = ("fx", "fy", "cx", "cy", "distance_mm", "angle_deg", "camera")


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValueError("sensor resolution must be at least 1x1")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} sensor"
            )


@dataclass(frozen=True)
class PlaneSceneSpec:
    """Ground truth for a planar board scene.

    ``angle_deg`` is the angle between the board normal and the optical
    axis; the board rotates about its own centre, around a ``vertical``
    (image y) or ``horizontal`` (image x) axis.
    """

    distance_mm: float
    angle_deg: float = 0.0
    board_width_mm: float = 400.0
    board_height_mm: float = 300.0
    rotation_axis: str = "vertical"

    def __post_init__(self):
        if not self.distance_mm > 0:
            raise ValueError(f"distance_mm must be positive, got {self.distance_mm}")
        if not 0 <= self.angle_deg < 90:
            raise ValueError(f"angle_deg must be in [0, 90), got {self.angle_deg}")
        if not (self.board_width_mm > 0 and self.board_height_mm > 0):
            raise ValueError("board dimensions must be positive")
        if self.rotation_axis not in ("vertical", "horizontal"):
            raise ValueError(f"rotation_axis must be 'vertical' or 'horizontal', got {self.rotation_axis!r}")


@dataclass(frozen=True, eq=False)
class RangeImage:
    """Immutable depth grid with optional capture metadata.

    ``depth`` is stored as a read-only float32 array of shape
    ``(height, width)``; float32 is the on-disk precision, so writing and
    reading back is lossless.
    """

    depth: np.ndarray
    intrinsics: CameraIntrinsics | None = None
    distance_mm: float | None = None
    angle_deg: float | None = None
    camera: str | None = None
    valid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        depth = np.array(self.depth, dtype=np.float32, copy=True, order="C")
        if depth.ndim != 2 or depth.shape[0] < 1 or depth.shape[1] < 1:
            raise ValueError(f"depth must be a non-empty 2D array, got shape {depth.shape}")
        valid = ~np.isnan(depth)
        bad = valid & ~(np.isfinite(depth) & (depth > 0))
        if bad.any():
            v, u = np.argwhere(bad)[0]
            raise ValueError(f"valid depths must be finite and > 0; pixel ({u}, {v}) is {depth[v, u]}")
        depth.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "valid", valid)
        k = self.intrinsics
        if k is not None and (k.width, k.height) != (self.width, self.height):
            raise ValueError(
                f"intrinsics are for {k.width}x{k.height}, image is {self.width}x{self.height}"
            )

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    def replace_depth(self, depth) -> "RangeImage":
        """Same metadata, new depth values."""
        return RangeImage(depth, self.intrinsics, self.distance_mm, self.angle_deg, self.camera)

    def __eq__(self, other):
        if not isinstance(other, RangeImage):
            return NotImplemented
        return (
            self.depth.shape == other.depth.shape
            and self.depth.tobytes() == other.depth.tobytes()
            and self.intrinsics == other.intrinsics
            and self.distance_mm == other.distance_mm
            and self.angle_deg == other.angle_deg
            and self.camera == other.camera
        )

    __hash__ = None


def _format_meta(img: RangeImage) -> list[str]:
    lines = []
    k = img.intrinsics
    if k is not None:
        lines += [f"fx={k.fx!r}", f"fy={k.fy!r}", f"cx={k.cx!r}", f"cy={k.cy!r}"]
    if img.distance_mm is not None:
        lines.append(f"distance_mm={float(img.distance_mm)!r}")
    if img.angle_deg is not None:
        lines.append(f"angle_deg={float(img.angle_deg)!r}")
    if img.camera is not None:
        if "\n" in img.camera:
            raise ValueError("camera name must be a single line")
        lines.append(f"camera={img.camera}")
    return lines


def write_range_image(img: RangeImage, path) -> None:
    header = [RIF_MAGIC, f"{img.width} {img.height}", *_format_meta(img), "DATA"]
    payload = img.depth.astype("<f4", copy=False).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(payload)


def _read_line(buf: bytes, pos: int, lineno: int) -> tuple[str, int]:
    end = buf.find(b"\n", pos)
    if end < 0:
        raise FormatError("unterminated header line", line=lineno)
    try:
        return buf[pos:end].decode("ascii"), end + 1
    except UnicodeDecodeError:
        raise FormatError("header is not ASCII", line=lineno) from None


def read_range_image(path) -> RangeImage:
    buf = Path(path).read_bytes()
    line, pos = _read_line(buf, 0, 1)
    if line != RIF_MAGIC:
        raise FormatError(f"bad magic {line!r}, expected {RIF_MAGIC!r}", line=1)
    line, pos = _read_line(buf, pos, 2)
    parts = line.split(" ")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise FormatError(f"expected '<width> <height>', got {line!r}", line=2)
    width, height = int(parts[0]), int(parts[1])
    if width < 1 or height < 1:
        raise FormatError(f"dimensions must be >= 1, got {width}x{height}", line=2)

    meta: dict[str, str] = {}
    lineno = 2
    while True:
        lineno += 1
        line, pos = _read_line(buf, pos, lineno)
        if line == "DATA":
            break
        key, sep, value = line.partition("=")
        if not sep or key not in META_KEYS:
            raise FormatError(f"unexpected header line {line!r}", line=lineno)
        if key in meta:
            raise FormatError(f"duplicate key {key!r}", line=lineno)
        if key != "camera":
            try:
                float(value)
            except ValueError:
                raise FormatError(f"{key} is not a number: {value!r}", line=lineno) from None
        meta[key] = value

    expected = width * height * 4
    got = len(buf) - pos
    if got != expected:
        raise TruncationError(
            f"payload has {got} bytes, header {width}x{height} requires {expected}"
        )
    depth = np.frombuffer(buf, dtype="<f4", count=width * height, offset=pos).reshape(height, width)

    k_keys = [k for k in ("fx", "fy", "cx", "cy") if k in meta]
    intrinsics = None
    if k_keys:
        if len(k_keys) != 4:
            raise FormatError(f"incomplete intrinsics, only {', '.join(k_keys)} given")
        try:
            intrinsics = CameraIntrinsics(
                float(meta["fx"]), float(meta["fy"]), float(meta["cx"]), float(meta["cy"]),
                width, height,
            )
        except ValueError as exc:
            raise FormatError(f"invalid intrinsics: {exc}") from None
    try:
        return RangeImage(
            depth,
            intrinsics=intrinsics,
            distance_mm=float(meta["distance_mm"]) if "distance_mm" in meta else None,
            angle_deg=float(meta["angle_deg"]) if "angle_deg" in meta else None,
            camera=meta.get("camera"),
        )
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def average_frames(frames, min_valid_fraction: float = 0.5) -> RangeImage:
    """Per-pixel temporal mean over the frames in which the pixel is valid.

    A pixel is valid in the result when it is valid in at least
    ``min_valid_fraction`` of the frames. Metadata comes from the first frame.
    """
    mean, valid = _average_f64(frames, min_valid_fraction)
    return frames[0].replace_depth(np.where(valid, mean, np.nan))


def _average_f64(frames, min_valid_fraction=0.5):
    frames = list(frames)
    if not frames:
        raise ValueError("average_frames needs at least one frame")
    if not 0 <= min_valid_fraction <= 1:
        raise ValueError(f"min_valid_fraction must be in [0, 1], got {min_valid_fraction}")
    shape = frames[0].depth.shape
    total = np.zeros(shape, dtype=np.float64)
    count = np.zeros(shape, dtype=np.int64)
    for i, f in enumerate(frames):
        if f.depth.shape != shape:
            raise ValueError(f"frame {i} has shape {f.depth.shape}, expected {shape}")
        total += np.where(f.valid, f.depth, 0.0)
        count += f.valid
    valid = (count > 0) & (count >= min_valid_fraction * len(frames))
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(valid, total / count, np.nan)
    return mean, valid


def _check_dims(img: RangeImage, K: CameraIntrinsics):
    if (img.width, img.height) != (K.width, K.height):
        raise ValueError(
            f"image is {img.width}x{img.height} but intrinsics are {K.width}x{K.height}"
        )


def backproject(depth, K: CameraIntrinsics) -> np.ndarray:
    """(H, W, 3) array of camera-frame points for every pixel, NaN where depth is NaN."""
    z = np.asarray(depth, dtype=np.float64)
    h, w = z.shape
    x = (np.arange(w, dtype=np.float64)[None, :] - K.cx) * z / K.fx
    y = (np.arange(h, dtype=np.float64)[:, None] - K.cy) * z / K.fy
    return np.stack([x, y, z], axis=-1)


def to_point_cloud(img: RangeImage, K: CameraIntrinsics) -> np.ndarray:
    """Valid pixels back-projected through the pinhole model, row-major order, shape (N, 3)."""
    _check_dims(img, K)
    return backproject(img.depth, K)[img.valid]


def compute_normals(img: RangeImage, K: CameraIntrinsics) -> np.ndarray:
    """Unit surface normals facing the camera, shape (H, W, 3).

    Tangents are central differences of back-projected points, so a normal
    exists only where the pixel and its four neighbours are valid. Other
    pixels, including the image border, get NaN.
    """
    _check_dims(img, K)
    p = backproject(img.depth, K)
    h, w = img.depth.shape
    normals = np.full((h, w, 3), np.nan)
    if h < 3 or w < 3:
        return normals
    valid = img.valid
    ok = (
        valid[1:-1, 1:-1]
        & valid[1:-1, :-2] & valid[1:-1, 2:]
        & valid[:-2, 1:-1] & valid[2:, 1:-1]
    )
    du = p[1:-1, 2:] - p[1:-1, :-2]
    dv = p[2:, 1:-1] - p[:-2, 1:-1]
    n = np.cross(du, dv)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    ok &= norm[..., 0] > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        n = n / norm
    n = np.where(n[..., 2:3] > 0, -n, n)
    normals[1:-1, 1:-1] = np.where(ok[..., None], n, np.nan)
    return normals


def surface_angle_deg(normal) -> float:
    """Angle between a unit normal and the optical axis, in [0, 90] degrees."""
    n = np.asarray(normal, dtype=np.float64)
    if n.shape != (3,):
        raise ValueError(f"normal must be a 3-vector, got shape {n.shape}")
    length = math.sqrt(float(n @ n))
    if abs(length - 1.0) > 1e-6:
        raise ValueError(f"normal must be unit length, |n| = {length!r}")
    return math.degrees(math.atan2(math.hypot(n[0], n[1]), abs(n[2])))


def surface_angles_deg(normals) -> np.ndarray:
    """Vectorised :func:`surface_angle_deg` over a normal field; NaN normals give NaN."""
    n = np.asarray(normals, dtype=np.float64)
    return np.degrees(np.arctan2(np.hypot(n[..., 0], n[..., 1]), np.abs(n[..., 2])))


def px_to_mm(sigma_px: float, z: float, f: float) -> float:
    if not (z > 0 and f > 0):
        raise ValueError(f"z and f must be positive, got z={z}, f={f}")
    return sigma_px * z / f


def mm_to_px(sigma_mm: float, z: float, f: float) -> float:
    if not (z > 0 and f > 0):
        raise ValueError(f"z and f must be positive, got z={z}, f={f}")
    return sigma_mm * f / z
