"""Lateral and axial noise estimation from stacks of planar-board frames."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, special

from .errors import DegenerateError, EstimationError, InsufficientDataError
from .rangeimg import PlaneSceneSpec, RangeImage, _average_f64

SIDES = ("left", "right", "top", "bottom")
CSV_FIELDS = ("kind", "z_mm", "theta_deg", "sigma", "n")


@dataclass(frozen=True)
class NoiseSample:
    z_mm: float
    theta_deg: float
    sigma: float
    n: int
    noise_kind: str

    def __post_init__(self):
        if self.noise_kind not in ("lateral", "axial"):
            raise ValueError(f"noise_kind must be 'lateral' or 'axial', got {self.noise_kind!r}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.n < 2:
            raise ValueError(f"a sample needs n >= 2 residuals, got {self.n}")


@dataclass(frozen=True)
class EdgeResidualSet:
    residuals: np.ndarray
    normal: tuple[float, float]
    offset: float
    ks_statistic: float


def ks_threshold(n: int, alpha: float = 0.05) -> float:
    """Asymptotic one-sample KS critical value, ``c(alpha)/sqrt(n)``.

    Mean and std are fitted from the same sample, so the test is
    conservative (the Lilliefors case); treat it as a screening value.
    """
    return math.sqrt(-0.5 * math.log(alpha / 2)) / math.sqrt(n)


# ---------------------------------------------------------------- edges

def foreground_mask(img: RangeImage, gap_mm: float = 50.0) -> np.ndarray:
    """Valid pixels in the nearest depth layer.

    Sorted valid depths are split at the first jump larger than ``gap_mm``;
    everything in front of the jump is foreground.
    """
    valid = img.valid
    if not valid.any():
        return valid.copy()
    d = np.unique(img.depth[valid])
    jumps = np.nonzero(np.diff(d) > gap_mm)[0]
    if jumps.size == 0:
        return valid.copy()
    return valid & (img.depth <= d[jumps[0]])


def _edge_points(fg: np.ndarray, side: str) -> np.ndarray:
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")
    m = fg if side in ("left", "right") else fg.T
    if side in ("right", "bottom"):
        m = m[:, ::-1]
    n_scan, n_along = m.shape
    has = m.any(axis=1)
    first = np.argmax(m, axis=1)
    # a run touching the image border was cut by the field of view, not by the board
    keep = has & (first > 0)
    scan = np.nonzero(keep)[0]
    pos = first[keep]
    if side in ("right", "bottom"):
        pos = n_along - 1 - pos
    if side in ("left", "right"):
        return np.column_stack([pos, scan])
    return np.column_stack([scan, pos])


def extract_edge_pixels(img: RangeImage, side: str, gap_mm: float = 50.0) -> np.ndarray:
    """Outermost board pixel on ``side`` for every scanline crossing the board.

    Returns integer ``(u, v)`` pairs, one per row for left/right and one per
    column for top/bottom.
    """
    fg = foreground_mask(img, gap_mm)
    if not fg.any():
        raise EstimationError("no board detected")
    pts = _edge_points(fg, side)
    if len(pts) == 0:
        raise EstimationError(f"no board detected: no {side} edge inside the image")
    return pts


# ---------------------------------------------------------------- line fit

def fit_line_odr(points) -> tuple[tuple[float, float], float]:
    """Total least squares line through 2D points.

    Returns ``(normal, offset)`` with ``normal . p = offset``. The line goes
    through the centroid along the major principal axis; the normal is taken
    from the closed-form orientation of the 2x2 scatter matrix.
    """
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 2 or len(p) < 2:
        raise DegenerateError("need at least two 2D points")
    c = p.mean(axis=0)
    q = p - c
    sxx = float(q[:, 0] @ q[:, 0])
    syy = float(q[:, 1] @ q[:, 1])
    sxy = float(q[:, 0] @ q[:, 1])
    spread = sxx + syy
    if spread == 0:
        raise DegenerateError("all points are identical")
    if math.hypot(sxx - syy, 2 * sxy) <= 1e-12 * spread:
        raise DegenerateError("isotropic point scatter; line direction is undefined")
    phi = 0.5 * math.atan2(2 * sxy, sxx - syy)  # direction of the major axis
    n = np.array([-math.sin(phi), math.cos(phi)])
    if n[0] < 0 or (n[0] == 0 and n[1] < 0):
        n = -n
    return (float(n[0]), float(n[1])), float(n @ c)


def line_residuals(points, normal, offset) -> np.ndarray:
    return np.asarray(points, dtype=np.float64) @ np.asarray(normal) - offset


# ---------------------------------------------------------------- KS

def ks_normality(residuals) -> float:
    """One-sample KS distance between the sample and a normal with its own mean/std."""
    x = np.sort(np.asarray(residuals, dtype=np.float64))
    n = len(x)
    if n < 5:
        raise ValueError(f"KS test needs at least 5 samples, got {n}")
    sd = x.std(ddof=1)
    if not sd > 0:
        raise DegenerateError("zero variance; normal distribution is degenerate")
    cdf = special.ndtr((x - x.mean()) / sd)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


# ---------------------------------------------------------------- lateral

def edge_extent(pooled, n_frames, side, slope_window=5, max_slope=1.0):
    """Scanline range ``(lo, hi)`` occupied by the edge itself.

    Per scanline the median edge position over frames is taken; scanlines
    where that position moves by more than ``max_slope`` px per scanline
    (measured over +-``slope_window``) belong to a perpendicular edge. The
    longest remaining run of consecutive scanlines is the edge.
    """
    if side in ("left", "right"):
        scan, pos = pooled[:, 1], pooled[:, 0]
    else:
        scan, pos = pooled[:, 0], pooled[:, 1]
    lines, counts = np.unique(scan, return_counts=True)
    steady = lines[2 * counts >= n_frames]
    if steady.size == 0:
        return None
    first = steady.min()
    med = np.full(steady.max() - first + 1, np.nan)
    order = np.argsort(scan, kind="stable")
    s_sorted, p_sorted = scan[order], pos[order]
    bounds = np.searchsorted(s_sorted, steady), np.searchsorted(s_sorted, steady, side="right")
    for line, a, b in zip(steady, *bounds):
        med[line - first] = np.median(p_sorted[a:b])
    h = slope_window
    if med.size > 2 * h:
        slope = np.full(med.size, np.inf)
        slope[h:-h] = np.abs(med[2 * h:] - med[:-2 * h]) / (2 * h)
    else:
        # too short to measure a slope
        slope = np.where(np.isnan(med), np.inf, 0.0)
    on = np.append(slope <= max_slope, False)
    best, start = None, None
    for i, flag in enumerate(on):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if best is None or i - start > best[1] - best[0] + 1:
                best = (start, i - 1)
            start = None
    if best is None:
        return None
    return first + best[0], first + best[1]


def _pool_edges(frames, side, gap_mm, end_margin):
    pts = []
    for i, f in enumerate(frames):
        try:
            pts.append(extract_edge_pixels(f, side, gap_mm))
        except EstimationError as exc:
            raise EstimationError(f"frame {i}: {exc}") from None
    pooled = np.concatenate(pts)
    extent = edge_extent(pooled, len(frames), side)
    if extent is None:
        return pooled[:0]
    scan = pooled[:, 1] if side in ("left", "right") else pooled[:, 0]
    # the ends of the edge run into the perpendicular edges
    lo, hi = extent[0] + end_margin, extent[1] - end_margin
    pooled = pooled[(scan >= lo) & (scan <= hi)]
    # canonical order makes the result independent of frame order
    return pooled[np.lexsort((pooled[:, 1], pooled[:, 0]))]


def estimate_lateral(frames, spec: PlaneSceneSpec, side: str = "left", *,
                     gap_mm: float = 50.0, end_margin: int = 10,
                     min_points: int = 10) -> tuple[NoiseSample, EdgeResidualSet]:
    """Lateral sigma (px) of one board edge, pooled over all frames.

    Edge pixels from every frame are fitted with a single ODR line and
    sigma is the sample std of their signed orthogonal distances to it.
    """
    frames = list(frames)
    if not frames:
        raise EstimationError("no input frames")
    shape = frames[0].depth.shape
    if any(f.depth.shape != shape for f in frames):
        raise ValueError("frames must share dimensions")
    pts = _pool_edges(frames, side, gap_mm, end_margin)
    if len(pts) < min_points:
        raise InsufficientDataError(f"only {len(pts)} edge pixels on the {side} edge, need {min_points}")
    normal, offset = fit_line_odr(pts)
    res = line_residuals(pts, normal, offset)
    sigma = float(res.std(ddof=1))
    try:
        ks = ks_normality(res)
    except (DegenerateError, ValueError):
        ks = float("nan")
    sample = NoiseSample(float(spec.distance_mm), float(spec.angle_deg), sigma, len(res), "lateral")
    return sample, EdgeResidualSet(res, normal, offset, ks)


# ---------------------------------------------------------------- axial

def _lowpass(depth, valid, cutoff):
    """Normalised Gaussian blur; also returns the per-pixel weight sum (1 on full support)."""
    if cutoff <= 0:
        return np.where(valid, depth, np.nan), valid.astype(np.float64)
    w = valid.astype(np.float64)
    num = ndimage.gaussian_filter(np.where(valid, depth, 0.0), cutoff, mode="constant", cval=0.0)
    den = ndimage.gaussian_filter(w, cutoff, mode="constant", cval=0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(valid & (den > 0), num / den, np.nan), den


def lowpass_reference(mean_img: RangeImage, cutoff: float = 2.0) -> RangeImage:
    """Gaussian blur (std ``cutoff`` px) normalised over valid pixels; invalid stay invalid."""
    ref, _ = _lowpass(mean_img.depth.astype(np.float64), mean_img.valid, cutoff)
    return mean_img.replace_depth(ref)


@dataclass
class _Moments:
    """Streaming count/mean/M2 with Chan's merge."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, x):
        nb = x.size
        if nb == 0:
            return
        mb = float(x.mean())
        m2b = float(np.sum((x - mb) ** 2))
        n = self.n + nb
        delta = mb - self.mean
        self.mean += delta * nb / n
        self.m2 += m2b + delta * delta * self.n * nb / n
        self.n = n


@dataclass(frozen=True)
class AxialResult:
    sample: NoiseSample
    residual_mean: float
    residuals: np.ndarray | None = None


def axial_residual_region(mean_img_fg: np.ndarray, margin: int) -> np.ndarray:
    if margin <= 0:
        return mean_img_fg
    return ndimage.binary_erosion(mean_img_fg, structure=np.ones((3, 3), bool), iterations=margin,
                                  border_value=0)


def estimate_axial_detailed(frames, spec: PlaneSceneSpec, cutoff: float = 2.0, *,
                            margin: int = 2, full_support: bool = True, gap_mm: float = 50.0,
                            min_residuals: int = 100, keep_residuals: bool = False) -> AxialResult:
    frames = list(frames)
    if len(frames) < 2:
        raise EstimationError(f"axial estimation needs at least 2 frames, got {len(frames)}")
    mean, valid = _average_f64(frames)
    fg = foreground_mask(frames[0].replace_depth(np.where(valid, mean, np.nan)), gap_mm)
    if not fg.any():
        raise EstimationError("no board detected")
    ref, support = _lowpass(mean, fg, cutoff)
    region = axial_residual_region(fg, margin) & ~np.isnan(ref)
    if full_support:
        # a truncated window biases the reference on sloped surfaces
        region &= support > 1.0 - 1e-6

    acc = _Moments()
    kept = []
    for f in frames:
        m = region & f.valid
        r = f.depth[m].astype(np.float64) - ref[m]
        acc.add(r)
        if keep_residuals:
            kept.append(r.astype(np.float32))
    if acc.n < min_residuals:
        raise InsufficientDataError(f"only {acc.n} axial residuals, need {min_residuals}")
    sigma = math.sqrt(acc.m2 / (acc.n - 1))
    sample = NoiseSample(float(spec.distance_mm), float(spec.angle_deg), sigma, acc.n, "axial")
    return AxialResult(sample, acc.mean, np.concatenate(kept) if keep_residuals else None)


def estimate_axial(frames, spec: PlaneSceneSpec, cutoff: float = 2.0, **kwargs) -> NoiseSample:
    """Axial sigma (mm): spread of each frame around the low-passed temporal mean.

    Residuals are taken over pixels valid in both the frame and the
    reference, at least ``margin`` px inside the board boundary and, with
    ``full_support``, only where the whole filter window lies on the board.
    """
    return estimate_axial_detailed(frames, spec, cutoff, **kwargs).sample


# ---------------------------------------------------------------- CSV

def format_sigma(x: float) -> str:
    """Five significant digits, trailing zeros kept."""
    return f"{x:#.5g}"


def _fmt_num(x: float) -> str:
    return repr(float(x))


def write_samples_csv(samples, path_or_fh, header: bool = True) -> None:
    own = isinstance(path_or_fh, (str, bytes)) or hasattr(path_or_fh, "__fspath__")
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(CSV_FIELDS)
        for s in samples:
            w.writerow([s.noise_kind, _fmt_num(s.z_mm), _fmt_num(s.theta_deg), format_sigma(s.sigma), s.n])
    finally:
        if own:
            fh.close()


def read_samples_csv(path) -> list[NoiseSample]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_FIELDS:
            raise ValueError(f"{path}: expected columns {','.join(CSV_FIELDS)}, got {reader.fieldnames}")
        for row in reader:
            out.append(NoiseSample(float(row["z_mm"]), float(row["theta_deg"]), float(row["sigma"]),
                                   int(row["n"]), row["kind"]))
    return out


def residual_histogram(residuals) -> list[tuple[float, int]]:
    """(bin_center, count) pairs with Freedman-Diaconis bin widths."""
    r = np.asarray(residuals, dtype=np.float64)
    if r.size == 0:
        return []
    if np.ptp(r) == 0:
        return [(float(r[0]), int(r.size))]
    counts, edges = np.histogram(r, bins="fd")
    centers = 0.5 * (edges[:-1] + edges[1:])
    return [(float(c), int(k)) for c, k in zip(centers, counts)]


def write_histogram_csv(hist, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("bin_center", "count"))
        for c, k in hist:
            w.writerow((repr(c), k))
