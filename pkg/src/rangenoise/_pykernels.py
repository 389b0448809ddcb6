"""Numpy implementations of the per-pixel kernels (fallback backend)."""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hash_counters(key, start, n):
    with np.errstate(over="ignore"):
        idx = np.arange(1, n + 1, dtype=np.uint64) + np.uint64(start)
        return _mix64(np.uint64(key) + idx * GOLDEN)


def plane_depth(width, height, fx, fy, cx, cy, center, normal, axis_w, axis_h,
                half_w, half_h, background):
    nc = normal[0] * center[0] + normal[1] * center[1] + normal[2] * center[2]
    rx = ((np.arange(width, dtype=np.float64) - cx) / fx)[None, :]
    ry = ((np.arange(height, dtype=np.float64) - cy) / fy)[:, None]
    denom = normal[0] * rx + normal[1] * ry + normal[2]
    t = nc / denom
    dx = t * rx - center[0]
    dy = t * ry - center[1]
    dz = t - center[2]
    a = dx * axis_w[0] + dy * axis_w[1] + dz * axis_w[2]
    b = dx * axis_h[0] + dy * axis_h[1] + dz * axis_h[2]
    inside = (t > 0) & (np.abs(a) <= half_w) & (np.abs(b) <= half_h)
    return np.where(inside, t, background)


def remap_nearest(depth, field, shift_u, shift_v):
    h, w = depth.shape
    su = np.arange(w)[None, :] + shift_u
    sv = np.arange(h)[:, None] + shift_v
    inb = (su >= 0) & (su < w) & (sv >= 0) & (sv < h)
    suc = np.clip(su, 0, w - 1)
    svc = np.clip(sv, 0, h - 1)
    out_d = np.where(inb, depth[svc, suc], np.float32(np.nan)).astype(np.float32)
    out_f = np.where(inb, field[svc, suc], field)
    return out_d, out_f
