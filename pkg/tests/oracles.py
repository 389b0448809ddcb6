"""Reference implementations used as test oracles.

Each one is written independently of the package code it checks
(different algorithm or library) so that agreement is meaningful.
"""
import itertools
import math

import numpy as np
import sympy as sp
from scipy import stats

from rangenoise.noiseestim import NoiseSample

# Published camera coefficients (c0..c5 over 1, z, theta, z^2, z*theta, theta^2),
# transcribed separately from the package presets
PUBLISHED_COEFFS = {
    ("kinect-v1", "lateral"): (0.94, 4.51e-5, 6.20e-4, 0, 0, 0),
    ("kinect-v2", "lateral"): (0.736, -6.20e-4, 5.35e-3, 2.13e-7, -1.40e-6, -4.13e-5),
    ("motioncam-3d", "lateral"): (0.915, -6.91e-5, 2.84e-3, 0, 0, 0),
    ("kinect-v1", "axial"): (-0.422, 6.89e-4, 2.24e-2, 5.99e-7, -2.70e-6, -1.52e-4),
    ("kinect-v2", "axial"): (1.17, 9.72e-5, -1.37e-2, -6.35e-9, 7.86e-6, 1.17e-4),
    ("motioncam-3d", "axial"): (0.599, -1.43e-3, -8.94e-3, 8.84e-7, 1.27e-5, 2.75e-5),
}

Z_GRID = np.linspace(500, 2500, 5)
T_GRID = np.linspace(0, 80, 5)


def published_sigma(key, z, t):
    c = PUBLISHED_COEFFS[key]
    return max(0.0, c[0] + c[1] * z + c[2] * t + c[3] * z * z + c[4] * z * t + c[5] * t * t)


def grid_samples(coeffs, kind, zs=Z_GRID, ts=T_GRID):
    c = coeffs
    out = []
    for z, t in itertools.product(zs, ts):
        s = c[0] + c[1] * z + c[2] * t + c[3] * z * z + c[4] * z * t + c[5] * t * t
        out.append(NoiseSample(float(z), float(t), float(s), 100, kind))
    return out


def normal_equations_oracle(samples):
    """Solve (A^T A) d = A^T y on the standardised basis and expand with sympy."""
    z = np.array([s.z_mm for s in samples])
    t = np.array([s.theta_deg for s in samples])
    y = np.array([s.sigma for s in samples])
    cz, sz, ct, st_ = z.mean(), z.std(), t.mean(), t.std()
    x1, x2 = (z - cz) / sz, (t - ct) / st_
    A = np.column_stack([np.ones_like(x1), x1, x2, x1 * x1, x1 * x2, x2 * x2])
    d = np.linalg.solve(A.T @ A, A.T @ y)
    Z, T = sp.symbols("z t")
    X1, X2 = (Z - sp.Float(cz, 30)) / sp.Float(sz, 30), (T - sp.Float(ct, 30)) / sp.Float(st_, 30)
    basis = [1, X1, X2, X1 ** 2, X1 * X2, X2 ** 2]
    poly = sp.Poly(sp.expand(sum(sp.Float(di, 30) * b for di, b in zip(d, basis))), Z, T)
    mono = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    return np.array([float(poly.coeff_monomial(Z ** i * T ** j)) for i, j in mono])


def eig_line(points):
    """Total least squares line via eigen-decomposition of the covariance."""
    p = np.asarray(points, float)
    c = p.mean(axis=0)
    _, v = np.linalg.eigh(np.cov((p - c).T))
    n = v[:, 0]
    return n, float(n @ c)


def ssd(points, normal, offset):
    return float(np.sum((np.asarray(points, float) @ np.asarray(normal) - offset) ** 2))


def rotated_line_ssds(points, n_angles=360):
    p = np.asarray(points, float)
    c = p.mean(axis=0)
    out = []
    for k in range(n_angles):
        a = math.radians(k * 360.0 / n_angles)
        m = np.array([math.cos(a), math.sin(a)])
        out.append(ssd(p, m, m @ c))
    return np.array(out)


def brute_ks(x):
    """sup |ECDF - Phi| evaluated just before and at every sample point."""
    x = np.sort(np.asarray(x, float))
    mu, sd = x.mean(), x.std(ddof=1)
    best = 0.0
    for i, xi in enumerate(x):
        f = stats.norm.cdf(xi, mu, sd)
        best = max(best, abs((i + 1) / len(x) - f), abs(i / len(x) - f))
    return best


def rounded_std_oracle(s):
    """Std of rint(s*g), g standard normal, by summing P(k) over integers."""
    k = np.arange(-60, 61)
    p = stats.norm.cdf((k + 0.5) / s) - stats.norm.cdf((k - 0.5) / s)
    return math.sqrt(float(np.sum(p * k * k)))
