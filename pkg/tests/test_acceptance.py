"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line with the
measured values, visible in ``pytest -v`` output. Run on its own with::

    pytest tests/test_acceptance.py -v
"""
import filecmp
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from oracles import (
    PUBLISHED_COEFFS,
    brute_ks,
    eig_line,
    grid_samples,
    normal_equations_oracle,
    rotated_line_ssds,
    ssd,
    published_sigma,
)
from rangenoise.cli import main
from rangenoise.emulate import EmulationConfig, emulate_stack
from rangenoise.noiseestim import (
    estimate_axial,
    estimate_axial_detailed,
    estimate_lateral,
    fit_line_odr,
    ks_normality,
)
from rangenoise.noisemodel import fit_polynomial, preset
from rangenoise.planescene import SynthesisConfig, synth_plane
from rangenoise.rangeimg import CameraIntrinsics, PlaneSceneSpec, RangeImage


@pytest.fixture
def report(request, pytestconfig):
    """Print one PASS/FAIL line per criterion straight to the terminal."""
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")
    lines = []

    def emit(criterion, ok, detail):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        lines.append(f"ACCEPTANCE {criterion} {status}: {detail}")
        return ok

    yield emit
    with capman.global_and_fixture_disabled():
        for line in lines:
            sys.stdout.write("\n" + line + "\n")
            sys.stdout.flush()


# ---------------------------------------------------------------- 1

def test_criterion_1_preset_fidelity(report, capsys):
    cases = [
        ("kinect-v1:lateral", 1000, 0, "0.98510", ("kinect-v1", "lateral")),
        ("kinect-v2:lateral", 1000, 30, "0.41033", ("kinect-v2", "lateral")),
        ("motioncam-3d:axial", 1000, 0, "0.053000", ("motioncam-3d", "axial")),
        ("kinect-v1:axial", 1000, 30, "1.3202", ("kinect-v1", "axial")),
    ]
    outputs, ok = [], True
    t0 = time.perf_counter()
    for ref, z, t, golden, key in cases:
        code = main(["eval-model", "--preset", ref, "--z", str(z), "--theta", str(t)])
        out = capsys.readouterr().out.strip()
        outputs.append(out)
        # golden strings and an independent evaluation of the transcribed published coefficients
        ok &= code == 0 and out == golden and f"{published_sigma(key, z, t):#.5g}" == golden
    ms = (time.perf_counter() - t0) * 1e3
    ok &= ms < 1000
    report(1, ok, f"eval-model -> {', '.join(outputs)} in {ms:.1f} ms")
    assert ok


# ---------------------------------------------------------------- 2

K640 = CameraIntrinsics(525.0, 525.0, 320.0, 240.0, 640, 480)
N_FRAMES = 200
MN = (0.5, 1.0, 2.0)


def _round_trip(scene, camera, seed):
    """Emulate 200 frames per multiplier and compare recovered sigma with m_n * model."""
    spec = PlaneSceneSpec(1000.0, scene)
    img = synth_plane(SynthesisConfig(spec, K640))
    lat_m, ax_m = preset(camera, "lateral"), preset(camera, "axial")
    rows = []
    for m in MN:
        t0 = time.perf_counter()
        frames = emulate_stack(img, EmulationConfig(ax_m, lat_m, m, seed), N_FRAMES)
        for side in ("left", "right"):
            got = estimate_lateral(frames, spec, side)[0].sigma
            rows.append((f"lateral/{side}", m, got, m * lat_m.evaluate(1000.0, scene).sigma))
        if scene == 0:
            axial_frames = frames
        else:
            # on a sloped board the lateral stage changes depth values, so the
            # axial calibration is checked on the axial stage alone
            axial_frames = emulate_stack(img, EmulationConfig(ax_m, None, m, seed), N_FRAMES)
        got = estimate_axial(axial_frames, spec).sigma
        rows.append(("axial", m, got, m * ax_m.evaluate(1000.0, scene).sigma))
        rows.append(("seconds", m, time.perf_counter() - t0, None))
    return rows


@pytest.mark.parametrize("scene, camera, seed", [(0.0, "kinect-v1", 42), (30.0, "motioncam-3d", 42)],
                         ids=["frontal-kinect-v1", "angled30-motioncam-3d"])
def test_criterion_2_round_trip(report, scene, camera, seed):
    t0 = time.perf_counter()
    rows = _round_trip(scene, camera, seed)
    total = time.perf_counter() - t0
    errs = [abs(got / exp - 1) for _, _, got, exp in rows if exp is not None]
    per_scene = max(got for name, _, got, _ in rows if name == "seconds")
    ok = max(errs) <= 0.05 and per_scene < 60
    worst = max((r for r in rows if r[3] is not None), key=lambda r: abs(r[2] / r[3] - 1))
    report(2, ok, f"{camera} theta={scene:g}: {len(errs)} sigma checks at M_n={MN}, max rel err "
                  f"{max(errs):.4f} (worst {worst[0]} M_n={worst[1]}: {worst[2]:.5g} vs {worst[3]:.5g}); "
                  f"slowest scene {per_scene:.1f} s, {total:.1f} s total")
    assert ok, rows


# ---------------------------------------------------------------- 3

def test_criterion_3_fit_recovery(report):
    t0 = time.perf_counter()
    worst = 0.0
    for key, coeffs in sorted(PUBLISHED_COEFFS.items()):
        samples = grid_samples(coeffs, key[1])
        got = np.array(fit_polynomial(samples).coeffs)
        oracle = normal_equations_oracle(samples)
        for g, o, c in zip(got, oracle, coeffs):
            if c != 0:
                worst = max(worst, abs(g / c - 1), abs(o / c - 1), abs(g / o - 1))
            else:
                worst = max(worst, abs(g) / 1e3)  # zero terms only need to vanish
    ok = worst <= 1e-6
    report(3, ok, f"6 presets, max relative coefficient error {worst:.2e} "
                  f"(oracle: normal equations), {time.perf_counter() - t0:.2f} s")
    assert ok


# ---------------------------------------------------------------- 4

def test_criterion_4_odr_optimality(report):
    g = np.random.default_rng(2024)
    worst_gap, worst_eig, n_sets = math.inf, 0.0, 50
    for _ in range(n_sets):
        n = int(g.integers(3, 15))
        pts = g.normal(size=(n, 2)) @ g.normal(size=(2, 2)) + g.uniform(-50, 50, 2)
        normal, offset = fit_line_odr(pts)
        best = ssd(pts, normal, offset)
        worst_gap = min(worst_gap, float(np.min(rotated_line_ssds(pts) - best)))
        m, c = eig_line(pts)
        if m @ np.array(normal) < 0:
            m, c = -m, -c
        worst_eig = max(worst_eig, float(np.max(np.abs(m - normal))), abs(c - offset))
    ok = worst_gap >= -1e-9 and worst_eig <= 1e-9
    report(4, ok, f"{n_sets} point sets x 360 rotated lines: min(comparison - fitted) = {worst_gap:.3e}; "
                  f"max deviation from eigh oracle {worst_eig:.2e}")
    assert ok


# ---------------------------------------------------------------- 5

def _tree(root: Path):
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*"))


def test_criterion_5_determinism(report, tmp_path, capsys):
    src = tmp_path / "clean"
    src.mkdir()
    small = ["--width", "160", "--height", "120", "--fx", "200", "--fy", "200"]
    for i, (dist, ang) in enumerate([(800, 0), (1200, 20), (2000, 45)]):
        main(["synth-plane", "--out", str(src / f"scene{i}.rif"), "--distance", str(dist),
              "--angle", str(ang), *small])
    runs = {"serial-1": 1, "serial-2": 1, "parallel": 4}
    for name, workers in runs.items():
        code = main(["sweep", str(src), str(tmp_path / name), "--axial-model", "kinect-v1",
                     "--lateral-model", "kinect-v1", "--seed", "1234", "--workers", str(workers)])
        assert code == 0
    capsys.readouterr()
    base = tmp_path / "serial-1"
    files = [f for f in _tree(base) if (base / f).is_file()]
    ok = True
    for other in ("serial-2", "parallel"):
        ok &= _tree(tmp_path / other) == _tree(base)
        ok &= filecmp.cmpfiles(base, tmp_path / other, files, shallow=False)[0] == files
    n_dirs = sum(1 for p in base.iterdir() if p.is_dir())
    report(5, ok, f"{len(files)} files in {n_dirs} M_n directories byte-identical across two serial "
                  f"runs and a 4-worker run")
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_6_estimator_sanity(report):
    g = np.random.default_rng(6)
    frames = []
    for _ in range(200):
        d = np.full((120, 160), np.nan)
        d[10:110, 10:150] = 1000.0 + g.normal(0.0, 1.0, (100, 140))
        frames.append(RangeImage(d))
    res = estimate_axial_detailed(frames, PlaneSceneSpec(1000.0, 0.0))
    axial_ok = res.sample.n >= 10 ** 6 and abs(res.sample.sigma - 1.0) <= 0.03

    u = g.uniform(size=1000)
    d_uniform = ks_normality(u)
    uniform_ok = d_uniform > 1.36 / math.sqrt(1000) and abs(d_uniform - brute_ks(u)) < 1e-12

    q = stats.norm.ppf(np.arange(1, 100) / 100)
    d_quant = ks_normality(q)
    quant_ok = d_quant < 0.02 and abs(d_quant - brute_ks(q)) < 1e-12

    ok = axial_ok and uniform_ok and quant_ok
    report(6, ok, f"axial sigma {res.sample.sigma:.4f} mm over {res.sample.n} residuals; "
                  f"KS uniform n=1000 D={d_uniform:.4f} > {1.36 / math.sqrt(1000):.4f}; "
                  f"KS normal quantiles n=99 D={d_quant:.4f} < 0.02")
    assert ok


# ---------------------------------------------------------------- 7

def test_criterion_7_not_reproducible(report):
    report(7, "SKIP", "segmentation IoU vs M_n needs network training on real scans; "
                    "covered in substance by criteria 2 and 5")
    pytest.skip("not desk-reproducible: needs GPU training and the original real test scans")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
