"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times each kernel on 640x480 inputs with every available backend, checks
that the backends agree bit for bit, then times one full emulated frame
with each backend forced via RANGENOISE_PURE_PYTHON.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rangenoise import kernels
from rangenoise.planescene import board_frame
from rangenoise.rangeimg import PlaneSceneSpec

W, H = 640, 480

EMULATE_SNIPPET = """
import timeit
from rangenoise import kernels
from rangenoise.emulate import EmulationConfig, emulate_noise, noise_fields
from rangenoise.noisemodel import preset
from rangenoise.planescene import SynthesisConfig, synth_plane
from rangenoise.rangeimg import CameraIntrinsics, PlaneSceneSpec
img = synth_plane(SynthesisConfig(PlaneSceneSpec(1000.0, 30.0), CameraIntrinsics(525, 525, 320, 240, 640, 480)))
cfg = EmulationConfig(preset("kinect-v1", "axial"), preset("kinect-v1", "lateral"), 1.0, 7)
f = noise_fields(img)
t = min(timeit.repeat(lambda: emulate_noise(img, cfg, f), number=1, repeat={repeat}))
print(kernels.BACKEND, t)
"""


def kernel_cases():
    center, normal, aw, ah = board_frame(PlaneSceneSpec(1000.0, 30.0))
    plane_args = (W, H, 525.0, 525.0, 320.0, 240.0, center, normal, aw, ah, 200.0, 150.0, np.nan)
    g = np.random.default_rng(0)
    depth = np.full((H, W), 1000.0, np.float32)
    field = np.full((H, W), 30.0)
    su = g.integers(-2, 3, (H, W)).astype(np.int64)
    sv = g.integers(-2, 3, (H, W)).astype(np.int64)
    return {
        "hash_counters (2*W*H)": lambda m: m.hash_counters(0x1234, 0, 2 * W * H),
        "plane_depth": lambda m: m.plane_depth(*plane_args),
        "remap_nearest": lambda m: m.remap_nearest(depth, field, su, sv),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return a.tobytes() == b.tobytes()


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (active: {kernels.BACKEND})")
    print(f"{'kernel':<24}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}  identical")
    for label, fn in kernel_cases().items():
        times = {name: min(timeit.repeat(lambda m=m: fn(m), number=3, repeat=args.repeat)) / 3
                 for name, m in backends.items()}
        outs = [fn(m) for m in backends.values()]
        identical = all(same(outs[0], o) for o in outs[1:])
        speed = times["numpy"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<24}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times.values())
              + f"{speed:>9.1f}x  {identical}")

    print("\nfull emulate_noise frame (640x480, lateral + axial):")
    for env in ({}, {"RANGENOISE_PURE_PYTHON": "1"}):
        res = subprocess.run([sys.executable, "-c", EMULATE_SNIPPET.format(repeat=args.repeat)],
                             env={**os.environ, **env}, capture_output=True, text=True, check=True)
        name, t = res.stdout.split()
        print(f"  {name:<8} {float(t) * 1e3:8.2f} ms")


if __name__ == "__main__":
    main()
