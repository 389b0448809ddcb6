"""Command line interface: ``rangenoise <subcommand> ...``.

Exit status is 0 on success, 1 on usage errors and 2 on data or
estimation errors. Commands that write files also write the effective
configuration to ``<output>.run.txt`` (or to ``--run-config``).
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .emulate import EmulationConfig, _with_seed, emulate_noise, emulate_stack, sweep_mn
from .errors import RangeNoiseError
from .rng import derive_seed
from .noiseestim import (
    SIDES,
    estimate_axial_detailed,
    estimate_lateral,
    format_sigma,
    read_samples_csv,
    residual_histogram,
    write_histogram_csv,
    write_samples_csv,
)
from .noisemodel import (
    BASIS_NAMES,
    NoiseModel,
    fit_polynomial,
    list_presets,
    parse_preset_ref,
    read_model,
    write_model,
)
from .planescene import SynthesisConfig, synth_plane
from .rangeimg import (
    CameraIntrinsics,
    PlaneSceneSpec,
    RangeImage,
    average_frames,
    px_to_mm,
    read_range_image,
    write_range_image,
)

log = logging.getLogger("rangenoise")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class _Help(argparse.HelpFormatter):
    """Always show defaults, including for flags without help text."""

    def _get_help_string(self, action):
        text = action.help or ""
        if action.default is not argparse.SUPPRESS and action.option_strings and "%(default)" not in text:
            text += " (default: %(default)s)"
        return text


# ---------------------------------------------------------------- helpers

def _rif_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise RangeNoiseError(f"{d} is not a directory")
    files = sorted(d.glob("*.rif"))
    if not files:
        raise RangeNoiseError(f"no input frames in {d}")
    return files


def _load_frames(directory):
    return [read_range_image(p) for p in _rif_files(directory)]


def _scene(args, frame) -> PlaneSceneSpec:
    distance = args.distance if args.distance is not None else frame.distance_mm
    angle = args.angle if args.angle is not None else frame.angle_deg
    if distance is None or angle is None:
        raise RangeNoiseError("scene distance/angle missing: pass --distance/--angle or use frames with metadata")
    return PlaneSceneSpec(distance, angle)


def _model_arg(ref: str | None, kind: str) -> NoiseModel | None:
    if ref is None or ref == "none":
        return None
    if Path(ref).is_file():
        model = read_model(ref)
    else:
        model = parse_preset_ref(ref, default_kind=kind)
    if model.noise_kind != kind:
        raise RangeNoiseError(f"{ref} is a {model.noise_kind} model, expected {kind}")
    return model


def _emulation_config(args) -> EmulationConfig:
    return EmulationConfig(
        axial_model=_model_arg(args.axial_model, "axial"),
        lateral_model=_model_arg(args.lateral_model, "lateral"),
        m_n=args.mn if hasattr(args, "mn") else 1.0,
        seed=args.seed,
        angle_mode=args.angle_mode,
        focal_px=args.focal,
    )


def _write_run_config(args, output) -> None:
    target = args.run_config or (f"{output}.run.txt" if output is not None else None)
    if target is None:
        return
    skip = {"func", "run_config", "verbose"}
    lines = [f"rangenoise={__version__}", f"command={args.command}"]
    for key in sorted(vars(args)):
        if key in skip or key == "command":
            continue
        lines.append(f"{key}={getattr(args, key)}")
    Path(target).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- commands

def cmd_synth_plane(args):
    cx = args.cx if args.cx is not None else args.width / 2.0
    cy = args.cy if args.cy is not None else args.height / 2.0
    K = CameraIntrinsics(args.fx, args.fy, cx, cy, args.width, args.height)
    spec = PlaneSceneSpec(args.distance, args.angle, args.board_width, args.board_height, args.axis)
    background = "invalid" if args.background == "invalid" else float(args.background)
    img = synth_plane(SynthesisConfig(spec, K, background))
    if args.camera:
        img = RangeImage(img.depth, img.intrinsics, img.distance_mm, img.angle_deg, args.camera)
    write_range_image(img, args.out)
    _write_run_config(args, args.out)


def cmd_average(args):
    frames = _load_frames(args.frames)
    write_range_image(average_frames(frames, args.min_valid_fraction), args.out)
    _write_run_config(args, args.out)


def _emit_samples(samples, out):
    if out is None:
        write_samples_csv(samples, sys.stdout)
    else:
        write_samples_csv(samples, out)


def cmd_estimate_lateral(args):
    frames = _load_frames(args.frames)
    spec = _scene(args, frames[0])
    samples, residuals = [], []
    for side in args.side:
        sample, res = estimate_lateral(frames, spec, side, gap_mm=args.gap, end_margin=args.end_margin)
        samples.append(sample)
        residuals.append(res.residuals)
        ks = "nan" if res.ks_statistic != res.ks_statistic else f"{res.ks_statistic:.4f}"
        log.info("%s edge: sigma=%s px n=%d KS D=%s", side, format_sigma(sample.sigma), sample.n, ks)
    _emit_samples(samples, args.out)
    if args.hist:
        write_histogram_csv(residual_histogram(np.concatenate(residuals)), args.hist)
    _write_run_config(args, args.out or args.hist)


def cmd_estimate_axial(args):
    frames = _load_frames(args.frames)
    spec = _scene(args, frames[0])
    res = estimate_axial_detailed(frames, spec, args.cutoff, margin=args.margin,
                                  full_support=not args.no_full_support, gap_mm=args.gap,
                                  keep_residuals=bool(args.hist))
    _emit_samples([res.sample], args.out)
    if args.hist:
        write_histogram_csv(residual_histogram(res.residuals), args.hist)
    _write_run_config(args, args.out or args.hist)


def cmd_fit_model(args):
    samples = []
    for path in args.samples:
        samples += read_samples_csv(path)
    if args.kind:
        samples = [s for s in samples if s.noise_kind == args.kind]
    model = fit_polynomial(samples, weighted=args.weighted, camera_name=args.camera, noise_kind=args.kind)
    write_model(model, args.out)
    _write_run_config(args, args.out)


def cmd_eval_model(args):
    if (args.preset is None) == (args.model is None):
        raise UsageError("give exactly one of --preset or --model")
    model = parse_preset_ref(args.preset) if args.preset else read_model(args.model)
    res = model.evaluate(args.z, args.theta)
    if res.clamped:
        log.warning("polynomial is negative here; sigma clamped to 0")
    if res.extrapolated:
        log.warning("outside the range %s was measured on", model.camera_name)
    print(format_sigma(res.sigma))
    _write_run_config(args, None)


def cmd_presets(args):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("camera", "kind", "units", *(f"c{i}" for i in range(6))))
    for m in list_presets():
        w.writerow((m.camera_name, m.noise_kind, m.units, *(repr(c) for c in m.coeffs)))
    _write_run_config(args, None)


def cmd_emulate(args):
    cfg = _emulation_config(args)
    src, dst = Path(args.input), Path(args.output)
    if src.is_dir():
        files = _rif_files(src)
        dst.mkdir(parents=True, exist_ok=True)
        for i, path in enumerate(files):
            c = _with_seed(cfg, derive_seed(cfg.seed, i, cfg.m_n))
            write_range_image(emulate_noise(read_range_image(path), c), dst / path.name)
    elif args.repeat > 1:
        img = read_range_image(src)
        dst.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(emulate_stack(img, cfg, args.repeat)):
            write_range_image(frame, dst / f"frame_{i:04d}.rif")
    else:
        write_range_image(emulate_noise(read_range_image(src), cfg), dst)
    _write_run_config(args, dst)


def cmd_sweep(args):
    try:
        m_values = [float(x) for x in args.mn_list.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--mn-list must be comma-separated numbers, got {args.mn_list!r}") from None
    args.mn = 1.0
    cfg = _emulation_config(args)
    report = sweep_mn(_rif_files(args.input), cfg, m_values, args.output, workers=args.workers)
    _write_run_config(args, args.output)
    if not report.ok:
        for err in report.failures:
            print(f"error: {err}", file=sys.stderr)
        raise RangeNoiseError(f"{len(report.failures)} of {len(report.failures) + len(report.written)} outputs failed")


def cmd_report(args):
    rows = []
    for item in args.samples:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).stem, item
        for s in read_samples_csv(path):
            rows.append((name, s))
    if not rows:
        raise RangeNoiseError("no samples to report")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    extra = ("sigma_mm",) if args.focal else ()

    def mm(s):
        if not args.focal:
            return ()
        if s.noise_kind == "axial":
            return (format_sigma(s.sigma),)
        return (format_sigma(px_to_mm(s.sigma, s.z_mm, args.focal)),)

    by_z = sorted(rows, key=lambda r: (r[0], r[1].noise_kind, r[1].theta_deg, r[1].z_mm, r[1].sigma))
    with open(out / "sigma_vs_z.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("camera", "kind", "theta_deg", "z_mm", "sigma", "n", *extra))
        for cam, s in by_z:
            w.writerow((cam, s.noise_kind, repr(s.theta_deg), repr(s.z_mm), format_sigma(s.sigma), s.n, *mm(s)))
    by_t = sorted(rows, key=lambda r: (r[0], r[1].noise_kind, r[1].z_mm, r[1].theta_deg, r[1].sigma))
    with open(out / "sigma_vs_theta.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("camera", "kind", "z_mm", "theta_deg", "sigma", "n", *extra))
        for cam, s in by_t:
            w.writerow((cam, s.noise_kind, repr(s.z_mm), repr(s.theta_deg), format_sigma(s.sigma), s.n, *mm(s)))
    _write_run_config(args, out)


# ---------------------------------------------------------------- parser

def _add_emulation_flags(p, with_mn=True):
    p.add_argument("--axial-model", default=None,
                   help="model file or preset (e.g. motioncam-3d); 'none' skips the axial stage")
    p.add_argument("--lateral-model", default=None,
                   help="model file or preset (e.g. kinect-v1); 'none' skips the lateral stage")
    if with_mn:
        p.add_argument("--mn", type=float, default=1.0, help="noise multiplier M_n")
    p.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")
    p.add_argument("--angle-mode", choices=("normals", "distance"), default="normals",
                   help="surface angle from per-pixel normals, or 0 everywhere")
    p.add_argument("--focal", type=float, default=None, help="focal length in px for mm lateral models")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rangenoise", description="3D camera noise estimation, modelling and emulation.",
                     formatter_class=_Help)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", default=False, help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_, formatter_class=_Help)
        p.set_defaults(func=func)
        p.add_argument("--run-config", default=None, help="where to write the effective configuration")
        return p

    p = add("synth-plane", cmd_synth_plane, "render a noise-free planar board scene to RIF")
    p.add_argument("--out", required=True, help="output RIF file")
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--fx", type=float, default=525.0)
    p.add_argument("--fy", type=float, default=525.0)
    p.add_argument("--cx", type=float, default=None, help="principal point x (default width/2)")
    p.add_argument("--cy", type=float, default=None, help="principal point y (default height/2)")
    p.add_argument("--distance", type=float, default=1000.0, help="board distance in mm")
    p.add_argument("--angle", type=float, default=0.0, help="board angle in degrees")
    p.add_argument("--board-width", type=float, default=400.0, help="mm")
    p.add_argument("--board-height", type=float, default=300.0, help="mm")
    p.add_argument("--axis", choices=("vertical", "horizontal"), default="vertical", help="rotation axis")
    p.add_argument("--background", default="invalid", help="'invalid' or a constant depth in mm")
    p.add_argument("--camera", default=None, help="camera label stored in the header")

    p = add("average", cmd_average, "per-pixel temporal mean of a directory of frames")
    p.add_argument("frames", help="directory of RIF frames")
    p.add_argument("--out", required=True)
    p.add_argument("--min-valid-fraction", type=float, default=0.5)

    for name, func, help_ in (
        ("estimate-lateral", cmd_estimate_lateral, "lateral noise (px) from board edges"),
        ("estimate-axial", cmd_estimate_axial, "axial noise (mm) from the board surface"),
    ):
        p = add(name, func, help_)
        p.add_argument("frames", help="directory of RIF frames of one scene")
        p.add_argument("--distance", type=float, default=None, help="scene distance in mm (default: header)")
        p.add_argument("--angle", type=float, default=None, help="scene angle in degrees (default: header)")
        p.add_argument("--gap", type=float, default=50.0, help="depth gap separating board and background, mm")
        p.add_argument("--out", default=None, help="sample CSV (default stdout)")
        p.add_argument("--hist", default=None, help="residual histogram CSV (bin_center,count)")
        if name == "estimate-lateral":
            p.add_argument("--side", choices=SIDES, action="append", default=None,
                           help="board edge; repeat for several (default left)")
            p.add_argument("--end-margin", type=int, default=10, help="scanlines dropped at each edge end")
        else:
            p.add_argument("--cutoff", type=float, default=2.0, help="Gaussian low-pass std in px")
            p.add_argument("--margin", type=int, default=2, help="px excluded inside the board boundary")
            p.add_argument("--no-full-support", action="store_true", default=False,
                           help="also use pixels whose filter window leaves the board")

    p = add("fit-model", cmd_fit_model, "fit a degree-2 polynomial model to sample CSVs")
    p.add_argument("samples", nargs="+", help="NoiseSample CSV files")
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--kind", choices=("lateral", "axial"), default=None, help="use only samples of this kind")
    p.add_argument("--camera", default="fitted", help="camera label for the model")
    p.add_argument("--weighted", action="store_true", default=False, help="weight samples by residual count")

    p = add("eval-model", cmd_eval_model, "print sigma(z, theta) with 5 significant digits")
    p.add_argument("--preset", default=None, help="camera:kind, e.g. kinect-v1:lateral")
    p.add_argument("--model", default=None, help="model file")
    p.add_argument("--z", type=float, required=True, help="distance in mm")
    p.add_argument("--theta", type=float, default=0.0, help="surface angle in degrees")

    add("presets", cmd_presets, "list built-in camera models (basis: " + ", ".join(BASIS_NAMES) + ")")

    p = add("emulate", cmd_emulate, "add calibrated noise to clean range images")
    p.add_argument("input", help="RIF file or directory")
    p.add_argument("output", help="RIF file, or directory for directory input / --repeat")
    _add_emulation_flags(p)
    p.add_argument("--repeat", type=int, default=1, help="number of noisy realisations of a single input")

    p = add("sweep", cmd_sweep, "emulate a directory at several multipliers M_n")
    p.add_argument("input", help="directory of clean RIF images")
    p.add_argument("output", help="output directory (one mn_<value> subdirectory per multiplier)")
    _add_emulation_flags(p, with_mn=False)
    p.add_argument("--mn-list", default="0,0.25,0.5,0.75,1,1.25,1.5,1.75,2,2.25,2.5,2.75,3",
                   help="comma-separated multipliers")
    p.add_argument("--workers", type=int, default=1, help="parallel worker threads")

    p = add("report", cmd_report, "sigma-vs-z and sigma-vs-theta plot tables from sample CSVs")
    p.add_argument("samples", nargs="+", help="CSV files, optionally as camera=path")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--focal", type=float, default=None, help="px focal length; adds a sigma_mm column")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help/--version exit 0, usage errors exit 1
        return exc.code if isinstance(exc.code, int) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("rangenoise: error: a subcommand is required", file=sys.stderr)
        return 1
    if getattr(args, "side", "") is None:
        args.side = ["left"]
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rangenoise: error: {exc}", file=sys.stderr)
        return 1
    except (RangeNoiseError, ValueError, OSError) as exc:
        print(f"rangenoise: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
