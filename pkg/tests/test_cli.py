import filecmp
import subprocess
import sys

import pytest

from rangenoise.cli import main
from rangenoise.noiseestim import read_samples_csv
from rangenoise.noisemodel import preset, read_model
from rangenoise.rangeimg import read_range_image

SMALL = ["--width", "160", "--height", "120", "--fx", "200", "--fy", "200"]


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "ref, z, theta, golden",
    [
        ("kinect-v1:lateral", 1000, 0, "0.98510"),
        ("kinect-v2:lateral", 1000, 30, "0.41033"),
        ("motioncam-3d:axial", 1000, 0, "0.053000"),
        ("kinect-v1:axial", 1000, 30, "1.3202"),
    ],
)
def test_eval_model_golden(capsys, ref, z, theta, golden):
    code, out, _ = run(["eval-model", "--preset", ref, "--z", z, "--theta", theta], capsys)
    assert code == 0 and out == golden + "\n"


def test_eval_model_from_file(tmp_path, capsys):
    from rangenoise.noisemodel import write_model
    write_model(preset("kinect-v2", "lateral"), tmp_path / "m.txt")
    code, out, _ = run(["eval-model", "--model", tmp_path / "m.txt", "--z", 1000, "--theta", 30], capsys)
    assert code == 0 and out == "0.41033\n"


def test_eval_model_errors(capsys):
    assert run(["eval-model", "--z", 1000], capsys)[0] == 1
    assert run(["eval-model", "--preset", "kinect-v3:lateral", "--z", 1000], capsys)[0] == 2
    assert run(["eval-model", "--preset", "kinect-v1:lateral", "--z", -1], capsys)[0] == 2


def test_presets_listing(capsys):
    code, out, _ = run(["presets"], capsys)
    lines = out.splitlines()
    assert code == 0 and len(lines) == 7 and lines[1].startswith("kinect-v1,lateral,px,0.94,")


def test_unknown_subcommand(capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == 1 and "usage" in err


SUBCOMMANDS = ["synth-plane", "average", "estimate-lateral", "estimate-axial", "fit-model",
               "eval-model", "presets", "emulate", "sweep", "report"]


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_lists_defaults(cmd, capsys):
    code = main([cmd, "--help"])
    out = capsys.readouterr().out
    assert code == 0
    assert "--run-config" in out and "(default:" in out


def test_emulate_mn_zero_identity(tmp_path, capsys):
    clean = tmp_path / "clean.rif"
    assert run(["synth-plane", "--out", clean, "--angle", 25, *SMALL], capsys)[0] == 0
    out = tmp_path / "noisy.rif"
    code, _, _ = run(["emulate", clean, out, "--mn", 0, "--axial-model", "kinect-v1",
                      "--lateral-model", "kinect-v1"], capsys)
    assert code == 0 and out.read_bytes() == clean.read_bytes()
    assert (tmp_path / "noisy.rif.run.txt").read_text().count("mn=0.0") == 1


def test_empty_dir_exit_2(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    code, _, err = run(["estimate-lateral", tmp_path / "empty", "--distance", 1000, "--angle", 0], capsys)
    assert code == 2 and "no input frames" in err


def test_no_board_exit_2(tmp_path, capsys):
    d = tmp_path / "f"
    d.mkdir()
    (d / "a.rif").write_bytes(b"RIF1\n2 2\nDATA\n" + b"\x00\x00\xc0\x7f" * 4)
    code, _, err = run(["estimate-lateral", d, "--distance", 1000, "--angle", 0], capsys)
    assert code == 2 and "no board detected" in err


def test_pipeline(tmp_path, capsys):
    clean = tmp_path / "clean.rif"
    run(["synth-plane", "--out", clean, *SMALL, "--board-width", 300, "--board-height", 200], capsys)
    frames = tmp_path / "frames"
    code, _, _ = run(["emulate", clean, frames, "--repeat", 40, "--axial-model", "kinect-v1",
                      "--lateral-model", "kinect-v1", "--seed", 3], capsys)
    assert code == 0 and len(list(frames.glob("*.rif"))) == 40

    lat, ax = tmp_path / "lat.csv", tmp_path / "ax.csv"
    assert run(["estimate-lateral", frames, "--side", "left", "--side", "right", "--out", lat,
                "--hist", tmp_path / "h.csv"], capsys)[0] == 0
    assert run(["estimate-axial", frames, "--out", ax], capsys)[0] == 0
    lat_s, ax_s = read_samples_csv(lat), read_samples_csv(ax)
    assert [s.noise_kind for s in lat_s] == ["lateral", "lateral"]
    assert all(abs(s.sigma / 0.9851 - 1) < 0.15 for s in lat_s)
    assert abs(ax_s[0].sigma / 0.82070 - 1) < 0.10  # Kinect v1 axial at 1000 mm, 0 deg
    assert (tmp_path / "h.csv").read_text().startswith("bin_center,count\n")

    avg = tmp_path / "avg.rif"
    assert run(["average", frames, "--out", avg], capsys)[0] == 0
    assert read_range_image(avg).valid.any()

    rep = tmp_path / "rep"
    assert run(["report", f"kinect-v1={lat}", f"kinect-v1={ax}", "--out-dir", rep, "--focal", 200], capsys)[0] == 0
    z_rows = (rep / "sigma_vs_z.csv").read_text().splitlines()
    assert z_rows[0] == "camera,kind,theta_deg,z_mm,sigma,n,sigma_mm" and len(z_rows) == 4
    assert (rep / "sigma_vs_theta.csv").exists()


def test_fit_model_round_trip(tmp_path, capsys):
    c = preset("kinect-v2", "axial").coeffs
    lines = ["kind,z_mm,theta_deg,sigma,n"]
    for z in (500, 1000, 1500, 2000, 2500):
        for t in (0, 20, 40, 60, 80):
            s = c[0] + c[1] * z + c[2] * t + c[3] * z * z + c[4] * z * t + c[5] * t * t
            lines.append(f"axial,{z},{t},{s!r},100")
    (tmp_path / "s.csv").write_text("\n".join(lines) + "\n")
    code, _, _ = run(["fit-model", tmp_path / "s.csv", "--out", tmp_path / "m.txt", "--camera", "k2"], capsys)
    assert code == 0
    m = read_model(tmp_path / "m.txt")
    for got, exp in zip(m.coeffs, c):
        assert got == pytest.approx(exp, rel=1e-6)
    assert run(["fit-model", tmp_path / "s.csv", "--out", tmp_path / "x.txt", "--kind", "lateral"], capsys)[0] == 2


def test_sweep_cli_deterministic(tmp_path, capsys):
    src = tmp_path / "src"
    src.mkdir()
    for i, angle in enumerate((0, 20)):
        run(["synth-plane", "--out", src / f"s{i}.rif", "--angle", angle, *SMALL], capsys)
    for out, workers in (("a", 1), ("b", 1), ("c", 3)):
        code, _, _ = run(["sweep", src, tmp_path / out, "--axial-model", "kinect-v2", "--lateral-model",
                          "kinect-v2", "--seed", 9, "--workers", workers], capsys)
        assert code == 0
    subdirs = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(subdirs) == 13
    for d in subdirs:
        cmp = filecmp.dircmp(tmp_path / "a" / d, tmp_path / "b" / d)
        assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
        assert filecmp.cmpfiles(tmp_path / "a" / d, tmp_path / "c" / d, ["s0.rif", "s1.rif"], shallow=False)[1] == []
    assert (tmp_path / "a" / "mn_0" / "s0.rif").read_bytes() == (src / "s0.rif").read_bytes()
    assert run(["sweep", src, tmp_path / "z", "--mn-list", "1,x"], capsys)[0] == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rangenoise", "eval-model", "--preset", "kinect-v1:lateral",
                          "--z", "1000", "--theta", "0"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "0.98510\n"
