
import numpy as np
import pytest

from nlrspeckle.cli import main
from nlrspeckle.fileio import read_image, write_image
from nlrspeckle.image import NoiseSpec, apply_gamma_noise, clip_positive
from nlrspeckle.metrics import Region, enl, psnr, ssim

SMALL = ["--set", "search_window=8", "--set", "patch_side=3", "--set", "patches_per_group=12",
         "--set", "max_iters=2"]


@pytest.fixture
def clean(tmp_path, lena):
    path = tmp_path / "clean.pgm"
    write_image(path, lena[100:132, 100:132])
    return path


def test_add_noise(tmp_path, clean, capsys):
    out1, out2 = tmp_path / "a.nlr1", tmp_path / "b.nlr1"
    assert main(["add-noise", str(clean), str(out1), "--looks", "3", "--seed", "42"]) == 0
    assert "seed=42" in capsys.readouterr().out
    assert main(["add-noise", str(clean), str(out2), "-L", "3", "--seed", "42"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    u = read_image(clean)
    assert np.array_equal(read_image(out1), apply_gamma_noise(u, NoiseSpec(3, 42)))


def test_missing_file(tmp_path, capsys):
    missing = tmp_path / "nope.pgm"
    assert main(["add-noise", str(missing), str(tmp_path / "o.nlr1")]) != 0
    assert str(missing) in capsys.readouterr().err


def test_denoise_zero_iterations(tmp_path, clean):
    noisy = tmp_path / "n.nlr1"
    main(["add-noise", str(clean), str(noisy), "--seed", "1"])
    out = tmp_path / "o.nlr1"
    assert main(["denoise", str(noisy), str(out), "--preset", "L3-standard", "--set", "max_iters=0"]) == 0
    v = read_image(noisy)
    assert np.array_equal(read_image(out), np.exp(np.log(clip_positive(v))))


def test_denoise_outputs(tmp_path, clean):
    noisy = tmp_path / "n.nlr1"
    main(["add-noise", str(clean), str(noisy), "--seed", "1"])
    out, prev, diag, saved = (tmp_path / n for n in ("o.nlr1", "o.pgm", "d.csv", "cfg.txt"))
    code = main(["denoise", str(noisy), str(out), "--preset", "L3-standard", *SMALL, "--preview", str(prev),
                 "--diagnostics", str(diag), "--save-config", str(saved), "--threads", "1"])
    assert code == 0
    restored = read_image(out)
    assert np.array_equal(read_image(prev), np.clip(np.rint(restored), 0, 255))
    assert diag.read_text().splitlines()[0] == "k,phi,delta_z,a_norm,descent_ok,relerr_ok"
    # re-running from the saved settings reproduces the output
    out2 = tmp_path / "o2.nlr1"
    assert main(["denoise", str(noisy), str(out2), "--config", str(saved), "--threads", "1"]) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_denoise_fixed(tmp_path, clean):
    noisy = tmp_path / "n.nlr1"
    main(["add-noise", str(clean), str(noisy), "--seed", "2"])
    init = tmp_path / "init.nlr1"
    write_image(init, clip_positive(read_image(noisy)))
    out, groups = tmp_path / "o.nlr1", tmp_path / "g.csv"
    code = main(["denoise", str(noisy), str(out), "--preset", "fixed-L3-standard", *SMALL, "--init", str(init),
                 "--groups", str(groups)])
    assert code == 0
    assert groups.read_text().startswith("group_id,member_index,row,col")


def test_denoise_bad_config(tmp_path, clean, capsys):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("lambda = -2\n")
    assert main(["denoise", str(clean), str(tmp_path / "o.nlr1"), "--config", str(cfg)]) != 0
    assert "lambda" in capsys.readouterr().err


def test_metrics_identical(clean, capsys):
    assert main(["metrics", str(clean), str(clean), "--psnr"]) == 0
    assert capsys.readouterr().out.strip() == "psnr=inf"


def test_metrics_constant_enl(tmp_path, capsys):
    const = tmp_path / "c.nlr1"
    write_image(const, np.full((64, 64), 9.0))
    assert main(["metrics", str(const), str(const), "--enl", "10,10,32,32"]) == 0
    assert capsys.readouterr().out.strip() == "enl=inf"


def test_metrics_match_library(tmp_path, clean, capsys):
    noisy = tmp_path / "n.nlr1"
    main(["add-noise", str(clean), str(noisy), "--seed", "3"])
    capsys.readouterr()
    report = tmp_path / "r.csv"
    assert main(["metrics", str(clean), str(noisy), "--psnr", "--ssim", "--enl", "0,0,16,16",
                 "--report", str(report)]) == 0
    lines = dict(l.split("=") for l in capsys.readouterr().out.split())
    u, v = read_image(clean), read_image(noisy)
    assert float(lines["psnr"]) == psnr(u, v)
    assert float(lines["ssim"]) == ssim(u, v)
    assert float(lines["enl"]) == enl(v, Region(0, 0, 16, 16))
    assert len(report.read_text().splitlines()) == 4


def test_metrics_dimension_mismatch(tmp_path, clean, capsys):
    other = tmp_path / "o.nlr1"
    write_image(other, np.ones((5, 5)))
    assert main(["metrics", str(clean), str(other)]) != 0
    assert "error" in capsys.readouterr().err


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "nlrspeckle", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "add-noise" in res.stdout
