import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image as PILImage

from specmark.cli import main
from specmark.codec import random_message, format_bits
from specmark.corpus import synthetic_image
from specmark.imagecore import to_uint8
from specmark.metrics import ssim
from specmark import load_image


@pytest.fixture
def workdir(tmp_path, rng):
    img = synthetic_image(128, rng)
    PILImage.fromarray(img.to_hwc().astype(np.uint8)).save(tmp_path / "cover.png")
    cfg = {"embed_mode": "substitutive", "bit_length": 32, "radius": 20, "theta": 10.0}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    return tmp_path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_embed_extract_round_trip(workdir, capsys, rng):
    msg = format_bits(random_message(32, rng))
    code, out, _ = run(["embed", workdir / "cover.png", workdir / "wm.png", "--message", msg,
                        "--config", workdir / "cfg.json"], capsys)
    assert code == 0 and (workdir / "wm.png").exists() and "psnr" in out
    code, out, _ = run(["extract", workdir / "wm.png", "--config", workdir / "cfg.json", "--expect", msg], capsys)
    assert code == 0
    lines = out.split()
    assert lines[0] == msg and "bra 1.0000" in out


def test_exit_codes(workdir, capsys, tmp_path):
    long_cfg = tmp_path / "long.json"
    long_cfg.write_text(json.dumps({"embed_mode": "substitutive", "bit_length": 4096, "radius": 20}))
    code, _, _ = run(["embed", workdir / "cover.png", workdir / "x.png", "--message", "01" * 2048,
                      "--config", long_cfg], capsys)
    assert code == 4
    code, _, _ = run(["extract", workdir / "cover.png", "--config", workdir / "missing.json"], capsys)
    assert code == 2
    code, _, _ = run(["extract", workdir / "nothing.png", "--config", workdir / "cfg.json"], capsys)
    assert code == 3
    code, _, _ = run(["attack", workdir / "cover.png", workdir / "x.png", "--kind", "warp"], capsys)
    assert code == 2
    code, _, _ = run(["capacity", 256, 256, 3, 1, 0.6, 1], capsys)
    assert code == 2


def test_attack_commands(workdir, capsys):
    src, a, b = workdir / "cover.png", workdir / "a.png", workdir / "b.png"
    assert run(["attack", src, a, "--kind", "flip_h"], capsys)[0] == 0
    assert run(["attack", a, b, "--kind", "flip_h"], capsys)[0] == 0
    assert np.array_equal(np.asarray(PILImage.open(b)), np.asarray(PILImage.open(src)))
    run(["attack", src, a, "--kind", "jpeg", "--strength", "1.0"], capsys)
    run(["attack", src, b, "--kind", "jpeg", "--strength", "0.0"], capsys)
    cover = load_image(src)
    assert ssim(cover, load_image(a)) < ssim(cover, load_image(b))


def test_capacity(capsys):
    code, out, _ = run(["capacity", 256, 256, 3, 1, 0.2, 1], capsys)
    assert code == 0 and out.strip() == "9830"
    _, out2, _ = run(["capacity", 512, 512, 3, 1, 0.2, 1], capsys)
    assert int(out2) == 4 * 49152 * 0.2 // 1 or int(out2) == int(4 * 49152 * 0.2)


def test_bench_command(workdir, capsys, tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(2):
        img = synthetic_image(64, np.random.default_rng(i))
        PILImage.fromarray(img.to_hwc().astype(np.uint8)).save(corpus / f"{i}.png")
    args = ["bench", corpus, "--attacks", "none,noise,jpeg", "--strengths", "0,0.5,1",
            "--config", workdir / "cfg.json", "--seed", 1]
    assert run(args + ["--out", tmp_path / "r1"], capsys)[0] == 0
    assert run(args + ["--out", tmp_path / "r2", "--threads", 3], capsys)[0] == 0
    t1 = (tmp_path / "r1" / "rows.csv").read_bytes()
    assert t1 == (tmp_path / "r2" / "rows.csv").read_bytes()
    assert t1.decode().count("\n") == 19
    code, _, _ = run(["bench", tmp_path / "empty_dir", "--out", tmp_path / "r3"], capsys)
    assert code in (2, 3)


def test_train_command(workdir, capsys, tmp_path):
    cfg = tmp_path / "t.json"
    cfg.write_text(json.dumps({"bit_length": 8, "radius": 5, "conv_layers": 1}))
    out0 = tmp_path / "m0.json"
    code, _, _ = run(["train", "--synthetic", 2, "--size", 32, "--steps", 0, "--config", cfg, "--output", out0,
                      "--seed", 3], capsys)
    assert code == 0
    from specmark.model import SpecMarkModel, load_model
    init = SpecMarkModel.initialize(3, 1, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip(load_model(out0).encoder.params(), init.encoder.params()))
    out1 = tmp_path / "m1.json"
    code, _, _ = run(["train", "--synthetic", 2, "--size", 32, "--steps", 3, "--batch-size", 2, "--config", cfg,
                      "--output", out1, "--report", tmp_path / "r.csv"], capsys)
    assert code == 0 and (tmp_path / "r.csv").read_text().count("\n") == 4


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "specmark", "capacity", "256", "256", "3", "1", "0.2", "1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "9830"
