"""End-to-end tests of the command line front end, run in process."""

import json

import numpy as np
import pytest

from nttsr.cli import main
from nttsr.dataset_tool import read_pairs
from nttsr.image_core import bicubic_resample, load_image, save_image
from nttsr.nttw import read_tensors

EXPECTED_SWAP_TENSORS = {
    "M.relu1_1", "M.relu2_1", "M.relu3_1",
    "S.relu1_1", "S.relu2_1", "S.relu3_1",
}


def run_cli(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def smooth_image(seed, n):
    rng = np.random.default_rng(seed)
    coarse = rng.random((max(4, n // 4), max(4, n // 4), 3))
    return np.clip(bicubic_resample(coarse, n / coarse.shape[0])[:n, :n], 0.0, 1.0)


@pytest.fixture
def workdir(tmp_path):
    save_image(smooth_image(0, 12), str(tmp_path / "lr.png"))
    save_image(smooth_image(1, 48), str(tmp_path / "ref.png"))
    save_image(smooth_image(2, 48), str(tmp_path / "hr.png"))
    # Small trunk so the pipeline commands stay fast.
    (tmp_path / "small.json").write_text(json.dumps({
        "transfer": {"levels": 3, "blocks": 2, "channels": 16},
    }))
    return tmp_path


def test_swap_writes_six_tensors(workdir):
    out = str(workdir / "pyr.nttw")
    code = run_cli(["swap", "--lr", str(workdir / "lr.png"),
                    "--refs", str(workdir / "ref.png"),
                    "--out", out, "--seed", "1"])
    assert code == 0
    tensors = read_tensors(out)
    assert set(tensors) == EXPECTED_SWAP_TENSORS
    assert tensors["M.relu1_1"].shape == (64, 48, 48)
    assert tensors["S.relu3_1"].shape == (12, 12)


def test_swap_reruns_byte_identical(workdir):
    argv = ["swap", "--lr", str(workdir / "lr.png"),
            "--refs", str(workdir / "ref.png"), "--seed", "3"]
    a, b = str(workdir / "a.nttw"), str(workdir / "b.nttw")
    assert run_cli(argv + ["--out", a]) == 0
    assert run_cli(argv + ["--out", b]) == 0
    assert (workdir / "a.nttw").read_bytes() == (workdir / "b.nttw").read_bytes()


def test_swap_missing_weight_file_exits_2(workdir, capsys):
    code = run_cli(["swap", "--lr", str(workdir / "lr.png"),
                    "--out", str(workdir / "x.nttw"),
                    "--weights", str(workdir / "absent.nttw")])
    assert code == 2
    assert "absent.nttw" in capsys.readouterr().err


def test_swap_corrupt_weight_file_exits_2(workdir):
    bad = workdir / "bad.nttw"
    bad.write_bytes(b"JUNKJUNKJUNKJUNK")
    code = run_cli(["swap", "--lr", str(workdir / "lr.png"),
                    "--out", str(workdir / "x.nttw"), "--weights", str(bad)])
    assert code == 2


def test_sr_output_size_and_determinism(workdir):
    argv = ["sr", "--lr", str(workdir / "lr.png"),
            "--refs", str(workdir / "ref.png"),
            "--config", str(workdir / "small.json"), "--seed", "5"]
    a, b = str(workdir / "sr_a.png"), str(workdir / "sr_b.png")
    assert run_cli(argv + ["--out", a]) == 0
    assert run_cli(argv + ["--out", b]) == 0
    assert load_image(a).shape == (48, 48, 3)
    assert (workdir / "sr_a.png").read_bytes() == (workdir / "sr_b.png").read_bytes()


def test_sr_self_reference_fallback(workdir):
    out = str(workdir / "sisr.png")
    code = run_cli(["sr", "--lr", str(workdir / "lr.png"),
                    "--config", str(workdir / "small.json"),
                    "--out", out, "--seed", "5"])
    assert code == 0
    assert load_image(out).shape == (48, 48, 3)


def test_eval_identical_images(workdir, capsys):
    hr = str(workdir / "hr.png")
    assert run_cli(["eval", "--sr", hr, "--hr", hr, "--seed", "0"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["psnr"] == "inf"
    assert result["ssim"] == 1.0
    assert result["rec"] == 0.0
    assert "per" in result and "total" in result
    assert "tex" not in result


def test_eval_constant_offset_psnr(workdir, capsys):
    a = np.full((24, 24, 3), 100.0 / 255.0)
    b = np.full((24, 24, 3), 101.0 / 255.0)
    save_image(a, str(workdir / "a.png"))
    save_image(b, str(workdir / "b.png"))
    assert run_cli(["eval", "--sr", str(workdir / "a.png"),
                    "--hr", str(workdir / "b.png")]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["psnr"] == pytest.approx(48.131, abs=1e-3)


def test_eval_with_pyramid_adds_texture_term(workdir, capsys):
    pyr = str(workdir / "pyr.nttw")
    sr = str(workdir / "sr.png")
    base = ["--lr", str(workdir / "lr.png"), "--refs", str(workdir / "ref.png"),
            "--seed", "1"]
    assert run_cli(["swap"] + base + ["--out", pyr]) == 0
    assert run_cli(["sr"] + base + ["--config", str(workdir / "small.json"),
                                    "--out", sr]) == 0
    assert run_cli(["eval", "--sr", sr, "--hr", str(workdir / "hr.png"),
                    "--pyramid", pyr, "--seed", "1"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["tex"] >= 0.0
    assert result["total"] >= 0.0


def test_eval_shape_mismatch_exits_3(workdir):
    code = run_cli(["eval", "--sr", str(workdir / "lr.png"),
                    "--hr", str(workdir / "hr.png")])
    assert code == 3


def test_usage_errors_exit_1(workdir):
    assert run_cli(["no-such-command"]) == 1
    assert run_cli([]) == 1
    # missing required setting after config resolution
    assert run_cli(["sr", "--out", str(workdir / "x.png")]) == 1


def test_missing_input_image_exits_2(workdir):
    code = run_cli(["sr", "--lr", str(workdir / "nope.png"),
                    "--out", str(workdir / "x.png")])
    assert code == 2


def test_bad_levels_exit_3(workdir):
    for spec in ("5,5,1,0", "10,5,1", "a,b,c,d"):
        code = run_cli(["pair", "--dir", str(workdir), "--out",
                        str(workdir / "p.jsonl"), "--levels", spec])
        assert code == 3, spec


def test_pair_command_writes_jsonl(workdir):
    gallery = workdir / "gallery"
    gallery.mkdir()
    for i in range(3):
        save_image(smooth_image(10 + i, 48), str(gallery / ("g%d.png" % i)))
    out = str(workdir / "pairs.jsonl")
    code = run_cli(["pair", "--dir", str(gallery), "--out", out,
                    "--levels", "80,30,5,0", "--crop-size", "48",
                    "--seed", "2"])
    assert code == 0
    records = read_pairs(out)
    assert len(records) == 3
    assert all(rec.level in ("L1", "L2", "L3", "L4") for rec in records)


def test_warp_ref_round_trip(workdir):
    big = smooth_image(7, 160)
    save_image(big, str(workdir / "big.png"))
    out = str(workdir / "warp.png")
    assert run_cli(["warp-ref", "--hr", str(workdir / "big.png"),
                    "--out", out, "--seed", "4"]) == 0
    warped = load_image(out)
    assert warped.shape == (160, 160, 3)
    assert not np.array_equal(warped, load_image(str(workdir / "big.png")))
    ident = str(workdir / "ident.png")
    assert run_cli(["warp-ref", "--hr", str(workdir / "big.png"),
                    "--out", ident, "--zero-motion"]) == 0
    assert np.array_equal(load_image(ident), load_image(str(workdir / "big.png")))


def test_warp_ref_small_source_exits_3(workdir):
    code = run_cli(["warp-ref", "--hr", str(workdir / "hr.png"),
                    "--out", str(workdir / "x.png")])
    assert code == 3


def test_export_config_defaults(capsys):
    assert run_cli(["export-config"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["seed"] == 0
    assert doc["swap"]["patch_size"] == 3
    assert doc["swap"]["upscale_factor"] == 4
    assert doc["transfer"]["blocks"] == 16
    assert doc["loss_weights"]["rec"] == 1.0


def test_export_config_merges_file(workdir, capsys):
    cfg = workdir / "run.json"
    cfg.write_text(json.dumps({"seed": 7, "swap": {"patch_size": 5}}))
    assert run_cli(["export-config", "--config", str(cfg)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["seed"] == 7
    assert doc["swap"]["patch_size"] == 5
    assert doc["swap"]["stride"] == 1


def test_flag_overrides_config_file(workdir):
    cfg = workdir / "run.json"
    cfg.write_text(json.dumps({
        "paths": {"lr": str(workdir / "lr.png"), "out": str(workdir / "file.nttw")},
    }))
    flag_out = str(workdir / "flag.nttw")
    assert run_cli(["swap", "--config", str(cfg), "--out", flag_out]) == 0
    assert (workdir / "flag.nttw").exists()
    assert not (workdir / "file.nttw").exists()


def test_threads_env_fallback(workdir, monkeypatch):
    argv = ["swap", "--lr", str(workdir / "lr.png"),
            "--refs", str(workdir / "ref.png"), "--seed", "3"]
    a, b = str(workdir / "t1.nttw"), str(workdir / "tenv.nttw")
    assert run_cli(argv + ["--out", a, "--threads", "1"]) == 0
    monkeypatch.setenv("NTT_THREADS", "2")
    assert run_cli(argv + ["--out", b]) == 0
    assert (workdir / "t1.nttw").read_bytes() == (workdir / "tenv.nttw").read_bytes()
    monkeypatch.setenv("NTT_THREADS", "zero")
    assert run_cli(argv + ["--out", str(workdir / "x.nttw")]) == 3
