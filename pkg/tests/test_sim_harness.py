import json
import subprocess
import sys

import numpy as np
import pytest

from lcma.sim_harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    ResultRow,
    emit_csv,
    load_results,
    run_experiment,
)

TINY = dict(
    q=2, users=2, n_s=1, n_r=2, fading="rayleigh_block",
    code_n=16, code_k=8, detector="lf", receiver="single",
    snr_db=(8.0,), trials=40, max_frame_errors=40, seed=11,
)


def test_config_validation_rejects_bad_values():
    for bad in (
        dict(q=1),
        dict(users=0),
        dict(n_s=0),
        dict(fading="rician"),
        dict(detector="zf"),
        dict(receiver="triple"),
        dict(snr_db=()),
        dict(trials=0),
        dict(max_frame_errors=0),
        dict(code_n=8, code_k=8),
        dict(theta=-1.0),
        dict(seed=-1),
        dict(max_stages=0),
    ):
        with pytest.raises(ConfigError):
            ExperimentConfig(**{**TINY, **bad}).validate()


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"q": 2, "users": 2, "bogus_key": 1})


def test_config_from_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"q": 2, "users": 3, "snr_db": [1, 2]}))
    cfg = ExperimentConfig.from_json(p)
    assert cfg.users == 3 and cfg.snr_db == (1.0, 2.0)
    p.write_text("not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(p)
    p.write_text("[1,2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(p)


def test_spreading_dimension_check():
    cfg = ExperimentConfig(**{**TINY, "n_s": 4, "spreading": "table2"})
    with pytest.raises(ConfigError, match="spreading is"):
        run_experiment(cfg)
    cfg = ExperimentConfig(**{**TINY, "n_s": 2})  # n_s > 1 without matrix
    with pytest.raises(ConfigError):
        run_experiment(cfg)


def test_noise_free_extremes():
    # very high SNR -> zero frame errors; zero SNR -> all frames bad
    high = ExperimentConfig(**{**TINY, "fading": "awgn", "n_r": 1, "users": 1,
                               "snr_db": (30.0,), "trials": 20})
    rows = run_experiment(high)
    assert rows[0].fer == 0.0 and rows[0].mean_recovered == 1.0
    low = ExperimentConfig(**{**TINY, "snr_db": (-20.0,), "trials": 20})
    rows = run_experiment(low)
    assert rows[0].fer > 0.9


def test_early_stop_at_budget():
    cfg = ExperimentConfig(**{**TINY, "snr_db": (-20.0,), "trials": 500, "max_frame_errors": 10})
    rows = run_experiment(cfg)
    assert rows[0].frame_errors == 10
    assert rows[0].trials_run < 500


def test_seed_reproducibility_and_snr_isolation():
    cfg = ExperimentConfig(**TINY)
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert a[0].frame_errors == b[0].frame_errors
    assert a[0].bit_errors == b[0].bit_errors
    # trial RNG depends on the SNR index: prepending a point must not change
    # how many trials the shared budget allows to agree... but rerunning the
    # same grid twice must agree exactly row by row
    two = ExperimentConfig(**{**TINY, "snr_db": (8.0, 8.0)})
    rows = run_experiment(two)
    assert rows[0].frame_errors != rows[1].frame_errors or rows[0].bit_errors != rows[1].bit_errors


def test_multi_receiver_runs():
    cfg = ExperimentConfig(**{**TINY, "receiver": "multi", "trials": 20})
    rows = run_experiment(cfg)
    assert rows[0].trials_run == 20
    assert 0 <= rows[0].mean_recovered <= 2.0


def test_exhaustive_and_lsd_detectors_run():
    for det in ("exhaustive", "lsd"):
        cfg = ExperimentConfig(**{**TINY, "detector": det, "trials": 10})
        rows = run_experiment(cfg)
        assert rows[0].trials_run == 10


def test_code_file_round_trip_in_harness(tmp_path):
    from lcma.ring_code import make_test_codes, save_code

    code = make_test_codes(2, 16, 8, seed=3)
    p = tmp_path / "code.txt"
    save_code(code, p)
    cfg = ExperimentConfig(**{**TINY, "code_file": str(p), "trials": 10})
    rows = run_experiment(cfg)
    assert rows[0].trials_run == 10
    bad = ExperimentConfig(**{**TINY, "q": 4, "code_file": str(p)})
    with pytest.raises(ConfigError):
        run_experiment(bad)


def test_emit_csv_header_and_empty(tmp_path):
    p = tmp_path / "out.csv"
    emit_csv([], p)
    assert p.read_text() == CSV_HEADER + "\n"


def test_emit_csv_round_trip(tmp_path):
    rows = [
        ResultRow(snr_db=1.5, trials_run=100, frame_errors=7, bit_errors=123,
                  fer=0.07, ber=123 / 48000, mean_recovered=1.93, wall_time_s=0.5),
        ResultRow(snr_db=2.0, trials_run=50, frame_errors=1, bit_errors=3,
                  fer=0.02, ber=3 / 24000, mean_recovered=2.0, wall_time_s=0.1),
    ]
    p = tmp_path / "out.csv"
    emit_csv(rows, p)
    back = load_results(p)
    assert back == rows


def test_csv_determinism_excluding_wall_time(tmp_path):
    cfg = ExperimentConfig(**{**TINY, "trials": 30})
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_experiment(cfg), p1)
    emit_csv(run_experiment(cfg), p2)
    strip = lambda p: [ln.rsplit(",", 1)[0] for ln in p.read_text().splitlines()]
    assert strip(p1) == strip(p2)


# ---- CLI ----------------------------------------------------------------


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "lcma.cli", *args], capture_output=True, text=True
    )


def test_cli_help_lists_flags():
    out = run_cli("sim", "--help")
    assert out.returncode == 0
    for flag in ("--q", "--users", "--ns", "--nr", "--snr", "--trials",
                 "--max-frame-errors", "--detector", "--receiver", "--list-size",
                 "--theta", "--code-file", "--spreading-file", "--seed", "--out"):
        assert flag in out.stdout


def test_cli_sim_runs_and_writes_csv(tmp_path):
    out_path = tmp_path / "res.csv"
    res = run_cli(
        "sim", "--q", "2", "--users", "2", "--ns", "1", "--nr", "2",
        "--fading", "rayleigh_block", "--code-n", "16", "--code-k", "8",
        "--snr", "6:10:2", "--trials", "20", "--max-frame-errors", "20",
        "--detector", "lf", "--receiver", "single", "--seed", "3",
        "--out", str(out_path),
    )
    assert res.returncode == 0, res.stderr
    rows = load_results(out_path)
    assert [r.snr_db for r in rows] == [6.0, 8.0, 10.0]


def test_cli_config_file_equivalent_to_flags(tmp_path):
    cfg = dict(q=2, users=2, n_s=1, n_r=2, fading="rayleigh_block",
               code_n=16, code_k=8, detector="lf", receiver="single",
               snr_db=[8.0], trials=15, max_frame_errors=15, seed=5)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    r1 = run_cli("sim", "--config", str(cfg_path), "--out", str(out1))
    r2 = run_cli(
        "sim", "--q", "2", "--users", "2", "--ns", "1", "--nr", "2",
        "--fading", "rayleigh_block", "--code-n", "16", "--code-k", "8",
        "--detector", "lf", "--receiver", "single", "--snr", "8",
        "--trials", "15", "--max-frame-errors", "15", "--seed", "5",
        "--out", str(out2),
    )
    assert r1.returncode == 0 and r2.returncode == 0
    strip = lambda p: [ln.rsplit(",", 1)[0] for ln in p.read_text().splitlines()]
    assert strip(out1) == strip(out2)


def test_cli_rejects_bad_config(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"nope": 1}))
    res = run_cli("sim", "--config", str(cfg_path))
    assert res.returncode == 2
    assert "unknown config keys" in res.stderr


def test_cli_rejects_bad_snr_spec():
    res = run_cli("sim", "--snr", "10:2:-1", "--trials", "5")
    assert res.returncode == 2


def test_cli_exit_code_on_bad_flag_value():
    res = run_cli("sim", "--detector", "nonsense")
    assert res.returncode == 2


def test_cli_gen_spreading(tmp_path):
    out_path = tmp_path / "sp.txt"
    res = run_cli("gen-spreading", "--k", "6", "--ns", "3", "--seed", "4",
                  "--out", str(out_path))
    assert res.returncode == 0, res.stderr
    from lcma.channel_model import load_spreading

    sp = load_spreading(out_path)
    assert sp.pattern.shape == (3, 6)


def test_cli_rates(tmp_path):
    out_path = tmp_path / "rates.csv"
    res = run_cli("rates", "--q", "2", "--users", "2", "--ns", "1", "--nr", "2",
                  "--fading", "awgn", "--snr", "0,10", "--samples", "400",
                  "--seed", "1", "--out", str(out_path))
    assert res.returncode == 0, res.stderr
    lines = out_path.read_text().splitlines()
    assert lines[0].startswith("snr_db,")
    assert len(lines) == 3
    r0 = float(lines[1].split(",")[1])
    r10 = float(lines[2].split(",")[1])
    assert r10 > r0
