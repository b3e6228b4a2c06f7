import json
from pathlib import Path

import pytest

from kerr_ring.cli import EXIT_CONFIG, EXIT_OK, EXIT_RESOURCE, main
from kerr_ring.config import load_config, parse_override
from kerr_ring.exceptions import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_every_figure_config_resolves(capsys):
    confs = sorted(CONFIGS.glob("fig*.conf"))
    assert len(confs) >= 10
    for conf in confs:
        # --dry-run resolves parameters identically for every subcommand
        code, out = run(capsys, "sweep", "--config", conf, "--dry-run")
        assert code == EXIT_OK, conf
        assert "model" in json.loads(out.out)


def test_dry_run_applies_overrides(capsys):
    code, out = run(capsys, "sweep", "--config", CONFIGS / "fig3b_sweep.conf", "--param", "v=0.25", "--param", "sweep.x_num=5", "--seed", "9", "--dry-run")
    resolved = json.loads(out.out)
    assert code == 0
    assert resolved["model"]["v"] == 0.25
    assert resolved["sweep"]["x_num"] == "5"
    assert resolved["seed"] == 9


def test_override_parsing():
    assert parse_override("f_in=2") == ("model", "f_in", "2")
    assert parse_override("map.x_num = 11") == ("map", "x_num", "11")
    with pytest.raises(ConfigError):
        parse_override("nothing")
    with pytest.raises(ConfigError):
        parse_override("plot.size=3")


def test_invalid_model_is_config_error(capsys):
    code, out = run(capsys, "dynamics", "--param", "gamma=-1")
    assert code == EXIT_CONFIG
    err = json.loads(out.err)
    assert err["code"] == EXIT_CONFIG and "gamma" in err["message"]


def test_missing_config_file(capsys, tmp_path):
    code, _ = run(capsys, "dynamics", "--config", tmp_path / "absent.conf")
    assert code == EXIT_CONFIG


def test_missing_grid_key(capsys, tmp_path):
    code, out = run(capsys, "spectrum", "--out", tmp_path)
    assert code == EXIT_CONFIG
    assert "v_start" in out.err


def test_resource_limit_exit(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("KERR_RING_MAX_DIM", "10")
    code, out = run(capsys, "quantum", "--config", CONFIGS / "fig4ef_quantum.conf", "--out", tmp_path)
    assert code == EXIT_RESOURCE
    assert "MiB" in json.loads(out.err)["message"]


def test_zero_drive_dynamics_decays(capsys, tmp_path):
    code, _ = run(capsys, "dynamics", "--config", CONFIGS / "fig2b_dynamics.conf", "--param", "f_in=0", "--param", "dynamics.t_end=20", "--out", tmp_path)
    assert code == 0
    last = (tmp_path / "dynamics_0.csv").read_text().strip().splitlines()[-1].split(",")
    assert float(last[5]) + float(last[6]) < 1e-10


def test_dynamics_collapse_from_config(capsys, tmp_path):
    code, _ = run(capsys, "dynamics", "--config", CONFIGS / "fig2b_dynamics.conf", "--out", tmp_path)
    assert code == 0
    rows = (tmp_path / "dynamics_summary.csv").read_text().splitlines()
    assert rows[0].startswith("run,")
    assert abs(float(rows[1].split(",")[5])) < 0.05
    assert (tmp_path / "dynamics.svg").read_text().startswith("<?xml")


def test_vacuum_quantum_config(capsys, tmp_path):
    code, _ = run(capsys, "quantum", "--param", "gamma=2", "--param", "quantum.n_max=3", "--out", tmp_path)
    assert code == 0
    first = (tmp_path / "distributions.csv").read_text().splitlines()[1].split(",")
    assert float(first[1]) == pytest.approx(1.0)


def test_sweep_map_spectrum_outputs(capsys, tmp_path):
    assert run(capsys, "sweep", "--config", CONFIGS / "fig3c_sweep.conf", "--param", "sweep.x_num=6", "--out", tmp_path / "s")[0] == 0
    header = (tmp_path / "s" / "sweep.csv").read_text().splitlines()[0]
    assert header == "x,re_alpha,im_alpha,re_beta,im_beta,n_alpha,n_beta,stability"
    assert run(capsys, "map", "--config", CONFIGS / "fig3d_map_delta.conf", "--param", "map.x_num=2", "--param", "map.f_num=2", "--out", tmp_path / "m")[0] == 0
    assert (tmp_path / "m" / "map.csv").read_text().splitlines()[0] == "delta,f_in,count_total,count_stable"
    assert run(capsys, "spectrum", "--config", CONFIGS / "fig1_spectrum.conf", "--param", "spectrum.v_num=3", "--out", tmp_path / "e")[0] == 0
    assert (tmp_path / "e" / "spectrum.csv").read_text().splitlines()[0] == "v,eig_1,eig_2,eig_3"


def test_snr_requires_noise_axis(capsys, tmp_path):
    code, _ = run(capsys, "snr", "--param", "snr.tau_start=1", "--param", "snr.tau_stop=10", "--param", "snr.tau_num=2", "--out", tmp_path)
    assert code == EXIT_CONFIG


def test_config_seed_default(tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("[model]\ndelta = -1\n[run]\nseed = 4\n")
    assert load_config(conf).seed == 4
    assert load_config(conf, seed=1).seed == 1
    conf.write_text("[plot]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(conf)


def test_byte_identical_outputs(capsys, tmp_path):
    args = ["map", "--config", CONFIGS / "fig3e_map_epsilon.conf", "--param", "map.x_num=3", "--param", "map.f_num=4"]
    run(capsys, *args, "--out", tmp_path / "one")
    run(capsys, *args, "--out", tmp_path / "two", "--threads", "2")
    for name in ("map.csv", "map_total.svg"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
