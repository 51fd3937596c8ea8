import json
from pathlib import Path

import pytest

from percolab.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, SCHEMA, main
from percolab.config import ConfigError, load_config, parse_config


def write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def body(path: Path) -> str:
    lines = path.read_text().splitlines()
    assert lines[0] == SCHEMA
    return "\n".join(lines[1:])


def manifest(out: Path) -> dict:
    return json.loads((out / "manifest.json").read_text())


def test_missing_config_names_the_path(tmp_path, capsys):
    missing = tmp_path / "nope.toml"
    assert main(["run", "--config", str(missing), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert str(missing) in capsys.readouterr().err


def test_unknown_subcommand_and_keys(tmp_path):
    assert main(["frobnicate", "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    cfg = write(tmp_path / "c.toml", 'command = "xprob"\nseed = 1\n[xprob]\nbogus = 3\n')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    cfg = write(tmp_path / "d.toml", 'command = "xprob"\nseed = 1\nextra = 2\n')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o2")]) == EXIT_CONFIG


def test_seed_is_mandatory(tmp_path):
    assert main(["xprob", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_config_type_checks(tmp_path):
    with pytest.raises(ConfigError):
        parse_config({"command": "xprob", "seed": 1, "xprob": {"replicas": "many"}})
    cfg = parse_config({"command": "sweep", "seed": 1, "sweep": {"lambda": -0.5}})
    assert cfg.params.lam == -0.5 and cfg.resolved()["sweep"]["lambda"] == -0.5
    with pytest.raises(ConfigError):
        load_config(Path("/nonexistent/x.toml"))


def test_xprob_run(tmp_path):
    cfg = write(tmp_path / "x.toml", 'command = "xprob"\nseed = 3\n[xprob]\nns = [2, 4]\n'
                                    'ps = [0.5, 0.6]\nreplicas = 200\n')
    out = tmp_path / "x"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    rows = body(out / "xprob.csv").splitlines()
    assert len(rows) == 1 + 4
    m = manifest(out)
    assert m["status"] == "complete" and m["seed"] == 3 and m["finished"]
    assert "xprob.csv" in m["outputs"] and m["config"]["xprob"]["replicas"] == 200
    # a finished directory is never overwritten
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_CONFIG


def test_corrlen_sentinel_and_fit(tmp_path):
    cfg = write(tmp_path / "c.toml", 'command = "corrlen"\nseed = 2\n[corrlen]\n'
                                    'ps = [0.5]\nn_max = 8\nmax_replicas = 512\n')
    out = tmp_path / "c"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert "exceeds n_max" in body(out / "corrlen.csv")
    cfg = write(tmp_path / "f.toml", 'command = "corrlen"\nseed = 2\n[corrlen]\n'
                                    'ps = [0.6, 0.55, 0.53]\nn_max = 64\n')
    out = tmp_path / "f"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--fit"]) == EXIT_OK
    fit = json.loads((out / "fit.json").read_text())
    assert fit["exponent"] < 0


def test_loops_on_monochrome_config_is_header_only(tmp_path):
    cfg = write(tmp_path / "l.toml", 'command = "loops"\nseed = 0\n[loops]\np = 1.0\nL = 16\n')
    out = tmp_path / "l"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert len(body(out / "loops.csv").splitlines()) == 1
    assert (out / "replica_0000.loops").read_text() == ""


def test_loops_then_metric(tmp_path):
    out = tmp_path / "l"
    assert main(["loops", "--out", str(out), "--seed", "5"]) == EXIT_OK
    cfg = write(tmp_path / "m.toml", 'command = "metric"\nseed = 0\n[metric]\n'
                                    f'dump = "l/replica_0000.loops"\nmax_loops = 4\nh = 0.5\n')
    mout = tmp_path / "m"
    assert main(["run", "--config", str(cfg), "--out", str(mout)]) == EXIT_OK
    lines = body(mout / "distance.csv").splitlines()
    assert len(lines) == 1 + min(4, manifest(mout)["n_curves"])


def test_forced_truncation_exits_2_and_keeps_results(tmp_path):
    # a tiny window at criticality: fragments hide the largest loop far too often
    cfg = write(tmp_path / "s.toml", 'command = "sweep"\nseed = 1\n[sweep]\nalpha = 1.0\n'
                                    'deltas = [0.125, 0.0625, 0.03125]\nreplicas = 50\n'
                                    'probe_replicas = 64\nprobe_max_replicas = 256\n')
    out = tmp_path / "s"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_RUNTIME
    m = manifest(out)
    assert m["status"] == "aborted" and m["aborted_levels"]
    assert all(r > 0.2 for i, r in enumerate(m["truncation_rates"]) if i in m["aborted_levels"])
    levels = body(out / "levels.csv").splitlines()
    assert len(levels) == 4 and (out / "verdict.txt").exists()


def test_events_worker_independence_and_plots(tmp_path):
    text = ('command = "events"\nseed = 9\n[events]\nevents = ["H^w(8)", "C^b(3,10)", '
            '"D(2)", "G(4)"]\nL = 16\nreplicas = 100\n')
    cfg = write(tmp_path / "e.toml", text)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(a), "--workers", "1"]) == EXIT_OK
    assert main(["run", "--config", str(cfg), "--out", str(b), "--workers", "3",
                 "--plot"]) == EXIT_OK
    assert (a / "events.csv").read_bytes() == (b / "events.csv").read_bytes()
    assert (b / "events.png").stat().st_size > 0 and not (a / "events.png").exists()


def test_bad_event_is_a_config_error(tmp_path):
    cfg = write(tmp_path / "e.toml", 'command = "events"\nseed = 9\n[events]\nevents = ["Z"]\n')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "e")]) == EXIT_CONFIG
