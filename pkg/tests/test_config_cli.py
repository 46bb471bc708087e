import csv
import json
from pathlib import Path

import numpy as np
import pytest

from charlab import cli
from charlab.config import config_hash, load_config
from charlab.errors import ConfigError
from charlab.theorems import VIOLATION, TheoremVerdict

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = {"theorem": "sd", "seed": 1, "d": 1,
        "marginals": [{"family": "gaussian", "cov": 1.0}, {"family": "gaussian", "cov": 1.0}],
        "operators": {"A": [1, 1], "B": [1, -1]}, "elimination": {"replays": 1}}


def write(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def report(out_dir):
    return json.loads((Path(out_dir) / "report.json").read_text())


def test_defaults_are_echoed():
    cfg = load_config(dict(BASE))
    assert cfg.echo["grid"] == {"rays": 8, "radii": 12, "radius": 2.0, "floor": 0.2}
    assert cfg.echo["certify"]["D_max"] == 4 and cfg.echo["source"]["N"] == 100_000
    assert cfg.echo["source"]["bootstrap"] == 200 and cfg.seed == 1


@pytest.mark.parametrize("mutate,field", [
    (lambda r: r.pop("seed"), "seed"),
    (lambda r: r.update(theorem="cramer"), "theorem"),
    (lambda r: r.update(bogus=1), "config"),
    (lambda r: r.update(source={"kind": "magic"}), "source.kind"),
    (lambda r: r.update(operators={"A": [1], "B": [1, -1]}), "operators.A"),
    (lambda r: r.update(grid={"rays": 0}), "grid.rays"),
    (lambda r: r.update(coupling=[{"pair": [1, 3], "block": 0.1}]), "coupling[1]"),
])
def test_config_errors_name_the_field(mutate, field):
    raw = json.loads(json.dumps(BASE))
    mutate(raw)
    with pytest.raises(ConfigError) as exc:
        load_config(raw)
    assert field in str(exc.value)


def test_seed_override(monkeypatch):
    monkeypatch.setenv("CHARLAB_SEED", "42")
    cfg = load_config(dict(BASE))
    assert cfg.seed == 42 and cfg.echo["seed"] == 42
    monkeypatch.setenv("CHARLAB_SEED", "x")
    with pytest.raises(ConfigError, match="CHARLAB_SEED"):
        load_config(dict(BASE))


def test_seed_override_without_config_seed(monkeypatch):
    raw = dict(BASE)
    raw.pop("seed")
    monkeypatch.setenv("CHARLAB_SEED", "3")
    assert load_config(raw).seed == 3


def test_toml_and_json_agree(tmp_path):
    toml = load_config(CONFIGS / "sd_gaussian.toml")
    js = load_config(write(tmp_path, toml.echo))
    assert js.config_hash == toml.config_hash


def test_run_exit_0_and_report(tmp_path):
    assert run_cli("run", CONFIGS / "sd_gaussian.toml", "--out-dir", tmp_path) == 0
    rep = report(tmp_path)
    assert rep["schema_version"] == 1 and rep["conclusion"] == "consistent_with_theorem"
    assert rep["environment"]["config_hash"] == config_hash(rep["config"])
    assert rep["artifacts"] == ["field_lemma1.csv"]
    rows = list(csv.reader(open(tmp_path / "field_lemma1.csv")))
    assert rows[0] == ["f1", "f2", "g1", "g2", "re", "im", "se"]
    assert max(abs(float(r[-3])) for r in rows[1:]) <= 1e-10


def test_run_uniform_contrapositive(tmp_path):
    assert run_cli("run", CONFIGS / "sd_uniform.toml", "--out-dir", tmp_path) == 0


def test_run_exit_1_singular_operator(tmp_path, capsys):
    raw = json.loads(json.dumps(BASE))
    raw["operators"]["A"] = [0, 1]
    assert run_cli("run", write(tmp_path, raw), "--out-dir", tmp_path) == 1
    assert "A_1" in capsys.readouterr().err


def test_run_exit_1_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("theorem = \n")
    assert run_cli("run", bad) == 1
    assert "toml" in capsys.readouterr().err
    assert run_cli("run", tmp_path / "missing.toml") == 1


def test_run_exit_2_on_violation(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "run", lambda spec: TheoremVerdict(spec.theorem, True, VIOLATION, seed=spec.seed))
    assert run_cli("run", write(tmp_path, BASE), "--out-dir", tmp_path) == 2
    assert report(tmp_path)["conclusion"] == VIOLATION


def test_run_exit_3_heyde_rejected(tmp_path):
    assert run_cli("run", CONFIGS / "heyde_rejected.toml", "--out-dir", tmp_path) == 3
    assert not report(tmp_path)["preconditions"]["ok"]


def test_run_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run_cli("run", CONFIGS / "sd_uniform.toml", "--out-dir", out) == 0
    ra, rb = report(a), report(b)
    ra.pop("timing_ms"), rb.pop("timing_ms")
    assert ra == rb


def test_verify_algebra_exit_codes(capsys):
    assert run_cli("verify-algebra", "--n", 2, "--d", 1, "--instances", 1) == 0
    out = capsys.readouterr().out
    assert "all identities hold" in out
    assert run_cli("verify-algebra", "--n", 2, "--d", 1, "--instances", 1, "--inject-fault") == 2
    assert "first failing stage eliminate_psi_2" in capsys.readouterr().out
    assert run_cli("verify-algebra", "--n", 1) == 1


def test_dump_field_gaussian(tmp_path):
    out = tmp_path / "f.csv"
    assert run_cli("dump-field", CONFIGS / "sd_gaussian.toml", "--equation", "lemma1", "--out", out) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0][-3:] == ["re", "im", "se"]
    vals = np.array([[float(x) for x in r[-3:-1]] for r in rows[1:]])
    assert np.abs(vals).max() <= 1e-10


def test_dump_field_exponential(tmp_path):
    out = tmp_path / "f.csv"
    assert run_cli("dump-field", CONFIGS / "sample_mean_exponential.toml", "--equation", "lemma6", "--out", out) == 0
    rows = list(csv.reader(open(out)))
    assert max(abs(complex(float(r[-3]), float(r[-2]))) for r in rows[1:]) > 1e-2


def test_dump_field_empty_grid(tmp_path, capsys):
    raw = json.loads(json.dumps(BASE))
    raw["marginals"] = [{"family": "uniform"}] * 2
    raw["grid"] = {"floor": 0.9999}
    out = tmp_path / "f.csv"
    assert run_cli("dump-field", write(tmp_path, raw), "--equation", "lemma1", "--out", out) == 3
    assert "culled" in capsys.readouterr().err and not out.exists()


def test_dump_field_q_needs_pair_forms(tmp_path, capsys):
    raw = {**BASE, "theorem": "sample_mean"}
    raw.pop("operators")
    raw["marginals"] = [{"family": "gaussian", "cov": 1.0}] * 3
    assert run_cli("dump-field", write(tmp_path, raw), "--equation", "q", "--out", tmp_path / "q.csv") == 1
    assert "not a pair of forms" in capsys.readouterr().err


def test_dump_field_q_of_forms(tmp_path):
    out = tmp_path / "q.csv"
    assert run_cli("dump-field", CONFIGS / "sd_gaussian.toml", "--equation", "q", "--out", out) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0][-3:] == ["re", "im", "se"] and len(rows) > 1
