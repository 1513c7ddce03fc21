import csv
import json
import math
from importlib import resources

import pytest

from sbscavity import cli
from sbscavity.config import SCHEMA, RunConfig, UnknownKeyError, default_config_text
from sbscavity.core import ConfigError


def _run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def _strict_json(path):
    def bad(name):
        raise ValueError(f"non-standard JSON constant {name}")
    return json.loads(path.read_text(), parse_constant=bad)


def test_shipped_defaults_match_schema():
    text = resources.files("sbscavity").joinpath("defaults.cfg").read_text()
    assert RunConfig.from_text(text) == RunConfig.defaults()
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#")).strip()
    assert body == default_config_text().strip()


def test_text_round_trip():
    cfg = RunConfig.defaults().with_overrides({"drive.power_mW": "75", "noise.thermoptic": "off",
                                               "drive.powers_mW": "10, 20 30"})
    again = RunConfig.from_text(cfg.to_text())
    assert again == cfg
    assert again["drive.powers_mW"] == (10.0, 20.0, 30.0)
    assert again.content_hash() == cfg.content_hash()


def test_every_schema_key_has_a_default_of_its_type():
    cfg = RunConfig.defaults()
    for sec, keys in SCHEMA.items():
        for k, (parser, default, _) in keys.items():
            assert parser(default) == cfg[f"{sec}.{k}"]


def test_unknown_key_rejected():
    with pytest.raises(UnknownKeyError) as e:
        RunConfig.from_text("[cavity]\nR3 = 0.5\n")
    assert e.value.key == "cavity.R3"
    with pytest.raises(UnknownKeyError):
        RunConfig.defaults()["nosuch.key"]


def test_keys_are_case_sensitive():
    with pytest.raises(UnknownKeyError):
        RunConfig.from_text("[cavity]\nr1 = 0.5\n")


def test_bad_value_is_a_config_error():
    with pytest.raises(ConfigError):
        RunConfig.defaults().with_overrides({"noise.thermoptic": "maybe"})


def test_cli_unknown_key_in_file_exits_2(tmp_path, capsys):
    f = tmp_path / "bad.cfg"
    f.write_text("[drive]\npower_W = 0.03\n")
    assert _run(tmp_path, "phonons", "--config", str(f)) == 2
    assert "drive.power_W" in capsys.readouterr().err


def test_cli_unknown_key_in_set_exits_2(tmp_path, capsys):
    assert _run(tmp_path, "phonons", "--set", "mechanics.massive=1") == 2
    assert "mechanics.massive" in capsys.readouterr().err


def test_cli_bad_value_exits_2(tmp_path):
    assert _run(tmp_path, "phonons", "--set", "mechanics.mass=heavy") == 2
    assert _run(tmp_path, "phonons", "--delta-scan", "1:2") == 2


def test_cli_phonons_outputs(tmp_path):
    assert _run(tmp_path, "phonons", "--delta-scan=-1:1:11", "--set", "mechanics.Q=1e5") == 0
    rows = list(csv.reader((tmp_path / "phonons.csv").open()))
    assert rows[0][0] == "Delta [rad/s]" and all("[" in h for h in rows[0])
    assert len(rows) == 12
    assert all(len(v.split("e")[0].replace("-", "").replace(".", "")) == 9
               for r in rows[1:] for v in r[:-1] if math.isfinite(float(v)))
    man = _strict_json(tmp_path / "phonons_manifest.json")
    cfg = RunConfig.defaults().with_overrides({"mechanics.Q": "1e5"})
    assert man["config_hash"] == cfg.content_hash()
    assert man["config"]["mechanics.Q"] == 1e5
    assert man["outputs"] == ["phonons.csv"]


def test_manifest_is_standard_json_with_infinite_q(tmp_path):
    assert _run(tmp_path, "phonons", "--delta-scan", "0.5:1:3") == 0
    man = _strict_json(tmp_path / "phonons_manifest.json")
    assert man["config"]["mechanics.Q"] == "inf"


def test_cli_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["phonons", "--delta-scan=-1:1:7", "--set", "mechanics.Q=1e6", "--out", str(d)]) == 0
    for name in ("phonons.csv", "phonons_manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_jobs_environment_overrides_flag(monkeypatch):
    monkeypatch.setenv(cli.JOBS_ENV, "1")
    assert cli.job_count(4) == 1
    monkeypatch.setenv(cli.JOBS_ENV, "two")
    with pytest.raises(ConfigError):
        cli.job_count(None)
    monkeypatch.delenv(cli.JOBS_ENV)
    assert cli.job_count(3) == 3


def test_cli_cool_search_without_region_exits_3(tmp_path):
    code = _run(tmp_path, "cool-search", "--set", "noise.q_min=1e10", "--set", "optimizer.popsize=5",
                "--set", "optimizer.generations=2")
    assert code == 3
    rec = _strict_json(tmp_path / "cool_search.json")
    assert rec["found"] is False


def test_cli_fit_fast_mode(tmp_path):
    data = tmp_path / "data.csv"
    rows = [(P, 11.9 - (max(P - 0.04, 0.0) * 60)) for P in (0.01, 0.02, 0.03, 0.05, 0.07, 0.09)]
    data.write_text("P_in [W],finesse\n" + "".join(f"{P},{F}\n" for P, F in rows))
    code = _run(tmp_path, "fit", "--data", str(data), "--set", "optimizer.fit_mode=fast",
                "--set", "optimizer.maxiter=2")
    assert code == 0
    rep = list(csv.DictReader((tmp_path / "fit_report.csv").open()))
    assert [r["parameter"] for r in rep] == ["g_B", "alpha", "beta"]
    res = _strict_json(tmp_path / "fit_result.json")
    assert res["n_points"] == 6 and res["mode"] == "fast"


def test_cli_spectrum_equilibrium(tmp_path):
    code = _run(tmp_path, "spectrum", "--points", "3", "--power", "10", "--set", "cavity.L_fib=0.97")
    assert code == 0
    rows = list(csv.reader((tmp_path / "spectrum_equilibrium.csv").open()))
    assert len(rows) == 4
    # the middle point sits on resonance, where the dip is
    refl = [float(r[1]) for r in rows[1:]]
    assert refl[1] < refl[0] and refl[1] < refl[2]
