from __future__ import annotations

import json
import subprocess
import sys

import pytest

from authdns_resilience.cli import main
from authdns_resilience.config import RunConfig
from authdns_resilience.configdoc import ConfigError

from conftest import FIXTURES, REPLAY

CONFIG = FIXTURES / "config.yaml"


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    import os

    for var in list(os.environ):
        if var.startswith("AUTHDNS_"):
            monkeypatch.delenv(var)


# -- configuration --------------------------------------------------------------


def test_relative_paths_resolve_against_config_file():
    cfg = RunConfig.load(CONFIG)
    assert cfg.backend.fixtures_dir == REPLAY
    assert cfg.workers == 2 and cfg.overall_mode == "phase"


def test_environment_overrides(tmp_path):
    env = {"AUTHDNS_OVERALL_MODE": "flat", "AUTHDNS_WORKERS": "7", "AUTHDNS_FIXTURES_DIR": str(tmp_path)}
    cfg = RunConfig.load(CONFIG, environ=env)
    assert (cfg.overall_mode, cfg.workers, cfg.backend.fixtures_dir) == ("flat", 7, tmp_path)


@pytest.mark.parametrize("text,message", [
    ("country_context: AU\ncolour: blue\n", "unknown keys: colour"),
    ("country_context: AU\nbackend: {kind: pigeon}\n", "unknown backend kind"),
    ("country_context: AUS\n", "two-letter"),
    ("country_context: AU\noverall_mode: median\n", "overall_mode"),
    ("country_context: AU\nworkers: 0\n", "workers"),
    ("country_context: AU\ncatalog: nope.json\n", "catalog file not found"),
    ("country_context: [AU\n", "invalid YAML"),
])  # fmt: skip
def test_config_errors(tmp_path, text, message):
    p = tmp_path / "c.yaml"
    p.write_text(text)
    with pytest.raises(ConfigError) as err:
        RunConfig.load(p, environ={})
    assert message in str(err.value)


def test_catalog_country_mismatch(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("country_context: GB\n")
    with pytest.raises(ConfigError, match="catalog is for AU"):
        RunConfig.load(p, environ={}).context()


# -- subcommands ----------------------------------------------------------------


def test_pipeline_and_report(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["pipeline", "-c", str(CONFIG), str(FIXTURES / "domains.txt"), "-o", str(out)]) == 0
    assert "3 ok, 0 failed" in capsys.readouterr().err
    assert main(["report", str(out), "--column", "overall", "--json"]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["overall"]["count"] == 3
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "column f_p:" in text and "column overall:" in text


def test_partial_failure_exit_code(tmp_path, capsys):
    rc = main(["pipeline", "-c", str(CONFIG), str(FIXTURES / "domains_with_failure.txt"), "-o", str(tmp_path)])
    assert rc == 1
    assert "failed: gone.gov.au [validate]" in capsys.readouterr().err


def test_fatal_exit_codes(tmp_path, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("# none\n")
    assert main(["pipeline", "-c", str(CONFIG), str(empty), "-o", str(tmp_path / "o")]) == 2
    assert "no domains" in capsys.readouterr().err
    dead = tmp_path / "dead.txt"
    dead.write_text("gone.gov.au\n")
    assert main(["pipeline", "-c", str(CONFIG), str(dead), "-o", str(tmp_path / "o2")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("country_context: AU\nbogus: 1\n")
    assert main(["pipeline", "-c", str(bad), str(FIXTURES / "domains.txt"), "-o", str(tmp_path / "o3")]) == 2
    assert "unknown keys" in capsys.readouterr().err
    assert main(["report", str(tmp_path / "nowhere")]) == 2


def test_staged_commands_match_pipeline(tmp_path, capsys):
    run = tmp_path / "run"
    assert main(["collect", "-c", str(CONFIG), str(FIXTURES / "domains.txt"), "-o", str(run)]) == 0
    assert not (run / "matrix.csv").exists()
    derived, scored, aggregated = tmp_path / "d.json", tmp_path / "s.json", tmp_path / "a.json"
    assert main(["derive", "-c", str(CONFIG), str(run), "-o", str(derived)]) == 0
    assert main(["score", str(derived), "-o", str(scored)]) == 0
    assert main(["aggregate", str(scored), "-o", str(aggregated), "--trace"]) == 0
    staged = {a["domain_name"]: a for a in json.loads(aggregated.read_text())}
    assert "trace" in staged["cloud.gov.au"]

    full = tmp_path / "full"
    assert main(["pipeline", "-c", str(CONFIG), str(FIXTURES / "domains.txt"), "-o", str(full)]) == 0
    for a in json.loads((full / "assessments.json").read_text())["assessments"]:
        s = dict(staged[a["domain_name"]])
        s.pop("trace")
        assert s == a


def test_aggregate_flat_mode(tmp_path):
    run = tmp_path / "run"
    main(["collect", "-c", str(CONFIG), str(FIXTURES / "domains.txt"), "-o", str(run)])
    main(["derive", "-c", str(CONFIG), str(run / "dataset" / "soe.gov.au.json"), "-o", str(tmp_path / "d.json")])
    main(["score", str(tmp_path / "d.json"), "-o", str(tmp_path / "s.json")])
    main(["aggregate", str(tmp_path / "s.json"), "--overall-mode", "flat", "-o", str(tmp_path / "a.json")])
    (doc,) = json.loads((tmp_path / "a.json").read_text())
    assert doc["summaries"]["overall"] == doc["summaries"]["overall_flat"]


def test_breakdown_command(tmp_path, capsys):
    run = tmp_path / "run"
    main(["collect", "-c", str(CONFIG), str(FIXTURES / "domains.txt"), "-o", str(run)])
    capsys.readouterr()
    assert main(["breakdown", "-c", str(CONFIG), str(run), "--facet", "authoritative-enterprise-type"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# facet=authoritative-enterprise-type")
    assert "# multi-category: legacy.gov.au" in out
    with pytest.raises(SystemExit):
        main(["breakdown", str(run), "--facet", "nope"])


def test_simulate_command(tmp_path, capsys):
    series = tmp_path / "series.txt"
    rc = main(["simulate", "--sweep-length", "3", "--max-n", "20", "--base", "5", "--other", "1",
               "--strategy", "best", "--output", str(series)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "exhaustive best: 155 arrays" in out and "violations: 0" in out
    lines = series.read_text().splitlines()
    assert lines[1] == "# panel strategy=best base=5" and len(lines) == 22


def test_simulate_reports_violations(monkeypatch, capsys):
    from authdns_resilience import simulation

    monkeypatch.setitem(simulation.AGGREGATORS, "worst", lambda arr, delta=1.0: 9.0)
    assert main(["simulate", "--strategy", "worst", "--sweep-length", "1", "--max-n", "2", "--base", "1"]) == 1
    assert "bounds [worst]" in capsys.readouterr().out


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "authdns_resilience.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("collect", "derive", "score", "aggregate", "report", "breakdown", "simulate", "pipeline"):
        assert cmd in proc.stdout
