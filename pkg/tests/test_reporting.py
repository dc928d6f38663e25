from __future__ import annotations

import json
import math
import statistics

import pytest

import oracle
from authdns_resilience.aggregation import MATRIX_COLUMNS
from authdns_resilience.config import RunConfig
from authdns_resilience.reporting import (
    TIMESTAMP_FIELDS,
    ReportError,
    RunManifest,
    breakdown,
    distribution,
    dominant_category,
    format_distribution,
    load_dataset,
    read_domains,
    read_matrix,
    run_pipeline,
)

from conftest import FIXTURES, inst, make_record

DOMAINS = FIXTURES / "domains.txt"
GOLDEN = FIXTURES / "golden" / "matrix.csv"


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    config = RunConfig.load(FIXTURES / "config.yaml", environ={})
    return run_pipeline(DOMAINS, config, out), out


# -- golden run -----------------------------------------------------------------


def test_matrix_is_bit_identical_to_golden(run):
    result, out = run
    assert result.exit_code == 0
    assert (out / "matrix.csv").read_bytes() == GOLDEN.read_bytes()


def test_golden_matches_independent_recomputation(run):
    _, out = run
    matrix = read_matrix(GOLDEN)
    expected = oracle.recompute(out / "dataset")
    assert matrix.columns == MATRIX_COLUMNS and len(matrix.columns) == 26
    assert sorted(matrix.domains) == sorted(expected)
    for i, d in enumerate(matrix.domains):
        for j, col in enumerate(matrix.columns):
            assert abs(matrix.values[i, j] - expected[d][j]) <= 1e-9, (d, col)


def test_fixture_set_coverage(run):
    """The bundled fixtures exercise each scoring branch the golden run is meant to cover."""
    _, out = run
    ctx = RunConfig.load(FIXTURES / "config.yaml", environ={}).context()
    seen = set()
    for rec in load_dataset(out):
        for v in ctx.derive(rec):
            seen.add((v.attribute_id, v.value))
    for needed in [("PP1", "state-owned"), ("PA1", "foreign-large"), ("PP1", "unregistered"),
                   ("CP2", "exposed"), ("CP2", "dedicated"), ("CA1", "anycast"), ("CA1", "unicast"),
                   ("DP1", "none"), ("DP1", "automatic"), ("DP1", "manual"),
                   ("DA1", "recommended"), ("DA1", "not-configured")]:  # fmt: skip
        assert needed in seen, needed


def test_every_output_references_manifest(run):
    result, out = run
    digest = result.manifest.digest
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["manifest_hash"] == digest
    assert (out / "matrix.csv").read_text().splitlines()[0] == f"# manifest={digest}"
    for name in ("assessments.json", "failures.json", "dataset/index.json"):
        assert json.loads((out / name).read_text())["manifest_hash"] == digest
    index = json.loads((out / "dataset" / "index.json").read_text())
    assert index["records"] == ["soe.gov.au.json", "cloud.gov.au.json", "legacy.gov.au.json"]  # input order
    assert set(manifest) >= {"input_sha256", "country_context", "backend_kind", "inputs", *TIMESTAMP_FIELDS}


def test_rerun_is_idempotent(tmp_path):
    config = RunConfig.load(FIXTURES / "config.yaml", environ={})
    a, b = tmp_path / "a", tmp_path / "b"
    run_pipeline(DOMAINS, config, a)
    run_pipeline(DOMAINS, config, b)
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for rel in files:
        x, y = (a / rel).read_bytes(), (b / rel).read_bytes()
        if rel.name == "manifest.json":
            x, y = (json.loads(v) for v in (x, y))
            for f in TIMESTAMP_FIELDS:
                x.pop(f), y.pop(f)
        assert x == y, rel


def test_manifest_hash_ignores_paths_and_times(tmp_path):
    config = RunConfig.load(FIXTURES / "config.yaml", environ={})
    copy = tmp_path / "list.txt"
    copy.write_bytes(DOMAINS.read_bytes())
    a, b = RunManifest.for_run(DOMAINS, config), RunManifest.for_run(copy, config)
    b.started_at = "2000-01-01T00:00:00.000000Z"
    assert a.digest == b.digest
    copy.write_text(DOMAINS.read_text() + "extra.gov.au\n")
    assert RunManifest.for_run(copy, config).digest != a.digest


def test_failure_isolation(tmp_path):
    config = RunConfig.load(FIXTURES / "config.yaml", environ={})
    result = run_pipeline(FIXTURES / "domains_with_failure.txt", config, tmp_path)
    assert result.exit_code == 1
    assert len(read_matrix(tmp_path).domains) == 2
    failures = json.loads((tmp_path / "failures.json").read_text())["failures"]
    assert [f["domain"] for f in failures] == ["gone.gov.au"]
    assert failures[0]["stage"] == "validate" and failures[0]["reason"]


def test_unreachable_and_invalid_names(tmp_path):
    config = RunConfig.load(FIXTURES / "config.yaml", environ={})
    lst = tmp_path / "list.txt"
    lst.write_text("dark.gov.au\nnot_a..name\n")
    result = run_pipeline(lst, config, tmp_path / "out")
    assert result.exit_code == 2
    assert {o.domain: o.stage for o in result.failures} == {"dark.gov.au": "validate", "not_a..name": "validate"}


def test_empty_domain_list(tmp_path):
    lst = tmp_path / "empty.txt"
    lst.write_text("# nothing here\n\n   # still nothing\n")
    config = RunConfig.load(FIXTURES / "config.yaml", environ={})
    with pytest.raises(ReportError, match="no domains"):
        run_pipeline(lst, config, tmp_path / "out")


def test_read_domains(tmp_path):
    lst = tmp_path / "list.txt"
    lst.write_text("Soe.Gov.AU.  # trailing comment\n# comment\n\ncloud.gov.au\nsoe.gov.au\n")
    assert read_domains(lst) == ["soe.gov.au", "cloud.gov.au"]
    with pytest.raises(ReportError):
        read_domains(tmp_path / "missing.txt")


def test_collect_only_writes_dataset(tmp_path):
    config = RunConfig.load(FIXTURES / "config.yaml", environ={})
    result = run_pipeline(DOMAINS, config, tmp_path, collect_only=True)
    assert result.exit_code == 0
    assert len(load_dataset(tmp_path)) == 3
    assert not (tmp_path / "matrix.csv").exists()


# -- distribution ---------------------------------------------------------------


def test_constant_column():
    s = distribution([3.0, 3.0, 3.0])
    assert (s["mean"], s["median"]) == (3.0, 3.0)


def test_two_rows():
    s = distribution([1.0, 5.0])
    assert (s["mean"], s["median"]) == (3.0, 3.0)
    assert s["bins"][0][2] == 1 and s["bins"][-1][2] == 1
    assert len(s["bins"]) == 16 and all(hi - lo == 0.25 for lo, hi, _ in s["bins"])


def test_empty_matrix():
    with pytest.raises(ReportError, match="empty"):
        distribution([])


def test_fixture_matrix_stats_match_recomputation(run):
    _, out = run
    matrix = read_matrix(out)
    expected = oracle.recompute(out / "dataset")
    col = MATRIX_COLUMNS.index("overall")
    xs = sorted(row[col] for row in expected.values())
    s = distribution(matrix.column("overall"))
    assert math.isclose(s["mean"], statistics.fmean(xs), abs_tol=1e-12)
    assert math.isclose(s["median"], statistics.median(xs), abs_tol=1e-12)
    q = statistics.quantiles(xs, n=4, method="inclusive")
    assert math.isclose(s["q1"], q[0], abs_tol=1e-12) and math.isclose(s["q3"], q[2], abs_tol=1e-12)
    assert sum(c for *_, c in s["bins"]) == len(xs)
    assert "column overall: n=3" in format_distribution("overall", s)
    with pytest.raises(ReportError):
        matrix.column("nope")


# -- breakdowns -----------------------------------------------------------------

SOE = "Australian Government - Department of Finance"
LOCAL = "Telstra Corporation Ltd"


@pytest.fixture(scope="module")
def context():
    return RunConfig.load(FIXTURES / "config.yaml", environ={}).context()


def rec(name, primary_orgs, auth_orgs, **kw):
    prim = [inst(f"192.0.2.{i + 1}", org=o, **kw) for i, o in enumerate(primary_orgs)]
    auth = [inst(f"198.51.100.{i + 1}", org=o) for i, o in enumerate(auth_orgs)]
    return make_record(prim, {f"ns1.{name}": auth}, name=name, mname=f"ns1.{name}")


def test_primary_enterprise_table(context):
    records = [rec("a.gov.au", [SOE], [SOE]), rec("b.gov.au", [SOE], [LOCAL]), rec("c.gov.au", [LOCAL], [LOCAL])]
    b = breakdown(records, "primary-enterprise-type", context)
    assert dict((k[0], n) for k, n in b.rows) == {"state-owned": 2, "local-private": 1}


def test_authoritative_split_is_flagged(context):
    records = [rec("a.gov.au", [SOE], [SOE, LOCAL]), rec("b.gov.au", [SOE], [LOCAL, LOCAL, SOE])]
    b = breakdown(records, "authoritative-enterprise-type", context)
    # a: one each, tie goes to the lower-resilience category; b: majority local-private
    assert dict((k[0], n) for k, n in b.rows) == {"local-private": 2}
    assert b.flagged["multi-category"] == ["a.gov.au", "b.gov.au"]
    assert b.flagged["tie-broken"] == ["a.gov.au"]
    assert "# multi-category: a.gov.au, b.gov.au" in b.format()


def test_dominant_category_rule():
    assert dominant_category(["state-owned", "unregistered"]) == ("unregistered", True, True)
    assert dominant_category(["foreign-large"] * 2 + ["state-owned"]) == ("foreign-large", False, True)
    assert dominant_category(["local-private"]) == ("local-private", False, False)


@pytest.mark.parametrize("facet", ["primary-enterprise-type", "authoritative-enterprise-type",
                                   "anycast-subnet-enterprise", "axfr-dnssec"])
def test_single_domain_rows_sum_to_one(context, facet):
    b = breakdown([rec("a.gov.au", [SOE, LOCAL], [LOCAL], anycast=True)], facet, context)
    if facet.endswith("enterprise-type"):
        assert sum(n for _, n in b.rows) == 1
    else:
        # flow facets: one edge per stage, each carrying the single domain
        assert len(b.rows) == 2 and all(n == 1 for _, n in b.rows)


def test_flow_edges(context):
    r = rec("a.gov.au", [SOE], [LOCAL], axfr="open")
    b = breakdown([r], "axfr-dnssec", context)
    assert dict(b.rows) == {("state-owned", "axfr=none"): 1, ("axfr=none", "dnssec=not-configured"): 1}
    b = breakdown([r], "anycast-subnet-enterprise", context)
    assert dict(b.rows) == {("state-owned", "subnets=1"): 1, ("subnets=1", "unicast"): 1}


def test_unknown_facet(context):
    with pytest.raises(ReportError):
        breakdown([], "by-colour", context)
