"""Acceptance suite: one PASS/FAIL line per primary criterion.

Each check computes its verdict, prints it (uncaptured, so it shows in a
plain ``pytest`` run) and then asserts it.
"""

from __future__ import annotations

import itertools
import json
import time

import pytest

import oracle
from authdns_resilience.aggregation import (
    AggregationPlan,
    aggregate_attribute,
    aggregate_best,
    aggregate_worst,
    simulate_boundaries,
    summarize,
)
from authdns_resilience.attributes import ATTRIBUTE_IDS, ATTRIBUTE_LEVEL, COUNT_ATTRIBUTES, AttributeValue
from authdns_resilience.config import RunConfig
from authdns_resilience.reporting import TIMESTAMP_FIELDS, read_matrix, run_pipeline
from authdns_resilience.scoring import AttributeScore, ScoringCriteria, saturation, score

from conftest import FIXTURES


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, started, budget, detail=""):
        elapsed = time.perf_counter() - started
        within = elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        note = f" ({detail})" if detail else ""
        with capsys.disabled():
            print(f"\n{status} {name} [{elapsed:.3f}s < {budget:g}s]{note}")
        assert ok, detail or name
        assert within, f"{name} took {elapsed:.3f}s, budget {budget}s"

    return emit


def test_scoring_table_conformance(verdict):
    t0 = time.perf_counter()
    expected = {
        "PP1": {"state-owned": 5, "local-private": 4, "foreign-large": 3, "foreign-sme": 2, "unregistered": 1},
        "PA1": {"state-owned": 5, "local-private": 4, "foreign-large": 3, "foreign-sme": 2, "unregistered": 1},
        "PP2": {"inside": 5, "outside": 1}, "PA2": {"inside": 5, "outside": 1},
        "CP1": {"anycast": 5, "unicast": 1}, "CA1": {"anycast": 5, "unicast": 1},
        "CP2": {"dedicated": 5, "exposed": 1},
        "DP1": {"automatic": 5, "manual": 3, "none": 1},
        "DA1": {"recommended": 5, "not-recommended": 3, "not-configured": 1},
    }  # fmt: skip
    counts = {1: 1, 2: 4, 3: 4, 4: 4, 5: 5, 6: 5}
    criteria = ScoringCriteria.load()
    subjects = {"instance": ("f", "ns", "192.0.2.1"), "name-server": ("f", "ns"), "functionality": ("f",)}
    mismatches = []
    for attr in ATTRIBUTE_IDS:
        lvl = ATTRIBUTE_LEVEL[attr]
        rows = counts if attr in COUNT_ATTRIBUTES else expected[attr]
        for option, want in rows.items():
            got = score(AttributeValue(attr, lvl, subjects[lvl], option), criteria).score
            if got != want:
                mismatches.append(f"{attr}/{option}: {got} != {want}")
    checked = sum(len(counts if a in COUNT_ATTRIBUTES else expected[a]) for a in ATTRIBUTE_IDS)
    verdict("scoring table conformance", not mismatches, t0, 1.0,
            "; ".join(mismatches) or f"{checked} rows")


def test_saturation_constraints(verdict):
    t0 = time.perf_counter()
    xs = [1 + 9 * i / 2000 for i in range(2001)]
    ys = [saturation(x) for x in xs]
    ok = (
        abs(saturation(1) - 1) <= 1e-12
        and abs(saturation(2) - 4) <= 1e-12
        and all(b > a for a, b in zip(ys, ys[1:]))
        and 4.9 <= saturation(5) < 5
    )
    verdict("saturation constraints", ok, t0, 1.0, f"s(5)={saturation(5)!r}")


def test_algorithm_bounds_exhaustive(verdict):
    t0 = time.perf_counter()
    problems, evaluated = [], 0
    for n in range(1, 7):
        seen = {}
        for arr in itertools.product(range(1, 6), repeat=n):
            b, w = aggregate_best(arr), aggregate_worst(arr)
            evaluated += 2
            if not (max(arr) - 1 <= b <= max(arr)) or not (min(arr) <= w <= min(arr) + 1):
                problems.append(f"bounds {arr}")
            key = tuple(sorted(arr))
            if seen.setdefault(key, (b, w)) != (b, w):
                problems.append(f"permutation {arr}")
            if key[0] == key[-1] and (b, w) != (key[0], key[0]):
                problems.append(f"fixed point {arr}")
    verdict("aggregation bounds, permutation invariance, fixed points", not problems, t0, 10.0,
            "; ".join(problems[:3]) or f"{evaluated} evaluations")


def test_boundary_convergence(verdict):
    t0 = time.perf_counter()
    best = simulate_boundaries("best", 5, 1, 1000)
    worst = simulate_boundaries("worst", 1, 5, 1000)
    b_end, w_end = best[-1][1], worst[-1][1]
    ok = (
        abs(b_end - (5 - 1000 / 1001)) <= 1e-9 and abs(b_end - 4) <= 0.01
        and abs(w_end - (1 + 1000 / 1001)) <= 1e-9 and abs(w_end - 2) <= 0.01
        and all(y[1] <= x[1] for x, y in zip(best, best[1:]))
        and all(y[1] >= x[1] for x, y in zip(worst, worst[1:]))
    )  # fmt: skip
    verdict("boundary convergence", ok, t0, 5.0, f"best(1000)={b_end!r} worst(1000)={w_end!r}")


def test_worked_vectors(verdict):
    t0 = time.perf_counter()
    plan = AggregationPlan.load()
    pa1 = [
        AttributeScore("PA1", "instance", ("authoritative", "a", "192.0.2.1"), 5.0),
        AttributeScore("PA1", "instance", ("authoritative", "a", "192.0.2.2"), 1.0),
        AttributeScore("PA1", "instance", ("authoritative", "b", "192.0.2.3"), 3.0),
    ]
    got = {
        "best[5,1]": (aggregate_best([5, 1]), 4.5, 0.0),
        "best[4,2,2]": (aggregate_best([4, 2, 2]), 3.5556, 1e-3),
        "worst[1,5]": (aggregate_worst([1, 5]), 1.5, 0.0),
        "worst[3,4,4]": (aggregate_worst([3, 4, 4]), 3.4444, 1e-3),
        "two-stage PA1": (aggregate_attribute("PA1", pa1, plan).score, 4.375, 1e-9),
    }
    bad = [f"{k}={v!r}" for k, (v, want, tol) in got.items() if abs(v - want) > tol]
    verdict("worked aggregation vectors", not bad, t0, 1.0, "; ".join(bad))


def test_end_to_end_golden(verdict, tmp_path):
    t0 = time.perf_counter()
    config = RunConfig.load(FIXTURES / "config.yaml", environ={})
    result = run_pipeline(FIXTURES / "domains.txt", config, tmp_path)
    golden = FIXTURES / "golden" / "matrix.csv"
    identical = (tmp_path / "matrix.csv").read_bytes() == golden.read_bytes()
    matrix = read_matrix(golden)
    expected = oracle.recompute(tmp_path / "dataset")
    worst_diff = max(
        abs(matrix.values[i, j] - expected[d][j]) for i, d in enumerate(matrix.domains) for j in range(26)
    )
    ok = result.exit_code == 0 and identical and matrix.values.shape == (3, 26) and worst_diff <= 1e-9
    verdict("end-to-end golden run", ok, t0, 5.0, f"bit-identical={identical}, oracle max diff={worst_diff:g}")


def test_summary_arithmetic(verdict):
    t0 = time.perf_counter()
    v = {a: 4.0 for a in ATTRIBUTE_IDS}
    v.update(PP1=5.0, PP2=5.0, PA1=5.0, PA2=5.0, DP1=3.0, DA1=1.0)
    s = summarize(v)
    ok = (
        (s["f_p"], s["f_c"], s["f_d"]) == (5.0, 4.0, 2.0)
        and abs(s["overall"] - 11 / 3) <= 1e-9
        and abs(s["overall"] - 3.6667) <= 1e-4
        and all(x == 5.0 for x in summarize({a: 5.0 for a in ATTRIBUTE_IDS}).values())
        and all(x == 1.0 for x in summarize({a: 1.0 for a in ATTRIBUTE_IDS}).values())
    )
    verdict("summary arithmetic", ok, t0, 1.0, f"overall={s['overall']!r}")


def test_replay_determinism(verdict, tmp_path):
    t0 = time.perf_counter()
    config = RunConfig.load(FIXTURES / "config.yaml", environ={})
    a, b = tmp_path / "a", tmp_path / "b"
    run_pipeline(FIXTURES / "domains.txt", config, a)
    time.sleep(0.01)  # make the timestamps differ
    run_pipeline(FIXTURES / "domains.txt", config, b)
    diffs = []
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    if files != sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file()):
        diffs.append("file sets differ")
    for rel in files:
        x, y = (a / rel).read_bytes(), (b / rel).read_bytes()
        if rel.name == "manifest.json":
            x, y = json.loads(x), json.loads(y)
            for f in TIMESTAMP_FIELDS:
                x.pop(f), y.pop(f)
        if x != y:
            diffs.append(str(rel))
    verdict("collector replay determinism", not diffs, t0, 5.0, ", ".join(diffs))
