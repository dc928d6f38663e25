"""Exhaustive and boundary-case checks of the two aggregation strategies.

Every array in ``{1..5}^len`` is aggregated and checked for bound
preservation, order independence and the constant-array fixed point.
Boundary series ``[base] + n * [other]`` are checked for bounds and
monotonicity in ``n`` and written out as columnar text for plotting.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

from .aggregation import AGGREGATORS, simulate_boundaries

SCORES = (1, 2, 3, 4, 5)
DEFAULT_CAP = 2_000_000
EPS = 1e-12


@dataclass(frozen=True)
class SweepSpec:
    strategies: Tuple[str, ...] = ("best", "worst")
    lengths: Tuple[int, ...] = tuple(range(2, 11))
    max_n: int = 1000
    cap: int = DEFAULT_CAP  # total array evaluations across strategies
    delta: float = 1.0
    bases: Tuple[int, ...] = (5, 4, 3, 2, 1)
    others: Optional[Tuple[int, ...]] = None  # None: every admissible value

    def __post_init__(self):
        for s in self.strategies:
            if s not in AGGREGATORS:
                raise ValueError(f"unknown strategy {s!r}")
        if any(n < 1 for n in self.lengths):
            raise ValueError("array lengths must be >= 1")
        if self.max_n < 1:
            raise ValueError("max_n must be >= 1")
        if self.cap < 0:
            raise ValueError("cap must be >= 0")
        if any(b not in SCORES for b in self.bases) or any(o not in SCORES for o in self.others or ()):
            raise ValueError("base and other values must lie in 1..5")


@dataclass
class Violation:
    check: str
    strategy: str
    array: Tuple[float, ...]
    result: float
    detail: str = ""

    def __str__(self):
        arr = ",".join(f"{v:g}" for v in self.array)
        return f"{self.check} [{self.strategy}] array=[{arr}] result={self.result!r} {self.detail}".rstrip()


@dataclass
class SweepReport:
    evaluated: Dict[str, int] = field(default_factory=dict)
    lengths_done: List[int] = field(default_factory=list)
    lengths_skipped: List[int] = field(default_factory=list)
    violations: List[Violation] = field(default_factory=list)
    # (strategy, base, other) -> [(n, score)]
    series: Dict[Tuple[str, int, int], List[Tuple[int, float]]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def _bounds_ok(strategy: str, arr: Sequence[float], result: float, delta: float) -> bool:
    if strategy == "best":
        hi = max(arr)
        return hi - delta - EPS <= result <= hi + EPS
    lo = min(arr)
    return lo - EPS <= result <= lo + delta + EPS


def sweep_length(strategy: str, length: int, delta: float = 1.0) -> Tuple[int, List[Violation]]:
    """Aggregate every array of one length; returns (count, violations)."""
    fn = AGGREGATORS[strategy]
    seen: Dict[Tuple[int, ...], float] = {}
    violations: List[Violation] = []
    count = 0
    for arr in itertools.product(SCORES, repeat=length):
        result = fn(arr, delta)
        count += 1
        if not _bounds_ok(strategy, arr, result, delta):
            violations.append(Violation("bounds", strategy, arr, result))
        key = tuple(sorted(arr))
        first = seen.setdefault(key, result)
        if abs(first - result) > EPS:
            violations.append(Violation("permutation", strategy, arr, result, f"sorted order gives {first!r}"))
        if key[0] == key[-1] and result != key[0]:
            violations.append(Violation("fixed-point", strategy, arr, result))
    return count, violations


def admissible_others(strategy: str, base: int) -> List[int]:
    if strategy == "best":
        return [o for o in SCORES if o <= base]
    return [o for o in SCORES if o >= base]


def check_series(strategy: str, base: int, other: int, series, delta: float = 1.0) -> List[Violation]:
    out = []
    prev = None
    for n, value in series:
        arr = (float(base), float(other))
        if other == base:
            if value != base:
                out.append(Violation("flat-series", strategy, arr, value, f"n={n}"))
        elif strategy == "best" and not (base - delta < value <= base):
            out.append(Violation("series-bounds", strategy, arr, value, f"n={n}"))
        elif strategy == "worst" and not (base <= value < base + delta):
            out.append(Violation("series-bounds", strategy, arr, value, f"n={n}"))
        if prev is not None:
            if strategy == "best" and value > prev + EPS:
                out.append(Violation("series-monotone", strategy, arr, value, f"n={n} rose from {prev!r}"))
            if strategy == "worst" and value < prev - EPS:
                out.append(Violation("series-monotone", strategy, arr, value, f"n={n} fell from {prev!r}"))
        prev = value
    return out


def run_sweep(spec: SweepSpec) -> SweepReport:
    report = SweepReport(evaluated={s: 0 for s in spec.strategies})
    budget = spec.cap
    for length in sorted(set(spec.lengths)):
        cost = len(SCORES) ** length * len(spec.strategies)
        if cost > budget:
            report.lengths_skipped.append(length)
            continue
        budget -= cost
        for strategy in spec.strategies:
            count, violations = sweep_length(strategy, length, spec.delta)
            report.evaluated[strategy] += count
            report.violations.extend(violations)
        report.lengths_done.append(length)

    for strategy in spec.strategies:
        for base in spec.bases:
            for other in admissible_others(strategy, base):
                if spec.others is not None and other not in spec.others:
                    continue
                series = simulate_boundaries(strategy, base, other, spec.max_n, spec.delta)
                report.series[(strategy, base, other)] = series
                report.violations.extend(check_series(strategy, base, other, series, spec.delta))
    return report


def write_series(report: SweepReport, out: TextIO) -> None:
    """One block per (strategy, base) panel, bases in the order swept."""
    out.write("# strategy base other n score\n")
    panels: Dict[Tuple[str, int], List[int]] = {}
    for strategy, base, other in report.series:
        panels.setdefault((strategy, base), []).append(other)
    for (strategy, base), others in panels.items():
        out.write(f"# panel strategy={strategy} base={base}\n")
        for other in others:
            for n, value in report.series[(strategy, base, other)]:
                out.write(f"{strategy} {base} {other} {n} {value!r}\n")


def write_summary(report: SweepReport, out: TextIO) -> None:
    for strategy, count in report.evaluated.items():
        out.write(f"exhaustive {strategy}: {count} arrays\n")
    if report.lengths_done:
        out.write(f"lengths swept: {', '.join(map(str, report.lengths_done))}\n")
    if report.lengths_skipped:
        out.write(f"lengths skipped (evaluation cap): {', '.join(map(str, report.lengths_skipped))}\n")
    out.write(f"boundary series: {len(report.series)}\n")
    out.write(f"violations: {len(report.violations)}\n")
    for v in report.violations[:50]:
        out.write(f"  {v}\n")
