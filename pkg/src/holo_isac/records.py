"""Result persistence: newline-delimited records, CSV, plot tables, reports.

The structured format puts one record per line as space-separated key=value
pairs in a fixed order, with schema_version first. Floats are serialized
with repr(), so a file read back reproduces the in-memory values bit for
bit. Lines are self-contained, which lets parallel workers write shard
files that merge by simple concatenation plus the canonical sort.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .experiments import TrialResult
from .stats import (
    StatTestResult,
    bonferroni,
    cohens_d,
    mean_ci,
    one_way_anova,
    paired_t_test,
)

SCHEMA_VERSION = 1

RECORD_FIELDS = (
    "schema_version", "sweep_index", "sweep_value", "algorithm",
    "trial_index", "channel_hash", "failed", "converged", "monotone",
    "iterations_used", "objective", "sum_rate", "sinr_db",
    "detection_prob", "crlb", "energy_efficiency", "fairness",
)

_INT_FIELDS = {"schema_version", "sweep_index", "trial_index",
               "iterations_used"}
_BOOL_FIELDS = {"failed", "converged", "monotone"}
_FLOAT_FIELDS = {"objective", "sum_rate", "detection_prob", "crlb",
                 "energy_efficiency", "fairness"}

PLOT_METRICS = ("objective", "sum_rate", "detection_prob", "crlb",
                "energy_efficiency", "fairness")


# =====================================================================
# Record serialization
# =====================================================================

def _encode(field: str, value) -> str:
    if field == "sweep_value":
        return "none" if value is None else repr(float(value))
    if field == "sinr_db":
        return ";".join(repr(float(v)) for v in value)
    if field in _BOOL_FIELDS:
        return "true" if value else "false"
    if field in _FLOAT_FIELDS:
        return repr(float(value))
    return str(value)


def _decode(field: str, text: str):
    if field == "sweep_value":
        return None if text == "none" else float(text)
    if field == "sinr_db":
        if not text:
            return ()
        return tuple(float(tok) for tok in text.split(";"))
    if field in _BOOL_FIELDS:
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} for field {field}")
        return text == "true"
    if field in _INT_FIELDS:
        return int(text)
    if field in _FLOAT_FIELDS:
        return float(text)
    return text


def format_record(row: TrialResult) -> str:
    """One record line; schema_version leads, field order is fixed."""
    parts = []
    for field in RECORD_FIELDS:
        value = (SCHEMA_VERSION if field == "schema_version"
                 else getattr(row, field))
        parts.append(f"{field}={_encode(field, value)}")
    return " ".join(parts)


def parse_record(line: str) -> TrialResult:
    tokens = line.split(" ")
    if len(tokens) != len(RECORD_FIELDS):
        raise ValueError(
            f"record has {len(tokens)} fields, expected {len(RECORD_FIELDS)}")
    kwargs = {}
    for field, token in zip(RECORD_FIELDS, tokens):
        key, sep, text = token.partition("=")
        if not sep or key != field:
            raise ValueError(f"expected field {field!r}, got token {token!r}")
        value = _decode(field, text)
        if field == "schema_version":
            if value != SCHEMA_VERSION:
                raise ValueError(f"unsupported schema version {value}")
            continue
        kwargs[field] = value
    return TrialResult(**kwargs)


def write_records(rows, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for row in rows:
            fh.write(format_record(row) + "\n")


def read_records(path):
    """Parse a record file back into TrialResult rows (bit-exact floats)."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                rows.append(parse_record(line))
            except ValueError as exc:
                raise ValueError(f"{path}, line {lineno}: {exc}") from None
    return rows


def merge_records(paths):
    """Concatenate shard files and restore the canonical row order."""
    rows = []
    for path in paths:
        rows.extend(read_records(path))
    rows.sort(key=TrialResult.sort_key)
    return rows


# =====================================================================
# CSV export
# =====================================================================

def write_csv(rows, path) -> None:
    """Human-readable tabular export, same field order as the record file."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(RECORD_FIELDS) + "\n")
        for row in rows:
            cells = []
            for field in RECORD_FIELDS:
                value = (SCHEMA_VERSION if field == "schema_version"
                         else getattr(row, field))
                cells.append(_encode(field, value))
            fh.write(",".join(cells) + "\n")


# =====================================================================
# Plot-ready tidy tables
# =====================================================================

def _group_rows(rows):
    """(sweep_index, sweep_value, algorithm) -> list of non-failed rows."""
    grouped = {}
    for row in rows:
        if row.failed:
            continue
        key = (row.sweep_index, row.sweep_value, row.algorithm)
        grouped.setdefault(key, []).append(row)
    return grouped


def write_plot_data(rows, path, metrics=PLOT_METRICS,
                    confidence: float = 0.95) -> None:
    """Tidy table (x, series, y, ci_low, ci_high), one series per
    algorithm.metric pair; x is the sweep value (sweep index when the run
    had no sweep). Failed trials are excluded from the aggregates."""
    grouped = _group_rows(rows)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("x,series,y,ci_low,ci_high\n")
        for (sweep_index, sweep_value, algorithm) in sorted(
                grouped, key=lambda k: (k[0], k[2])):
            batch = grouped[(sweep_index, sweep_value, algorithm)]
            x = float(sweep_index) if sweep_value is None else sweep_value
            for metric in metrics:
                samples = [getattr(row, metric) for row in batch]
                if len(samples) >= 2 and np.all(np.isfinite(samples)):
                    y, lo, hi = mean_ci(samples, confidence)
                else:
                    y = float(np.mean(samples))
                    lo = hi = y
                fh.write(f"{x!r},{algorithm}.{metric},{y!r},{lo!r},{hi!r}\n")


# =====================================================================
# Stats reports
# =====================================================================

STATS_METRICS = ("objective", "sum_rate")


def _metric_matrix(rows, algorithm, metric):
    """Trial-indexed samples for one algorithm (failed rows excluded)."""
    pairs = sorted((row.trial_index, getattr(row, metric))
                   for row in rows if row.algorithm == algorithm
                   and not row.failed)
    return {idx: val for idx, val in pairs}


def _paired_samples(by_trial_a, by_trial_b):
    common = sorted(set(by_trial_a) & set(by_trial_b))
    a = np.array([by_trial_a[i] for i in common])
    b = np.array([by_trial_b[i] for i in common])
    return a, b


def _fmt_test(result: StatTestResult) -> str:
    bits = [f"kind={result.kind}", f"statistic={float(result.statistic)!r}",
            f"df={float(result.df)!r}"]
    if result.df2 is not None:
        bits.append(f"df2={float(result.df2)!r}")
    bits += [f"p={result.p_display()}",
             f"effect_size={float(result.effect_size)!r}",
             f"ci_low={float(result.ci_low)!r}",
             f"ci_high={float(result.ci_high)!r}",
             f"confidence={float(result.confidence)!r}"]
    return " ".join(bits)


def write_stats_report(rows, path, baseline_rows=None,
                       metrics=STATS_METRICS) -> None:
    """Comparison battery over a result set, one finding per line.

    Single-set mode groups rows by sweep point and reports, per metric:
    per-algorithm means with 95% and 99% intervals, a one-way ANOVA across
    algorithms, and all pairwise paired t-tests (shared channels per trial
    justify pairing) with Cohen's d and Bonferroni-adjusted p-values.

    With baseline_rows, each algorithm is instead compared against its own
    baseline samples trial by trial; identical inputs give p = 1 exactly.
    """
    lines = [f"schema_version={SCHEMA_VERSION} report=stats "
             f"correction=bonferroni_pairwise"]
    sweep_points = sorted({(row.sweep_index, row.sweep_value)
                           for row in rows})
    for sweep_index, sweep_value in sweep_points:
        at_point = [row for row in rows if row.sweep_index == sweep_index]
        algorithms = sorted({row.algorithm for row in at_point})
        sv = "none" if sweep_value is None else repr(sweep_value)
        prefix = f"sweep_index={sweep_index} sweep_value={sv}"

        if baseline_rows is not None:
            base_at_point = [row for row in baseline_rows
                             if row.sweep_index == sweep_index]
            for metric in metrics:
                for algorithm in algorithms:
                    a, b = _paired_samples(
                        _metric_matrix(at_point, algorithm, metric),
                        _metric_matrix(base_at_point, algorithm, metric))
                    if a.size < 2:
                        continue
                    test = paired_t_test(a, b)
                    lines.append(f"{prefix} comparison=vs_baseline "
                                 f"metric={metric} algorithm={algorithm} "
                                 f"n={a.size} {_fmt_test(test)}")
            continue

        for metric in metrics:
            samples = {alg: _metric_matrix(at_point, alg, metric)
                       for alg in algorithms}
            for alg in algorithms:
                vals = list(samples[alg].values())
                if len(vals) < 2:
                    continue
                m95 = mean_ci(vals, 0.95)
                m99 = mean_ci(vals, 0.99)
                lines.append(
                    f"{prefix} summary=mean metric={metric} algorithm={alg} "
                    f"n={len(vals)} mean={m95[0]!r} "
                    f"ci95_low={m95[1]!r} ci95_high={m95[2]!r} "
                    f"ci99_low={m99[1]!r} ci99_high={m99[2]!r}")

            groups = [list(samples[alg].values()) for alg in algorithms
                      if len(samples[alg]) >= 2]
            if len(groups) >= 2:
                test = one_way_anova(groups)
                lines.append(f"{prefix} comparison=across_algorithms "
                             f"metric={metric} {_fmt_test(test)}")

            pair_tests = []
            for alg_a, alg_b in combinations(algorithms, 2):
                a, b = _paired_samples(samples[alg_a], samples[alg_b])
                if a.size < 2:
                    continue
                pair_tests.append((alg_a, alg_b, a.size, paired_t_test(a, b),
                                   cohens_d(a, b)))
            if pair_tests:
                adjusted = bonferroni([t.p_value for _, _, _, t, _
                                       in pair_tests], len(pair_tests))
                for (alg_a, alg_b, n, test, d), p_adj in zip(pair_tests,
                                                             adjusted):
                    p_adj_text = ("<1e-300" if test.p_value == 0.0
                                  else repr(float(p_adj)))
                    lines.append(f"{prefix} comparison=pairwise "
                                 f"metric={metric} a={alg_a} b={alg_b} n={n} "
                                 f"{_fmt_test(test)} cohens_d={d!r} "
                                 f"p_adjusted={p_adj_text}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
