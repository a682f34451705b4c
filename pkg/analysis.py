"""
Post-hoc comparison of finished runs.

For every (domain, instance) the median best value of each algorithm is
ranked (1 = best, ties share the lower rank); an algorithm's Borda score is
the sum of its ranks, lower is better.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from errors import EmptyCell, MissingCell
from models import FitnessTrace, RunResult

logger = logging.getLogger(__name__)

RESULT_GLOB = "*__s*.json"
BORDA_CSV = "borda.csv"
SUMMARY_JSON = "summary.json"
BEST_VALUES_CSV = "best_values.csv"


def median_of_best(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise EmptyCell("no runs in this cell")
    return float(np.median(np.asarray(values, dtype=float)))


def load_results(directory: Union[str, Path]) -> List[RunResult]:
    results = []
    for path in sorted(Path(directory).glob(RESULT_GLOB)):
        results.append(RunResult.from_dict(json.loads(path.read_text(encoding="utf-8"))))
    logger.info("loaded %d run results from %s", len(results), directory)
    return results


def results_frame(results: Iterable[RunResult]) -> pd.DataFrame:
    rows = [
        {
            "algorithm": r.algorithm,
            "domain": r.domain,
            "instance": r.instance,
            "seed": r.seed,
            "best_value": r.best_value,
        }
        for r in results
    ]
    return pd.DataFrame(rows, columns=["algorithm", "domain", "instance", "seed", "best_value"])


def median_table(frame: pd.DataFrame) -> pd.DataFrame:
    """(domain, instance) x algorithm table of median best values."""
    if frame.empty:
        raise EmptyCell("no run results to tabulate")
    return frame.pivot_table(
        index=["domain", "instance"], columns="algorithm", values="best_value", aggfunc="median"
    )


def rank_table(medians: pd.DataFrame) -> pd.DataFrame:
    missing = medians.isna()
    if missing.any().any():
        cells = [
            f"{domain}/{instance}:{algorithm}"
            for (domain, instance), row in missing.iterrows()
            for algorithm, gap in row.items()
            if gap
        ]
        raise MissingCell(f"no results for {', '.join(cells)}")
    return medians.rank(axis=1, method="min").astype(int)


@dataclass
class BordaReport:
    totals: pd.Series  # algorithm -> total rank
    subtotals: pd.DataFrame  # domain x algorithm

    def rows(self) -> List[Dict]:
        return [
            {"algorithm": algorithm, "domain": domain, "subtotal": int(self.subtotals.at[domain, algorithm])}
            for algorithm in self.subtotals.columns
            for domain in self.subtotals.index
        ]


def borda(ranks: pd.DataFrame) -> BordaReport:
    if ranks.isna().any().any():
        raise MissingCell("rank table has empty cells")
    subtotals = ranks.groupby(level="domain", sort=False).sum().astype(int)
    return BordaReport(totals=subtotals.sum().astype(int), subtotals=subtotals)


@dataclass
class TraceSummary:
    first_value: float
    best_value: float
    improvements: int
    last_improvement_at: Optional[float]

    def to_dict(self) -> dict:
        return {
            "first_value": self.first_value,
            "best_value": self.best_value,
            "improvements": self.improvements,
            "last_improvement_at": self.last_improvement_at,
        }


def summarize_trace(trace: FitnessTrace) -> TraceSummary:
    if not trace.points:
        raise EmptyCell("trace has no points")
    values = [v for _, v in trace.points]
    improvements = [i for i in range(1, len(values)) if values[i] < values[i - 1]]
    last = trace.points[improvements[-1]][0] if improvements else trace.points[0][0]
    return TraceSummary(values[0], values[-1], len(improvements), last)


@dataclass
class Report:
    frame: pd.DataFrame
    medians: pd.DataFrame
    ranks: pd.DataFrame
    borda: BordaReport
    traces: Dict[str, TraceSummary]


def build_report(results: Sequence[RunResult]) -> Report:
    frame = results_frame(results)
    medians = median_table(frame)
    ranks = rank_table(medians)
    traces = {
        f"{r.domain}/{r.instance}/{r.algorithm}/s{r.seed}": summarize_trace(r.trace)
        for r in results
        if r.trace.points
    }
    return Report(frame, medians, ranks, borda(ranks), traces)


def write_report(report: Report, directory: Union[str, Path]) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    borda_path = directory / BORDA_CSV
    pd.DataFrame(report.borda.rows(), columns=["algorithm", "domain", "subtotal"]).to_csv(
        borda_path, index=False
    )
    values_path = directory / BEST_VALUES_CSV
    report.frame.sort_values(["algorithm", "domain", "instance", "seed"]).to_csv(values_path, index=False)

    summary = {
        "totals": {a: int(v) for a, v in report.borda.totals.items()},
        "subtotals": {
            d: {a: int(v) for a, v in row.items()} for d, row in report.borda.subtotals.iterrows()
        },
        "ranks": [
            {"domain": d, "instance": i, **{a: int(v) for a, v in row.items()}}
            for (d, i), row in report.ranks.iterrows()
        ],
        "medians": [
            {"domain": d, "instance": i, **{a: float(v) for a, v in row.items()}}
            for (d, i), row in report.medians.iterrows()
        ],
        "traces": {key: s.to_dict() for key, s in report.traces.items()},
    }
    summary_path = directory / SUMMARY_JSON
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return [borda_path, values_path, summary_path]
