"""Multi-seed aggregation and the results table emitter.

The table mirrors the reference layout: rows grouped into (dataset, N_c)
blocks, four initialization methods per block in a fixed order, accuracy
rendered as "mean +/- std" in percent with two decimals. Emission is a pure
function of its rows, so output is byte-stable across runs.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractError
from .results import RunResult

METHOD_LABELS = {
    "random": "Random",
    "classification": "Classification",
    "full_seg": "Full Segmentation",
    "scribble_seg": "Scribble Segmentation",
}
METHOD_ORDER = ["Random", "Classification", "Full Segmentation", "Scribble Segmentation"]

FORMATS = ("csv", "markdown", "json")

ABSENT = "—"


@dataclass
class AggregateRow:
    method: str
    dataset: str
    n_c: int
    r_percent: float | None
    mean_accuracy: float
    std_accuracy: float
    n_runs: int


def aggregate_mean_std(results: list[RunResult]) -> AggregateRow:
    """Arithmetic mean and sample (n-1) standard deviation of the final test
    accuracies; all results must share one (setting, dataset, n_c) tag."""
    if not results:
        raise ContractError("cannot aggregate an empty result list")
    tags = {(r.setting, r.dataset, r.n_c) for r in results}
    if len(tags) != 1:
        raise ContractError(f"mixed configuration tags in aggregation: {sorted(tags)}")
    accs = np.asarray([r.final_test_accuracy for r in results], dtype=np.float64)
    std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    first = results[0]
    return AggregateRow(
        method=METHOD_LABELS.get(first.setting, first.setting),
        dataset=first.dataset,
        n_c=first.n_c,
        r_percent=first.r_percent,
        mean_accuracy=float(np.mean(accs)),
        std_accuracy=std,
        n_runs=len(accs),
    )


def _method_rank(method: str) -> int:
    return METHOD_ORDER.index(method) if method in METHOD_ORDER else len(METHOD_ORDER)


def _sorted_rows(rows: list[AggregateRow]) -> list[AggregateRow]:
    return sorted(rows, key=lambda r: (r.dataset, r.n_c, _method_rank(r.method)))


def _fmt_r(r_percent: float | None) -> str:
    if r_percent is None:
        return ABSENT
    s = f"{r_percent:.2f}".rstrip("0").rstrip(".")
    return s if s else "0"


def _markdown(rows: list[AggregateRow]) -> str:
    lines = []
    blocks: dict[tuple[str, int], dict[str, AggregateRow]] = {}
    for row in _sorted_rows(rows):
        blocks.setdefault((row.dataset, row.n_c), {})[row.method] = row
    for (dataset, n_c), by_method in blocks.items():
        lines.append(f"### {dataset} — N_c = {n_c}")
        lines.append("")
        lines.append("| Initialization/Method | N_c | R% | Accuracy (%) |")
        lines.append("|---|---:|---:|---|")
        for method in METHOD_ORDER:
            row = by_method.get(method)
            if row is None:
                lines.append(f"| {method} | {n_c} | {ABSENT} | {ABSENT} |")
            else:
                acc = f"{100 * row.mean_accuracy:.2f} ± {100 * row.std_accuracy:.2f}"
                lines.append(f"| {method} | {row.n_c} | {_fmt_r(row.r_percent)} | {acc} |")
        lines.append("")
    return "\n".join(lines)


def _row_dict(row: AggregateRow) -> dict:
    d = asdict(row)
    return {
        "dataset": d["dataset"],
        "method": d["method"],
        "n_c": d["n_c"],
        "r_percent": d["r_percent"],
        "mean_acc": d["mean_accuracy"],
        "std_acc": d["std_accuracy"],
        "n_runs": d["n_runs"],
    }


def _csv(rows: list[AggregateRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "method", "n_c", "r_percent", "mean_acc", "std_acc", "n_runs"])
    for row in _sorted_rows(rows):
        d = _row_dict(row)
        writer.writerow(
            [
                d["dataset"],
                d["method"],
                d["n_c"],
                "" if d["r_percent"] is None else d["r_percent"],
                d["mean_acc"],
                d["std_acc"],
                d["n_runs"],
            ]
        )
    return buf.getvalue()


def _json(rows: list[AggregateRow]) -> str:
    return json.dumps([_row_dict(r) for r in _sorted_rows(rows)], indent=1, sort_keys=True) + "\n"


def emit_results_table(rows: list[AggregateRow], format: str = "markdown") -> str:
    if format not in FORMATS:
        raise ContractError(f"format must be one of {FORMATS}, got {format!r}")
    if format == "markdown":
        return _markdown(rows)
    if format == "csv":
        return _csv(rows)
    return _json(rows)
