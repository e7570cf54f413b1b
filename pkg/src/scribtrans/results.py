"""Per-run results: the unit the seed battery produces and reports consume."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path


@dataclass
class RunResult:
    seed: int
    setting: str
    n_c: int
    final_test_accuracy: float
    trace: list[tuple[int, float, float]] = field(default_factory=list)  # (epoch, train loss, eval acc)
    dataset: str = ""
    r_percent: float | None = None

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["trace"] = [list(t) for t in self.trace]
        return d


def save_run_result(result: RunResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result.to_json_dict(), sort_keys=True, indent=1) + "\n")
    return path


def load_run_result(path: str | Path) -> RunResult:
    d = json.loads(Path(path).read_text())
    d["trace"] = [tuple(t) for t in d.get("trace", [])]
    return RunResult(**d)
