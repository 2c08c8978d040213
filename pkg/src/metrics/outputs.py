"""Result files: rounds.csv, summary.json and aggregate.json.

Metric values are rendered with 9 significant digits; the config echo is
written verbatim so it can be fed back to replay a run.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from src.models.records import FinalEvaluation, RoundRecord
from src.utils.errors import OutputError
from src.utils.logger import log_debug


ROUNDS_FILE = "rounds.csv"
SUMMARY_FILE = "summary.json"
AGGREGATE_FILE = "aggregate.json"
REPEAT_PREFIX = "repeat_"

ROUND_COLUMNS = [
    "round",
    "client_id",
    "pre_update_acc",
    "post_update_acc",
    "post_train_acc",
    "train_loss",
    "lambda_t",
]
_INT_COLUMNS = {"round", "client_id"}


@dataclass
class OutputPaths:
    rounds_csv: Path
    summary_json: Path
    summary: Dict[str, Any]


def render(value: Optional[float]) -> str:
    """9-significant-digit text for a metric, empty for a missing value."""
    return "" if value is None else f"{value:.9g}"


def rounded(value: Optional[float]) -> Optional[float]:
    """The float a 9-significant-digit rendering parses back to."""
    return None if value is None else float(f"{value:.9g}")


def _rounded_list(values: Sequence[Optional[float]]) -> List[Optional[float]]:
    return [rounded(v) for v in values]


def _dump_json(payload: Dict[str, Any], path: Path) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
    try:
        path.write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(path, exc) from exc


def build_summary(records: Sequence[RoundRecord], config_echo: Optional[Dict[str, Any]] = None,
                  final: Optional[FinalEvaluation] = None,
                  client_sizes: Optional[Sequence[int]] = None) -> Dict[str, Any]:
    """Summary payload; every absent piece is null or an empty list."""
    return {
        "config": config_echo,
        "rounds_completed": len(records),
        "evaluation": final.evaluation if final else None,
        "final_mean_acc": rounded(final.mean_acc) if final else None,
        "final_std_acc": rounded(final.std_acc) if final else None,
        "final_personalized_mean_acc": rounded(final.personalized_mean_acc) if final else None,
        "final_personalized_std_acc": rounded(final.personalized_std_acc) if final else None,
        "final_global_mean_acc": rounded(final.global_mean_acc) if final else None,
        "final_global_std_acc": rounded(final.global_std_acc) if final else None,
        "final_client_accs": _rounded_list(final.client_accs) if final else [],
        "final_personalized_accs": _rounded_list(final.personalized_accs) if final else [],
        "final_global_accs": _rounded_list(final.global_accs) if final else [],
        "mean_forgetting_curve": [rounded(r.aggregates.mean_forgetting) for r in records],
        "mean_accuracy_curve": [rounded(r.aggregates.mean_acc) for r in records],
        "global_accuracy_curve": [rounded(r.aggregates.global_mean_acc) for r in records],
        "client_sizes": list(client_sizes) if client_sizes is not None else [],
    }


def write_outputs(records: Sequence[RoundRecord], path_prefix: Union[str, Path], *,
                  config_echo: Optional[Dict[str, Any]] = None,
                  final: Optional[FinalEvaluation] = None,
                  client_sizes: Optional[Sequence[int]] = None) -> OutputPaths:
    """Write ``rounds.csv`` and ``summary.json`` under ``path_prefix``.

    Args:
        records: Round records in round order
        path_prefix: Output directory (created if missing)
        config_echo: Config mapping that replays the run
        final: Final per-client evaluation
        client_sizes: Training-set size per client

    Returns:
        Paths of the written files and the summary payload

    Raises:
        OutputError: When a file cannot be written
    """
    out_dir = Path(path_prefix)
    rounds_path = out_dir / ROUNDS_FILE
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(rounds_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(ROUND_COLUMNS)
            for record in records:
                for c in record.clients:
                    writer.writerow([
                        record.round,
                        c.client_id,
                        render(c.pre_update_acc),
                        render(c.post_update_acc),
                        render(c.post_train_acc),
                        render(c.train_loss),
                        render(c.lambda_t),
                    ])
    except OSError as exc:
        raise OutputError(rounds_path, exc) from exc

    summary_path = out_dir / SUMMARY_FILE
    summary = build_summary(records, config_echo, final, client_sizes)
    _dump_json(summary, summary_path)
    log_debug(f"Wrote {rounds_path} and {summary_path}")
    return OutputPaths(rounds_csv=rounds_path, summary_json=summary_path, summary=summary)


def read_rounds_csv(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Parse a rounds.csv back into typed rows (missing values become None)."""
    rows: List[Dict[str, Any]] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for raw in csv.DictReader(f):
            row: Dict[str, Any] = {}
            for column in ROUND_COLUMNS:
                text = raw[column]
                if column in _INT_COLUMNS:
                    row[column] = int(text)
                else:
                    row[column] = float(text) if text != "" else None
            rows.append(row)
    return rows


def write_aggregate(summaries: Sequence[Dict[str, Any]], path: Union[str, Path],
                    seeds: Optional[Sequence[int]] = None) -> Path:
    """Mean and population std across repeats of the final metrics of both views."""
    def stats(key: str) -> Dict[str, Optional[float]]:
        values = [s[key] for s in summaries if s.get(key) is not None]
        if not values:
            return {"mean": None, "std": None}
        return {"mean": rounded(float(np.mean(values))), "std": rounded(float(np.std(values)))}

    payload = {
        "repeats": len(summaries),
        "seeds": list(seeds) if seeds is not None else [],
        "evaluation": summaries[0].get("evaluation") if summaries else None,
        "final_mean_acc": stats("final_mean_acc"),
        "final_std_acc": stats("final_std_acc"),
        "final_personalized_mean_acc": stats("final_personalized_mean_acc"),
        "final_personalized_std_acc": stats("final_personalized_std_acc"),
        "final_global_mean_acc": stats("final_global_mean_acc"),
        "final_global_std_acc": stats("final_global_std_acc"),
        "per_repeat_final_mean_acc": [s.get("final_mean_acc") for s in summaries],
    }
    path = Path(path)
    _dump_json(payload, path)
    return path
