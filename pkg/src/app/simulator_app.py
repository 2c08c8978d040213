"""Experiment orchestration for programmatic access.

This module runs the configured number of repeats and writes per-repeat result
files plus an aggregate. Everything goes to a staging directory next to the
target first and is moved into place only after the whole run succeeded, so a
failed run leaves the target exactly as it was.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from config.config import ExperimentConfig, resolve_output_dir, validate_config
from src.fl.engine import ExperimentResult, run_experiment
from src.metrics.outputs import AGGREGATE_FILE, REPEAT_PREFIX, write_aggregate, write_outputs
from src.utils.errors import SimulatorError
from src.utils.logger import log_error, log_info, log_warning


@dataclass
class RepeatOutcome:
    """One finished repeat."""

    seed: int
    directory: Path
    summary: Dict[str, Any]


@dataclass
class RunReport:
    """Everything a finished run produced."""

    output_dir: Path
    repeats: List[RepeatOutcome] = field(default_factory=list)
    aggregate_path: Optional[Path] = None

    def aggregate(self) -> Dict[str, Any]:
        if self.aggregate_path is None:
            return {}
        return json.loads(self.aggregate_path.read_text(encoding="utf-8"))


class SimulatorApp:
    """Runs an experiment configuration end to end."""

    def __init__(self, config: ExperimentConfig, output_dir: Optional[Path] = None) -> None:
        self._config = config
        self._output_dir = Path(output_dir or resolve_output_dir(config))
        resolved = self._output_dir.resolve()
        self._staging_dir = resolved.parent / f".{resolved.name}.staging"

    @property
    def config(self) -> ExperimentConfig:
        return self._config

    @property
    def output_dir(self) -> Path:
        return self._output_dir

    @property
    def staging_dir(self) -> Path:
        return self._staging_dir

    def repeat_config(self, index: int) -> ExperimentConfig:
        """Config of repeat ``index``: seed ``master_seed + index``, one repeat."""
        return self._config.model_copy(update={
            "master_seed": self._config.master_seed + index,
            "repeats": 1,
        })

    def _run_repeat(self, index: int) -> RepeatOutcome:
        cfg = self.repeat_config(index)
        name = f"{REPEAT_PREFIX}{index}"
        log_info(f"Repeat {index + 1}/{self._config.repeats} (seed {cfg.master_seed})")

        result: ExperimentResult = run_experiment(cfg)
        paths = write_outputs(result.records, self._staging_dir / name, config_echo=cfg.echo(),
                              final=result.final, client_sizes=result.client_sizes)
        log_info(f"Repeat {index + 1} finished")
        return RepeatOutcome(seed=cfg.master_seed, directory=self._output_dir / name, summary=paths.summary)

    def _publish(self) -> None:
        """Swap the staged result set in for the target's previous one."""
        self._output_dir.mkdir(parents=True, exist_ok=True)
        for stale in self._output_dir.glob(f"{REPEAT_PREFIX}*"):
            if stale.is_dir():
                shutil.rmtree(stale)
        for staged in sorted(self._staging_dir.iterdir()):
            target = self._output_dir / staged.name
            if target.is_dir():
                shutil.rmtree(target)
            elif target.exists():
                target.unlink()
            staged.replace(target)
        self._staging_dir.rmdir()

    def run(self) -> RunReport:
        """Execute every repeat and write ``aggregate.json``.

        Raises:
            SimulatorError, ValueError, OSError: After removing the staged outputs;
                the target directory is left untouched
        """
        for warning in validate_config(self._config):
            log_warning(warning)

        self.remove_partial_outputs()
        report = RunReport(output_dir=self._output_dir)
        try:
            self._staging_dir.mkdir(parents=True)
            for index in range(self._config.repeats):
                report.repeats.append(self._run_repeat(index))
            write_aggregate([r.summary for r in report.repeats], self._staging_dir / AGGREGATE_FILE,
                            seeds=[r.seed for r in report.repeats])
            self._publish()
        except Exception:
            self.remove_partial_outputs()
            raise
        report.aggregate_path = self._output_dir / AGGREGATE_FILE
        log_info(f"Run complete: {len(report.repeats)} repeat(s) in {self._output_dir}")
        return report

    def remove_partial_outputs(self) -> None:
        """Delete the staging directory of an unfinished run."""
        if not self._staging_dir.exists():
            return
        try:
            shutil.rmtree(self._staging_dir)
        except OSError as exc:
            log_error(f"Could not remove partial output {self._staging_dir}: {exc}")


def run(cfg: ExperimentConfig, on_complete: Optional[Callable[[RunReport], None]] = None) -> int:
    """Run ``cfg`` and return a process exit status (0 on success).

    ``on_complete`` receives the report of a successful run.
    """
    try:
        report = SimulatorApp(cfg).run()
    except (SimulatorError, ValueError, OSError) as exc:
        log_error(f"Run failed: {exc}")
        return 1
    if on_complete is not None:
        on_complete(report)
    return 0
