#!/usr/bin/env python3

"""
Experiment runner for ConvexLab
Merges settings and command-line overrides into an ExperimentConfig,
runs one study and maps its outcome to a process exit code.

Part of the ConvexLab project.
"""

import logging
import time
from pathlib import Path
from typing import Any, Dict, Optional

from convexlab.core.errors import ConvexLabError, InvalidArgumentError
from convexlab.core.log_config import add_capture_handler, remove_capture_handler
from convexlab.core.mesh import MeshKind, Rectangle
from convexlab.core.qp_solver import SolverConfig
from convexlab.core.settings import LabSettings
from convexlab.experiments.studies import STUDIES, ExperimentConfig, StudyResult

# Configure logging
logger = logging.getLogger('runner')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_REJECTED = 3

LOG_TAIL_LINES = 20

# Override keys that land in a settings section before the config is built
_SETTINGS_KEYS = {
    "kind": ("mesh", "kind"),
    "n_levels": ("mesh", "n_levels"),
    "seed": ("mesh", "seed"),
    "degree": ("study", "degree"),
    "constraints": ("study", "constraints"),
    "alpha": ("study", "alpha"),
    "eta": ("study", "eta"),
    "target": ("study", "target"),
    "case": ("study", "case"),
    "threads": ("study", "threads"),
    "out_dir": ("output", "out_dir"),
}


class ExperimentRunner:
    """
    Runs one study.
    Owns the settings, the resolved ExperimentConfig and run statistics.
    """

    def __init__(self, experiment: str, config_file: Optional[str] = None,
                 overrides: Optional[Dict[str, Any]] = None):
        """
        Initialize the runner.

        Args:
            experiment: Sub-command name, one of STUDIES
            config_file: Path to a JSON settings file (optional)
            overrides: Command-line values; None entries are ignored
        """
        if experiment not in STUDIES:
            raise InvalidArgumentError(f"Unknown experiment {experiment!r}")
        self.experiment = experiment
        self.settings = LabSettings(config_file, persist=config_file is not None)
        self.overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

        self.running = False
        self.start_time = 0.0
        self.end_time = 0.0
        self.error_count = 0
        self.result: Optional[StudyResult] = None
        self.exit_code: Optional[int] = None
        self.log_tail = []

    def build_config(self) -> ExperimentConfig:
        """Apply overrides to the settings and derive the study configuration."""
        for key, (section, name) in _SETTINGS_KEYS.items():
            if key in self.overrides:
                if not self.settings.set(section, name, self.overrides[key]):
                    raise InvalidArgumentError(f"Invalid value for {key}: {self.overrides[key]!r}")

        errors = self.settings.validate()
        if errors:
            details = "; ".join(f"{section}: {', '.join(msgs)}" for section, msgs in errors.items())
            raise InvalidArgumentError(f"Invalid settings: {details}")

        mesh = self.settings.get('mesh')
        study = self.settings.get('study')
        output = self.settings.get('output')

        domain = self.overrides.get("domain", mesh.domain)
        region = self.overrides.get("region", mesh.region)
        mesh_file = self.overrides.get("mesh_file")

        cfg = ExperimentConfig(
            experiment=self.experiment,
            kind=MeshKind.parse(mesh.kind),
            n_levels=list(mesh.n_levels),
            degree=study.degree,
            constraints=study.constraints,
            out_dir=Path(output.out_dir),
            seed=mesh.seed,
            domain=_rectangle(domain),
            region=_rectangle(region),
            alpha=study.alpha,
            eta=study.eta,
            target=study.target,
            case=study.case,
            threads=self.settings.capped_threads(study.threads),
            solver=SolverConfig.from_settings(self.settings.get('solver')),
            csv_digits=output.csv_digits,
            write_svg=output.write_svg,
            n=self.overrides.get("n"),
            mesh_file=Path(mesh_file) if mesh_file else None,
            refine=self.overrides.get("refine", 0),
            jump_mode=self.overrides.get("jump_mode", "pointwise"),
            export=bool(self.overrides.get("export", False)),
        )
        cfg.validate()
        return cfg

    def run(self) -> int:
        """
        Run the study and return the exit code.

        InvalidArgumentError from configuration propagates so the caller can
        report a usage error.
        """
        cfg = self.build_config()
        handler = add_capture_handler()

        logger.info(f"Starting {self.experiment} study, output in {cfg.out_dir}")
        self.start_time = time.time()
        self.running = True
        try:
            self.result = STUDIES[self.experiment](cfg)
            self.exit_code = EXIT_OK if self.result.accepted else EXIT_REJECTED
            if not self.result.accepted:
                logger.warning(f"{self.experiment} study finished but did not meet its acceptance criteria")
        except (ConvexLabError, OSError) as e:
            logger.error(f"{self.experiment} study failed: {e}")
            self.error_count += 1
            self.exit_code = EXIT_FAILURE
        finally:
            self.running = False
            self.end_time = time.time()
            self.log_tail = handler.tail(LOG_TAIL_LINES)
            remove_capture_handler()

        self._log_status()
        return self.exit_code

    def _log_status(self) -> None:
        status = self.get_status()
        logger.info(f"{self.experiment}: exit {status['exit_code']} after {status['elapsed_seconds']:.2f} s")
        for name, path in status['files'].items():
            logger.info(f"  {name}: {path}")

    def get_status(self) -> Dict[str, Any]:
        """Get run status."""
        end = self.end_time if not self.running else time.time()
        result = self.result
        return {
            "experiment": self.experiment,
            "running": self.running,
            "elapsed_seconds": end - self.start_time if self.start_time > 0 else 0.0,
            "accepted": result.accepted if result else False,
            "exit_code": self.exit_code,
            "error_count": self.error_count,
            "files": {k: str(v) for k, v in result.files.items()} if result else {},
            "summary": result.summary if result else {},
            "log_tail": list(self.log_tail),
        }


def _rectangle(value) -> Optional[Rectangle]:
    if value is None or isinstance(value, Rectangle):
        return value
    if isinstance(value, str):
        return Rectangle.parse(value)
    return Rectangle.from_sequence(value)
