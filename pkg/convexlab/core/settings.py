#!/usr/bin/env python3

"""
Settings for ConvexLab
Configuration management for meshes, the QP solver, studies and output.

Part of the ConvexLab project.
"""

import json
import os
import logging
import typing
from typing import Dict, Any, Optional, List
from pathlib import Path
import dataclasses
from dataclasses import dataclass, field

# Configure logging
logger = logging.getLogger('settings')

THREADS_ENV_VAR = "CONVEXLAB_THREADS"

MESH_KINDS = ["mesh1", "mesh2", "mesh3", "mesh4"]
CONSTRAINT_MODES = ["conformal", "weak-subharmonic", "weak-convex", "monopolist", "none"]
TARGETS = ["quadratic", "affine", "superharmonic", "lemma2", "convex"]


@dataclass
class MeshSettings:
    """Mesh family settings"""
    kind: str = "mesh1"              # "mesh1", "mesh2", "mesh3", "mesh4"
    n_levels: List[int] = field(default_factory=lambda: [4, 8, 16, 32])
    domain: Optional[List[float]] = None  # x0, y0, x1, y1; None: the study's own default
    seed: int = 20240601             # Mesh4 perturbation seed
    region: Optional[List[float]] = None


@dataclass
class SolverSettings:
    """QP solver settings"""
    eps_abs: float = 1e-8
    eps_rel: float = 1e-8
    max_iter: int = 200000
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6               # over-relaxation
    adaptive_rho_interval: int = 25
    polish: bool = True
    polish_passes: int = 30
    scaling_iter: int = 10


@dataclass
class StudySettings:
    """Experiment settings"""
    degree: int = 1
    constraints: Optional[str] = None  # None: the study's own default
    alpha: float = 1.0               # monopolist
    eta: float = 1.0                 # margin of the adversarial quadratic
    target: Optional[str] = None
    case: Optional[str] = None
    threads: int = 1


@dataclass
class OutputSettings:
    """Output settings"""
    out_dir: str = "results"
    csv_digits: int = 17
    write_svg: bool = True


@dataclass
class LogSettings:
    """Logging settings"""
    level: str = "INFO"
    log_to_file: bool = False
    log_file_path: Optional[str] = None
    max_log_files: int = 5
    max_log_size_mb: int = 10


@dataclass
class LabAppSettings:
    """Main application settings container"""
    mesh: MeshSettings = field(default_factory=MeshSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    study: StudySettings = field(default_factory=StudySettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    logging: LogSettings = field(default_factory=LogSettings)
    version: str = "1.0.0"
    first_run: bool = True


class SettingsEncoder(json.JSONEncoder):
    """Custom JSON encoder for dataclasses"""
    def default(self, obj):
        if dataclasses.is_dataclass(obj):
            return dataclasses.asdict(obj)
        return super().default(obj)


class LabSettings:
    """
    Settings manager for ConvexLab.
    Handles loading, saving, and accessing application settings.
    """
    def __init__(self, config_file: Optional[str] = None, persist: bool = True):
        """
        Initialize settings manager.

        Args:
            config_file: Path to configuration file (optional)
            persist: Write a default file when none exists
        """
        self.settings = LabAppSettings()
        self.persist = persist
        self.thread_cap: Optional[int] = None

        if config_file:
            self.config_file = config_file
        else:
            self.config_file = os.path.join(
                str(Path.home()),
                '.convexlab',
                'config.json'
            )

        self.load()
        self._apply_environment()

    def load(self, config_file: Optional[str] = None) -> bool:
        """
        Load settings from file.

        Args:
            config_file: Override configuration file path

        Returns:
            bool: True if settings were loaded successfully
        """
        if config_file:
            self.config_file = config_file

        try:
            if not os.path.exists(self.config_file):
                logger.info(f"Configuration file not found at {self.config_file}")
                if self.persist:
                    self._create_default_config()
                return True

            with open(self.config_file, 'r') as f:
                data = json.load(f)

            self._update_from_dict(data)

            logger.info(f"Settings loaded from {self.config_file}")
            return True

        except json.JSONDecodeError as e:
            logger.error(f"Error parsing config file: {e}")
            return False

        except (KeyError, ValueError, TypeError, OSError) as e:
            logger.error(f"Error loading config: {e}")
            return False

    def save(self, config_file: Optional[str] = None) -> bool:
        """
        Save settings to file.

        Args:
            config_file: Override configuration file path

        Returns:
            bool: True if settings were saved successfully
        """
        if config_file:
            self.config_file = config_file

        try:
            directory = os.path.dirname(self.config_file)
            if directory:
                os.makedirs(directory, exist_ok=True)

            with open(self.config_file, 'w') as f:
                json.dump(self.settings, f, indent=2, cls=SettingsEncoder)

            logger.info(f"Settings saved to {self.config_file}")
            return True

        except (TypeError, ValueError, OSError) as e:
            logger.error(f"Error saving config: {e}")
            return False

    def _create_default_config(self) -> None:
        """Create default configuration file."""
        try:
            directory = os.path.dirname(self.config_file)
            if directory:
                os.makedirs(directory, exist_ok=True)

            with open(self.config_file, 'w') as f:
                json.dump(self.settings, f, indent=2, cls=SettingsEncoder)

            logger.info(f"Default configuration created at {self.config_file}")

        except (TypeError, OSError) as e:
            logger.error(f"Error creating default config: {e}")

    def _apply_environment(self) -> None:
        """Apply environment overrides."""
        raw = os.environ.get(THREADS_ENV_VAR)
        if raw is None:
            return
        try:
            threads = int(raw)
        except ValueError:
            logger.warning(f"Ignoring {THREADS_ENV_VAR}={raw!r}: not an integer")
            return
        if threads < 1:
            logger.warning(f"Ignoring {THREADS_ENV_VAR}={threads}: must be positive")
            return
        self.thread_cap = threads
        self.settings.study.threads = threads
        logger.debug(f"Thread cap set to {threads} from environment")

    def capped_threads(self, requested: int) -> int:
        """Worker threads after the environment cap."""
        if self.thread_cap is None:
            return requested
        return min(requested, self.thread_cap)

    def _update_from_dict(self, data: Dict[str, Any]) -> None:
        """
        Update settings from dictionary.

        Args:
            data: Dictionary with settings data
        """
        def update_dataclass(obj, data_dict):
            for key, value in data_dict.items():
                if not hasattr(obj, key):
                    logger.debug(f"Ignoring unknown setting {key}")
                    continue
                current_value = getattr(obj, key)
                if dataclasses.is_dataclass(current_value) and isinstance(value, dict):
                    update_dataclass(current_value, value)
                elif isinstance(value, list) and (current_value is None or isinstance(current_value, list)):
                    setattr(obj, key, value)
                else:
                    target_type = type(current_value)
                    try:
                        if target_type is bool and isinstance(value, int):
                            setattr(obj, key, bool(value))
                        elif value is None or current_value is None or isinstance(value, target_type):
                            setattr(obj, key, value)
                        else:
                            setattr(obj, key, target_type(value))
                    except (ValueError, TypeError):
                        logger.warning(f"Could not convert {key}={value} to {target_type}")

        update_dataclass(self.settings, data)

        self.settings.first_run = False

    def get(self, section: str, key: Optional[str] = None) -> Any:
        """
        Get a setting value.

        Args:
            section: Section name (mesh, solver, study, output, logging)
            key: Setting key (if None, returns entire section)

        Returns:
            Setting value or None if not found
        """
        if hasattr(self.settings, section):
            section_obj = getattr(self.settings, section)
            if key is None:
                return section_obj
            if hasattr(section_obj, key):
                return getattr(section_obj, key)

        return None

    def set(self, section: str, key: str, value: Any) -> bool:
        """
        Set a setting value.

        Args:
            section: Section name (mesh, solver, study, output, logging)
            key: Setting key
            value: New value

        Returns:
            bool: True if setting was changed
        """
        try:
            if not hasattr(self.settings, section):
                return False
            section_obj = getattr(self.settings, section)
            if not hasattr(section_obj, key):
                return False

            current_value = getattr(section_obj, key)

            if current_value is None or value is None:
                # Optional fields: coerce through the annotation
                hint = section_obj.__class__.__annotations__.get(key)
                args = getattr(hint, "__args__", ()) or ()
                if value is not None and getattr(hint, "__origin__", None) is typing.Union and str in args:
                    value = str(value)
                setattr(section_obj, key, value)
                return True

            target_type = type(current_value)

            if target_type is bool and isinstance(value, int):
                typed_value = bool(value)
            elif isinstance(value, target_type):
                typed_value = value
            elif target_type is list and isinstance(value, (tuple, str)):
                typed_value = list(value) if isinstance(value, tuple) else [value]
            else:
                try:
                    typed_value = target_type(value)
                except (ValueError, TypeError):
                    logger.warning(f"Cannot convert {key}={value} to {target_type}")
                    return False

            setattr(section_obj, key, typed_value)
            return True

        except (AttributeError, KeyError, ValueError, TypeError) as e:
            logger.error(f"Error setting {section}.{key}: {e}")
            return False

    def apply_logging_settings(self) -> None:
        """Apply logging settings to the Python logging system."""
        try:
            log_level = self.settings.logging.level

            level_map = {
                "DEBUG": logging.DEBUG,
                "INFO": logging.INFO,
                "WARNING": logging.WARNING,
                "ERROR": logging.ERROR,
                "CRITICAL": logging.CRITICAL
            }
            level = level_map.get(log_level, logging.INFO)

            from convexlab.core.log_config import configure_logging

            configure_logging(
                level=level,
                log_to_file=self.settings.logging.log_to_file,
                log_file_path=self.settings.logging.log_file_path,
                max_log_files=self.settings.logging.max_log_files,
                max_log_size_mb=self.settings.logging.max_log_size_mb
            )

            logger.info(f"Logging level set to {log_level}")
        except (AttributeError, ValueError, OSError) as e:
            logger.error(f"Error applying logging settings: {e}")

    def validate(self) -> Dict[str, List[str]]:
        """
        Validate settings for consistency and correctness.

        Returns:
            dict: Dictionary of validation errors by section
        """
        errors = {}

        mesh_errors = []
        mesh = self.settings.mesh
        if mesh.kind not in MESH_KINDS:
            mesh_errors.append(f"Invalid mesh kind: {mesh.kind}")
        if not mesh.n_levels:
            mesh_errors.append("At least one mesh level is required")
        elif any(n < 1 for n in mesh.n_levels):
            mesh_errors.append("Mesh levels must be positive")
        elif any(b <= a for a, b in zip(mesh.n_levels, mesh.n_levels[1:])):
            mesh_errors.append("Mesh levels must be strictly increasing")
        if mesh.domain is not None and (len(mesh.domain) != 4 or mesh.domain[2] <= mesh.domain[0] or mesh.domain[3] <= mesh.domain[1]):
            mesh_errors.append("Domain must be x0,y0,x1,y1 with x1 > x0 and y1 > y0")
        if mesh.region is not None and len(mesh.region) != 4:
            mesh_errors.append("Region must be x0,y0,x1,y1")
        if mesh_errors:
            errors["mesh"] = mesh_errors

        solver_errors = []
        solver = self.settings.solver
        if solver.eps_abs < 0 or solver.eps_rel < 0:
            solver_errors.append("Tolerances must be nonnegative")
        if solver.max_iter <= 0:
            solver_errors.append("Iteration cap must be positive")
        if solver.rho <= 0 or solver.sigma <= 0:
            solver_errors.append("Penalty parameters must be positive")
        if not 0.0 < solver.alpha < 2.0:
            solver_errors.append("Relaxation must lie in (0, 2)")
        if solver_errors:
            errors["solver"] = solver_errors

        study_errors = []
        study = self.settings.study
        if study.degree not in (1, 2):
            study_errors.append(f"Invalid degree: {study.degree}")
        if study.constraints is not None and study.constraints not in CONSTRAINT_MODES:
            study_errors.append(f"Invalid constraint mode: {study.constraints}")
        if not 0.0 <= study.alpha <= 1.0:
            study_errors.append("Monopolist alpha must lie in [0, 1]")
        if study.eta <= 0:
            study_errors.append("Eta must be positive")
        if study.target is not None and study.target not in TARGETS:
            study_errors.append(f"Invalid target: {study.target}")
        if study.threads < 1:
            study_errors.append("Thread count must be positive")
        if study_errors:
            errors["study"] = study_errors

        output_errors = []
        if not self.settings.output.out_dir:
            output_errors.append("Output directory cannot be empty")
        if not 1 <= self.settings.output.csv_digits <= 17:
            output_errors.append("CSV digits must lie in [1, 17]")
        if output_errors:
            errors["output"] = output_errors

        logging_errors = []
        if self.settings.logging.log_to_file and not self.settings.logging.log_file_path:
            logging_errors.append("Log file path must be specified when logging to file")
        if self.settings.logging.max_log_files <= 0:
            logging_errors.append("Maximum log files must be positive")
        if self.settings.logging.max_log_size_mb <= 0:
            logging_errors.append("Maximum log size must be positive")
        if logging_errors:
            errors["logging"] = logging_errors

        return errors


# Example usage:
if __name__ == "__main__":
    settings = LabSettings(persist=False)

    print("Current Settings:")
    settings_dict = dataclasses.asdict(settings.settings)
    for section, section_settings in settings_dict.items():
        if isinstance(section_settings, dict):
            print(f"\n[{section}]")
            for key, value in section_settings.items():
                print(f"  {key} = {value}")
        else:
            print(f"\n{section} = {section_settings}")

    validation_errors = settings.validate()
    if validation_errors:
        print("\nValidation Errors:")
        for section, errors in validation_errors.items():
            print(f"[{section}]")
            for error in errors:
                print(f"  - {error}")
    else:
        print("\nSettings are valid.")
