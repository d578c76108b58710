"""Experiment configuration: YAML or JSON files with a strict schema."""
from copy import deepcopy
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional
import json
import math

import numpy as np
import yaml

from .core import config_fingerprint
from .errors import ConfigError, DickeFeedbackError
from .kernels import FeedbackKernel, kernel_from_dict
from .model import ModelParams


class ExperimentKind(Enum):
    SPECTRUM = "spectrum"
    VARIANCE_SWEEP = "variance-sweep"
    EXPONENT = "exponent"
    GCRIT_SCAN = "gcrit-scan"
    TRAJECTORY = "trajectory"
    ENSEMBLE = "ensemble"
    MEANFIELD_SCAN = "meanfield-scan"


TOP_LEVEL_KEYS = ("kind", "name", "description", "params", "kernel", "grids", "numerics",
                  "seed", "output_dir", "plots", "acceptance", "expected_runtime")
PARAM_KEYS = ("omega_r", "delta", "kappa", "g", "G", "theta", "n_spins")
GRID_KEYS = ("omega", "ratios", "gain_ratios", "g_ratios", "s", "kappa", "theta")
NUMERIC_KEYS = {
    "dt": (float, None),
    "total_time": (float, None),
    "cavity_dim": (int, None),
    "matter_cutoff": (int, None),
    "matter_kind": (str, ("spin", "boson")),
    "scheme": (str, ("rouchon", "euler")),
    "n_traj": (int, None),
    "record_every": (int, None),
    "tail_fraction": (float, None),
    "record_noise_scale": (float, None),
    "memory_tol": (float, None),
    "rel_tol": (float, None),
    "max_omega": (float, None),
    "scan_points": (int, None),
    "transform_method": (str, ("expint", "quadrature")),
    "labels": (list, None),
    "threshold": (bool, None),
    "initial_matter": (str, ("ground", "x_plus", "x_minus")),
}
SEED_LIMIT = 2 ** 64


def expand_grid(spec: Any) -> np.ndarray:
    """A grid is an explicit list or one of {linspace|geomspace: [start, stop, n]}."""
    if isinstance(spec, dict):
        if len(spec) != 1:
            raise ValueError(f"grid spec needs exactly one of linspace/geomspace, got {sorted(spec)}")
        (how, args), = spec.items()
        if how not in ("linspace", "geomspace") or not isinstance(args, list) or len(args) != 3:
            raise ValueError(f"bad grid spec {spec!r}")
        start, stop, n = args
        fn = np.linspace if how == "linspace" else np.geomspace
        return fn(float(start), float(stop), int(n))
    if isinstance(spec, list) and spec and all(_is_number(v) for v in spec):
        return np.asarray(spec, dtype=float)
    raise ValueError(f"grid must be a non-empty list of numbers or a range spec, got {spec!r}")


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _merge(base: Dict, override: Dict) -> Dict:
    out = deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("kernel",):
            out[key] = _merge(out[key], value)
        else:
            out[key] = deepcopy(value)
    return out


class ExperimentConfig:
    def __init__(self, config_path: Optional[str] = None, data: Optional[Dict] = None):
        self.path = Path(config_path) if config_path else None
        self.config = self._load_config(config_path, data)

    def _load_config(self, config_path: Optional[str], data: Optional[Dict]) -> Dict:
        if data is None and not config_path:
            return self._default_config()
        if data is None:
            path = Path(config_path)
            with path.open() as f:
                try:
                    data = yaml.safe_load(f) if path.suffix in (".yaml", ".yml") else json.load(f)
                except (yaml.YAMLError, json.JSONDecodeError) as e:
                    raise ConfigError(f"{path.name}: cannot parse: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping at the top level")
        return _merge(self._default_config(), data)

    def _default_config(self) -> Dict:
        return {
            "kind": ExperimentKind.SPECTRUM.value,
            "name": "experiment",
            "description": "",
            "acceptance": "",
            "expected_runtime": "",

            # physics, recoil units
            "params": {
                "omega_r": 1.0,
                "delta": 2.0,
                "kappa": 1.0,
                "g": 0.1,
                "G": 0.0,
                "theta": math.pi / 2,
                "n_spins": 1,
            },
            # null means no feedback loop
            "kernel": {"shape": "power_law", "s": 1.0, "t0": 1.0, "h0": None},
            "grids": {},

            "numerics": {},

            # reproducibility and output
            "seed": 0,
            "output_dir": "runs",
            "plots": True,
        }

    def update_config(self, new_config: Dict) -> None:
        """Merge new values into the configuration."""
        self.config = _merge(self.config, new_config)

    def save_config(self, config_path: str) -> None:
        path = Path(config_path)
        with path.open('w') as f:
            if path.suffix in ('.yaml', '.yml'):
                yaml.safe_dump(self.config, f, sort_keys=False)
            else:
                json.dump(self.config, f, indent=2)

    def to_dict(self) -> Dict:
        return deepcopy(self.config)

    @property
    def kind(self) -> ExperimentKind:
        return ExperimentKind(self.config["kind"])

    @property
    def params(self) -> ModelParams:
        return ModelParams.from_dict(self.config["params"])

    @property
    def kernel(self) -> Optional[FeedbackKernel]:
        spec = self.config["kernel"]
        return None if spec is None else kernel_from_dict(spec)

    @property
    def numerics(self) -> Dict[str, Any]:
        return self.config["numerics"]

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    def grid(self, name: str, default=None) -> Optional[np.ndarray]:
        spec = self.config["grids"].get(name)
        return default if spec is None else expand_grid(spec)

    def fingerprint(self) -> str:
        """Run id: sha256 of the canonical JSON of the normalized configuration.

        The output location is not part of the id.
        """
        return config_fingerprint({k: v for k, v in self.config.items() if k != "output_dir"})

    def validate_config(self) -> bool:
        """Raise ConfigError listing every schema problem; True otherwise."""
        cfg = self.config
        problems: List[str] = []

        for key in cfg:
            if key not in TOP_LEVEL_KEYS:
                problems.append(f"unknown key '{key}'")
        try:
            ExperimentKind(cfg.get("kind"))
        except ValueError:
            problems.append(f"kind must be one of {[k.value for k in ExperimentKind]}, got {cfg.get('kind')!r}")
        for key in ("name", "description", "output_dir", "acceptance", "expected_runtime"):
            if not isinstance(cfg.get(key), str):
                problems.append(f"{key} must be a string")
        if not isinstance(cfg.get("plots"), bool):
            problems.append("plots must be true or false")
        seed = cfg.get("seed")
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < SEED_LIMIT:
            problems.append(f"seed must be an integer in [0, 2^64), got {seed!r}")

        problems += self._check_params(cfg.get("params"))
        problems += self._check_kernel(cfg.get("kernel"))
        problems += self._check_grids(cfg.get("grids"))
        problems += self._check_numerics(cfg.get("numerics"))

        if problems:
            raise ConfigError(problems)
        return True

    @staticmethod
    def _check_params(params: Any) -> List[str]:
        if not isinstance(params, dict):
            return ["params must be a mapping"]
        problems = [f"params: unknown key '{k}'" for k in params if k not in PARAM_KEYS]
        if problems:
            return problems
        try:
            ModelParams.from_dict(params)
        except (DickeFeedbackError, TypeError) as e:
            problems.append(f"params: {e}")
        return problems

    @staticmethod
    def _check_kernel(kernel: Any) -> List[str]:
        if kernel is None:
            return []
        if not isinstance(kernel, dict):
            return ["kernel must be a mapping or null"]
        try:
            kernel_from_dict(kernel)
        except (DickeFeedbackError, TypeError) as e:
            return [f"kernel: {e}"]
        return []

    @staticmethod
    def _check_grids(grids: Any) -> List[str]:
        if not isinstance(grids, dict):
            return ["grids must be a mapping"]
        problems = []
        for key, spec in grids.items():
            if key not in GRID_KEYS:
                problems.append(f"grids: unknown key '{key}'")
                continue
            try:
                values = expand_grid(spec)
            except (ValueError, TypeError) as e:
                problems.append(f"grids.{key}: {e}")
                continue
            if not np.all(np.isfinite(values)):
                problems.append(f"grids.{key}: values must be finite")
            elif key in ("s", "g_ratios") and np.any(values <= 0):
                problems.append(f"grids.{key}: values must be > 0")
            elif key == "kappa" and np.any(values < 0):
                problems.append("grids.kappa: values must be >= 0")
            elif key == "ratios" and (np.any(values <= 0) or np.any(values >= 1)):
                problems.append("grids.ratios: values must lie in (0, 1)")
        return problems

    @staticmethod
    def _check_numerics(numerics: Any) -> List[str]:
        if not isinstance(numerics, dict):
            return ["numerics must be a mapping"]
        problems = []
        for key, value in numerics.items():
            if key not in NUMERIC_KEYS:
                problems.append(f"numerics: unknown key '{key}'")
                continue
            kind, choices = NUMERIC_KEYS[key]
            if kind is float:
                ok = _is_number(value) and math.isfinite(value) and value > 0
                if not ok:
                    problems.append(f"numerics.{key} must be a positive number, got {value!r}")
            elif kind is int:
                if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                    problems.append(f"numerics.{key} must be a positive integer, got {value!r}")
            elif kind is bool:
                if not isinstance(value, bool):
                    problems.append(f"numerics.{key} must be true or false")
            elif kind is list:
                if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                    problems.append(f"numerics.{key} must be a list of names")
            elif kind is str and (not isinstance(value, str) or value not in choices):
                problems.append(f"numerics.{key} must be one of {list(choices)}, got {value!r}")
        if "tail_fraction" in numerics and _is_number(numerics["tail_fraction"]) \
                and not 0 < numerics["tail_fraction"] <= 1:
            problems.append("numerics.tail_fraction must lie in (0, 1]")
        return problems
