"""Bundled figure-reproduction configurations."""
from pathlib import Path
from typing import Dict, List

from ..config import ExperimentConfig
from ..errors import ConfigError

RECIPE_DIR = Path(__file__).parent


def recipe_names() -> List[str]:
    return sorted(p.stem for p in RECIPE_DIR.glob("*.yaml"))


def resolve(name_or_path: str) -> Path:
    """A bundled recipe name (``fig2``) or a path to a config file."""
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml", ".json") and path.exists():
        return path
    bundled = RECIPE_DIR / f"{name_or_path}.yaml"
    if bundled.exists():
        return bundled
    if path.exists():
        return path
    raise ConfigError(f"no config file or bundled recipe named '{name_or_path}'")


def load_recipe(name: str) -> ExperimentConfig:
    return ExperimentConfig(str(resolve(name)))


def list_recipes() -> List[Dict[str, str]]:
    """One row per bundled recipe: name, kind, expected runtime and acceptance criterion."""
    rows = []
    for name in recipe_names():
        cfg = load_recipe(name).config
        rows.append({
            "name": name,
            "kind": cfg["kind"],
            "expected_runtime": cfg["expected_runtime"],
            "acceptance": cfg["acceptance"],
        })
    return rows
