import json

import numpy as np
import pytest
import yaml

from dicke_feedback.config import ExperimentConfig, ExperimentKind, expand_grid
from dicke_feedback.errors import ConfigError
from dicke_feedback.kernels import PowerLawKernel
from dicke_feedback.recipes import list_recipes, load_recipe, recipe_names, resolve
from dicke_feedback.runner import ExperimentRunner


def test_defaults_validate():
    config = ExperimentConfig()
    assert config.validate_config()
    assert config.kind is ExperimentKind.SPECTRUM
    assert config.kernel == PowerLawKernel(s=1.0)
    assert config.params.g == 0.1


def test_sections_merge_into_defaults():
    config = ExperimentConfig(data={"params": {"g": 0.4}, "kernel": {"shape": "exponential", "rate": 3.0}})
    assert config.params.g == 0.4
    assert config.params.delta == 2.0
    assert config.kernel.to_dict() == {"shape": "exponential", "rate": 3.0, "amplitude": 1.0}


def test_null_kernel():
    assert ExperimentConfig(data={"kernel": None}).kernel is None


def test_yaml_and_json_files_round_trip(tmp_path):
    config = ExperimentConfig(data={"kind": "gcrit-scan", "grids": {"kappa": {"geomspace": [0.1, 10, 5]}}})
    for suffix in (".yaml", ".json"):
        path = tmp_path / f"cfg{suffix}"
        config.save_config(str(path))
        loaded = ExperimentConfig(str(path))
        assert loaded.to_dict() == config.to_dict()
        assert loaded.fingerprint() == config.fingerprint()


def test_fingerprint_ignores_output_dir_only():
    a = ExperimentConfig(data={"output_dir": "a"})
    b = ExperimentConfig(data={"output_dir": "b"})
    c = ExperimentConfig(data={"seed": 1})
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()
    assert len(a.fingerprint()) == 64


def test_expand_grid():
    np.testing.assert_allclose(expand_grid([1, 2.5]), [1.0, 2.5])
    np.testing.assert_allclose(expand_grid({"linspace": [0, 1, 3]}), [0.0, 0.5, 1.0])
    np.testing.assert_allclose(expand_grid({"geomspace": [1, 100, 3]}), [1.0, 10.0, 100.0])
    for bad in ([], ["a"], {"arange": [0, 1, 2]}, {"linspace": [0, 1]}, 3.0, [True]):
        with pytest.raises(ValueError):
            expand_grid(bad)


@pytest.mark.parametrize("data, fragment", [
    ({"colour": "red"}, "unknown key 'colour'"),
    ({"kind": "fig9"}, "kind must be one of"),
    ({"seed": -1}, "seed"),
    ({"seed": 2 ** 64}, "seed"),
    ({"params": {"kappa": -1.0}}, "kappa must be >= 0"),
    ({"params": {"spin": 2}}, "params: unknown key 'spin'"),
    ({"kernel": {"shape": "power_law", "s": -1}}, "kernel:"),
    ({"grids": {"ratios": [0.5, 1.5]}}, "grids.ratios"),
    ({"grids": {"q": [1]}}, "grids: unknown key 'q'"),
    ({"numerics": {"dt": 0}}, "numerics.dt"),
    ({"numerics": {"scheme": "rk4"}}, "numerics.scheme"),
    ({"numerics": {"n_traj": 1.5}}, "numerics.n_traj"),
    ({"numerics": {"tail_fraction": 2.0}}, "tail_fraction"),
    ({"plots": "yes"}, "plots"),
])
def test_schema_problems_are_reported(data, fragment):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig(data=data).validate_config()
    assert any(fragment in p for p in err.value.problems)


def test_all_problems_are_collected():
    with pytest.raises(ConfigError) as err:
        ExperimentConfig(data={"colour": 1, "seed": "x", "numerics": {"dt": -1}}).validate_config()
    assert len(err.value.problems) == 3


def test_unparseable_file(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("params: [unclosed\n")
    with pytest.raises(ConfigError):
        ExperimentConfig(str(path))
    path = tmp_path / "list.json"
    path.write_text(json.dumps([1, 2]))
    with pytest.raises(ConfigError):
        ExperimentConfig(str(path))


def test_bundled_recipes_validate():
    names = recipe_names()
    assert {"fig2", "fig3", "fig4", "fig5", "fig6", "threshold"} <= set(names)
    for name in names:
        config = load_recipe(name)
        assert config.validate_config()
        ExperimentRunner.check(config)
        assert config.config["acceptance"]


def test_single_spin_recipe_spans_gain_ratios():
    ratios = load_recipe("fig6").config["grids"]["gain_ratios"]
    assert {0.5, 1.0, 2.0, 4.0} <= set(ratios)
    assert min(ratios) < 0.5


def test_list_recipes_rows():
    rows = list_recipes()
    assert [r["name"] for r in rows] == recipe_names()
    fig2 = next(r for r in rows if r["name"] == "fig2")
    assert fig2["kind"] == "gcrit-scan"


def test_resolve(tmp_path):
    assert resolve("fig2").name == "fig2.yaml"
    path = tmp_path / "mine.yaml"
    path.write_text(yaml.safe_dump({"kind": "spectrum"}))
    assert resolve(str(path)) == path
    with pytest.raises(ConfigError):
        resolve("no-such-recipe")
