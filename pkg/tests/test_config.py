import copy

import pytest
import yaml

from ttsa.config import load_config, parse_config
from ttsa.exceptions import ConfigError

BASE = {
    "problem": {"kind": "polyak", "F_matrix": [[0.5]], "F_offset": [0.5],
                "noise_fast": {"kind": "additive_gaussian", "scale": 0.5},
                "noise_slow": {"kind": "additive_gaussian", "scale": 0.5}},
    "schedule": {"regime": "both_one_over_k", "beta": 4, "min_offset": 100},
    "run": {"horizon": 1000, "trials": 10, "base_seed": 3},
}


def variant(**patch):
    d = copy.deepcopy(BASE)
    for dotted, value in patch.items():
        *head, last = dotted.split("__")
        node = d
        for h in head:
            node = node.setdefault(h, {})
        if value is DELETE:
            del node[last]
        else:
            node[last] = value
    return d


DELETE = object()


def test_all_shipped_configs_parse_and_build(configs_dir):
    paths = sorted(configs_dir.glob("*.yaml"))
    assert len(paths) >= 8
    for path in paths:
        cfg = load_config(path)
        p = cfg.build_problem()
        cfg.build_schedule(p)


@pytest.mark.parametrize("name", ["polyak_regime1", "polyak_regime2", "strict_affine", "saddle", "lagrangian",
                                  "linear_ttsa", "smoke"])
def test_round_trip(configs_dir, name):
    cfg = load_config(configs_dir / f"{name}.yaml")
    again = parse_config(yaml.safe_load(cfg.to_yaml()))
    assert again.to_dict() == cfg.to_dict()
    assert again.config_hash() == cfg.config_hash()


def test_defaults_filled():
    cfg = parse_config(BASE)
    assert cfg.schedule["alpha"] == "auto" and cfg.schedule["offset"] == "auto"
    assert cfg.schedule["strict"] is False
    assert cfg.run["backend"] == "auto"
    assert cfg.checks.get("rate") is None


def test_overrides_change_hash():
    cfg = parse_config(BASE)
    other = cfg.with_overrides(seed=9, trials=4)
    assert other.run["base_seed"] == 9 and other.run["trials"] == 4
    assert other.config_hash() != cfg.config_hash()
    assert cfg.with_overrides().config_hash() == cfg.config_hash()


@pytest.mark.parametrize("patch,path", [
    (dict(problem__kind="quadratic"), "problem.kind"),
    (dict(problem__F_matrix=DELETE), "problem.F_matrix"),
    (dict(problem__noise_fast={"kind": "laplace", "scale": 1}), "problem.noise_fast.kind"),
    (dict(problem__extra=1), "problem.extra"),
    (dict(schedule__beta=DELETE), "schedule.beta"),
    (dict(schedule__beta="four"), "schedule.beta"),
    (dict(schedule__regime="weekly"), "schedule.regime"),
    (dict(schedule__a=0.75), "schedule.a"),
    (dict(schedule__regime="fast_one_over_k_a"), "schedule.a"),
    (dict(schedule__regime="fast_one_over_k_a", schedule__a=1.2), "schedule.a"),
    (dict(run__horizon=0), "run.horizon"),
    (dict(run__horizon=DELETE), "run.horizon"),
    (dict(run__stride=10, run__log_points=20), "run.stride"),
    (dict(run__backend="gpu"), "run.backend"),
    (dict(outputs__oracles=["astrology"]), "outputs.oracles"),
    (dict(checks__rate={"series": "err_q", "range": [-1, 0]}), "checks.rate.series"),
    (dict(checks__bound_domination="yes"), "checks.bound_domination"),
])
def test_errors_name_the_field(patch, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(variant(**patch))
    assert exc.value.path == path
    assert str(exc.value).startswith(path + ":")


def test_missing_section():
    d = copy.deepcopy(BASE)
    del d["run"]
    with pytest.raises(ConfigError) as exc:
        parse_config(d)
    assert exc.value.path == "run"


def test_start_length_checked():
    cfg = parse_config(variant(run__x0=[0.1, 0.2]))
    with pytest.raises(ConfigError) as exc:
        cfg.start(cfg.build_problem())
    assert exc.value.path == "run.x0"


def test_invalid_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("problem: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)
