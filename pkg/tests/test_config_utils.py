# File: tests/test_config_utils.py
import json

import pytest

from utils.config_utils import SETTINGS, config_to_dict, parse_config, serialize_config, with_overrides
from utils.errors import ParseError, ValidationError


def _config(**problem_changes):
    problem = {
        "geometry": {"kind": "bump", "base": 1.0, "amplitude": 0.5, "width": 0.2},
        "boundary": {"phi0": 0.5, "l1": 3.0, "l2": 1.0, "r1": 1.0, "r2": 2.0},
    }
    problem.update(problem_changes)
    return {"problem": problem}


def test_defaults_come_from_settings():
    config = parse_config(json.dumps(_config()))
    assert config.problem.mu == SETTINGS["problem"]["mu"]
    assert config.solver.N == SETTINGS["solver"]["N"]
    assert config.solver.grading == "tanh"
    assert config.transient.options.coupling == SETTINGS["transient"]["coupling"]
    assert config.transient.initial.kind == "perturbed"
    assert config.sweep.axis is None
    assert config.output_dir == "output"
    assert config.seed == 0
    assert config.problem.species.alpha1 == 1.0


def test_lambda_is_converted_to_mu():
    config = parse_config(json.dumps(_config(**{"lambda": 400.0})))
    assert config.problem.mu == pytest.approx(0.05)
    assert config.problem.lam == pytest.approx(400.0)


def test_mu_and_lambda_are_exclusive():
    with pytest.raises(ValidationError):
        parse_config(json.dumps(_config(mu=0.1, **{"lambda": 100.0})))


def test_unknown_key_reports_full_path():
    data = _config()
    data["problem"]["boundary"]["l3"] = 1.0
    with pytest.raises(ValidationError, match=r"problem\.boundary\.l3"):
        parse_config(json.dumps(data))
    with pytest.raises(ValidationError, match="'extra'"):
        parse_config(json.dumps({**_config(), "extra": 1}))


def test_malformed_json_reports_position():
    with pytest.raises(ParseError, match="linha 2"):
        parse_config('{\n  "problem": }')


@pytest.mark.parametrize("patch", [
    {"boundary": {"phi0": 0.0, "l1": -1.0, "l2": 1.0, "r1": 1.0, "r2": 1.0}},
    {"boundary": {"phi0": 0.0, "l1": 1.0, "l2": 1.0, "r1": 1.0}},
    {"geometry": {"kind": "constant", "value": 0.0}},
    {"species": {"alpha1": 0.0}},
    {"mu": -0.1},
    {"mu": "small"},
])
def test_invalid_problem_blocks(patch):
    with pytest.raises(ValidationError):
        parse_config(json.dumps(_config(**patch)))


def test_invalid_solver_and_transient_blocks():
    with pytest.raises(ValidationError):
        parse_config(json.dumps({**_config(), "solver": {"N": 5}}))
    with pytest.raises(ValidationError):
        parse_config(json.dumps({**_config(), "solver": {"N": 100.5}}))
    with pytest.raises(ValidationError):
        parse_config(json.dumps({**_config(), "transient": {"coupling": "explicit"}}))
    with pytest.raises(ValidationError):
        parse_config(json.dumps({**_config(), "transient": {"initial": {"kind": "spiky"}}}))
    with pytest.raises(ValidationError):
        parse_config(json.dumps({**_config(), "sweep": {"axis": "phi0", "values": []}}))


def test_sweep_block():
    config = parse_config(json.dumps({**_config(), "sweep": {"axis": "phi0", "values": [0, 0.5, 1]}}))
    assert config.sweep.axis == "phi0"
    assert config.sweep.values == (0.0, 0.5, 1.0)
    assert config.sweep.method == "asymptotic"
    assert parse_config(json.dumps({**_config(), "sweep": {"method": "bvp"}})).sweep.method == "bvp"


def test_serialization_is_stable():
    data = {
        **_config(mu=0.02),
        "solver": {"N": 401, "initial_guess": "composite"},
        "layers": {"xi_max": 12.0},
        "transient": {"T": 0.5, "coupling": "gummel", "initial": {"kind": "random", "modes": 3}},
        "sweep": {"axis": "bump_amplitude", "values": [0.1, 0.2], "method": "bvp"},
        "output_dir": "runs/a",
        "seed": 9,
    }
    data["problem"]["geometry"]["normalize"] = True
    config = parse_config(json.dumps(data))
    text = serialize_config(config)
    assert parse_config(text) == config
    assert serialize_config(parse_config(text)) == text
    assert config_to_dict(config)["problem"]["geometry"]["normalize"] is True


def test_overrides():
    config = parse_config(json.dumps(_config()))
    changed = with_overrides(config, "elsewhere", 42)
    assert (changed.output_dir, changed.seed) == ("elsewhere", 42)
    assert with_overrides(config) is config
