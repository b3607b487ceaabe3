# File: utils/config_utils.py
"""Leitura e validação da configuração JSON de uma execução.

Os valores padrão vêm de config/settings.yaml; chaves desconhecidas são
rejeitadas com o caminho completo (por exemplo ``problem.boundary.l3``).
"""
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from services.bvp_solver import SolverOptions
from services.geometry import ChannelProfile
from services.problem import BoundaryData, IonSpecies
from services.transient_solver import TransientOptions
from utils.errors import ParseError, PnpError, ValidationError

# Carrega as configurações do arquivo config/settings.yaml
settings_path = os.path.join(os.path.dirname(os.path.dirname(__file__)), "config", "settings.yaml")
with open(settings_path, "r", encoding="utf8") as config_file:
    SETTINGS = yaml.safe_load(config_file)

VERSION = str(SETTINGS.get("version", "0.0.0"))
SWEEP_AXES = ("mu", "phi0", "bump_amplitude")
SWEEP_METHODS = ("asymptotic", "bvp")
INITIAL_KINDS = ("linear", "perturbed", "random", "steady")


@dataclass(frozen=True)
class ProblemConfig:
    geometry: ChannelProfile
    species: IonSpecies
    boundary: BoundaryData
    mu: float
    normalize: bool = False

    @property
    def lam(self) -> float:
        return 1.0 / self.mu**2


@dataclass(frozen=True)
class LayersConfig:
    tol: float = 1e-10
    xi_span: float = 40.0
    xi_max: float = None


@dataclass(frozen=True)
class InitialData:
    kind: str = "perturbed"
    amplitude: float = 0.1
    modes: int = 4


@dataclass(frozen=True)
class TransientConfig:
    T: float = 1.0
    N: int = 200
    initial: InitialData = field(default_factory=InitialData)
    options: TransientOptions = field(default_factory=TransientOptions)


@dataclass(frozen=True)
class SweepConfig:
    axis: str = None
    values: tuple = ()
    method: str = "asymptotic"


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig
    solver: SolverOptions = field(default_factory=SolverOptions)
    layers: LayersConfig = field(default_factory=LayersConfig)
    transient: TransientConfig = field(default_factory=TransientConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output_dir: str = "output"
    seed: int = 0


# --- auxiliares de validação ---

def _require_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ValidationError(f"'{path}' deve ser um objeto JSON")
    return value


def _reject_unknown(data: dict, allowed, path: str):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        where = f"{path}." if path else ""
        raise ValidationError(f"Chave desconhecida: '{where}{unknown[0]}'")


def _number(data: dict, key: str, path: str, default=None, integer: bool = False):
    if key not in data:
        if default is None:
            raise ValidationError(f"Chave obrigatória ausente: '{path}.{key}'")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"'{path}.{key}' deve ser numérico")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ValidationError(f"'{path}.{key}' deve ser inteiro")
        return int(value)
    if not math.isfinite(value):
        raise ValidationError(f"'{path}.{key}' deve ser finito")
    return float(value)


def _choice(data: dict, key: str, path: str, options, default):
    value = data.get(key, default)
    if value not in options:
        raise ValidationError(f"'{path}.{key}' deve ser um de {list(options)} (recebido {value!r})")
    return value


def _build(factory, path: str, **kwargs):
    """Constrói um tipo do domínio, anotando o caminho em erros de validação."""
    try:
        return factory(**kwargs)
    except PnpError as e:
        raise ValidationError(f"{path}: {e}") from e


# --- blocos ---

def _parse_problem(data: dict) -> ProblemConfig:
    defaults = SETTINGS["problem"]
    data = _require_mapping(data, "problem")
    _reject_unknown(data, ("geometry", "species", "boundary", "mu", "lambda"), "problem")
    if "mu" in data and "lambda" in data:
        raise ValidationError("Informe apenas um de 'problem.mu' e 'problem.lambda'")

    geometry = dict(_require_mapping(data.get("geometry", {"kind": "constant"}), "problem.geometry"))
    normalize = geometry.pop("normalize", False)
    if not isinstance(normalize, bool):
        raise ValidationError("'problem.geometry.normalize' deve ser booleano")
    try:
        profile = ChannelProfile.from_dict(geometry)
    except PnpError as e:
        raise ValidationError(f"problem.geometry: {e}") from e

    species = _require_mapping(data.get("species", {}), "problem.species")
    _reject_unknown(species, ("alpha1", "alpha2", "D1", "D2"), "problem.species")
    species = _build(IonSpecies, "problem.species", **{
        key: _number(species, key, "problem.species", 1.0) for key in ("alpha1", "alpha2", "D1", "D2")
    })

    if "boundary" not in data:
        raise ValidationError("Chave obrigatória ausente: 'problem.boundary'")
    boundary = _require_mapping(data["boundary"], "problem.boundary")
    _reject_unknown(boundary, ("phi0", "l1", "l2", "r1", "r2"), "problem.boundary")
    boundary = _build(BoundaryData, "problem.boundary", **{
        key: _number(boundary, key, "problem.boundary") for key in ("phi0", "l1", "l2", "r1", "r2")
    })

    if "lambda" in data:
        lam = _number(data, "lambda", "problem")
        if not lam > 0:
            raise ValidationError("'problem.lambda' deve ser positivo")
        mu = 1.0 / math.sqrt(lam)
    else:
        mu = _number(data, "mu", "problem", float(defaults["mu"]))
        if not mu > 0:
            raise ValidationError("'problem.mu' deve ser positivo")
    return ProblemConfig(profile, species, boundary, mu, normalize)


def _parse_dataclass(cls, data, path: str, defaults: dict, skip=()):
    data = _require_mapping(data, path)
    names = [f.name for f in fields(cls) if f.name not in skip]
    _reject_unknown(data, names, path)
    values = {}
    for f in fields(cls):
        if f.name in skip:
            continue
        default = data.get(f.name, defaults.get(f.name))
        if default is None and f.name not in data:
            continue
        if isinstance(default, str) or isinstance(data.get(f.name), str):
            values[f.name] = data.get(f.name, default)
        else:
            integer = f.type in (int, "int")
            values[f.name] = _number({f.name: default}, f.name, path, integer=integer)
    return _build(cls, path, **values)


def _parse_transient(data: dict) -> TransientConfig:
    defaults = SETTINGS["transient"]
    data = _require_mapping(data, "transient")
    option_names = [f.name for f in fields(TransientOptions)]
    _reject_unknown(data, ["T", "N", "initial", *option_names], "transient")
    initial = dict(defaults["initial"])
    initial.update(_require_mapping(data.get("initial", {}), "transient.initial"))
    _reject_unknown(initial, ("kind", "amplitude", "modes"), "transient.initial")
    initial_data = InitialData(
        kind=_choice(initial, "kind", "transient.initial", INITIAL_KINDS, "perturbed"),
        amplitude=_number(initial, "amplitude", "transient.initial", 0.1),
        modes=_number(initial, "modes", "transient.initial", 4, integer=True),
    )
    options = _parse_dataclass(
        TransientOptions, {k: v for k, v in data.items() if k in option_names}, "transient", defaults,
    )
    T = _number(data, "T", "transient", float(defaults["T"]))
    N = _number(data, "N", "transient", int(defaults["N"]), integer=True)
    if not T > 0 or N < 10:
        raise ValidationError("'transient.T' deve ser positivo e 'transient.N' >= 10")
    return TransientConfig(T=T, N=N, initial=initial_data, options=options)


def _parse_sweep(data: dict) -> SweepConfig:
    data = _require_mapping(data, "sweep")
    _reject_unknown(data, ("axis", "values", "method"), "sweep")
    if "axis" not in data and "values" not in data:
        return SweepConfig(method=_choice(data, "method", "sweep", SWEEP_METHODS, SETTINGS["sweep"]["method"]))
    axis = _choice(data, "axis", "sweep", SWEEP_AXES, None)
    values = data.get("values")
    if not isinstance(values, list) or not values:
        raise ValidationError("'sweep.values' deve ser uma lista não vazia")
    values = tuple(_number({"v": v}, "v", "sweep.values") for v in values)
    method = _choice(data, "method", "sweep", SWEEP_METHODS, SETTINGS["sweep"]["method"])
    return SweepConfig(axis=axis, values=values, method=method)


def parse_config(text: str) -> RunConfig:
    """Valida o documento JSON e preenche os padrões."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"JSON inválido na linha {e.lineno}, coluna {e.colno}: {e.msg}") from e
    data = _require_mapping(data, "<raiz>")
    _reject_unknown(data, ("problem", "solver", "layers", "transient", "sweep", "output_dir", "seed"), "")
    if "problem" not in data:
        raise ValidationError("Chave obrigatória ausente: 'problem'")

    problem = _parse_problem(data["problem"])
    solver = _parse_dataclass(SolverOptions, data.get("solver", {}), "solver", SETTINGS["solver"])
    layer_defaults = SETTINGS["layers"]
    layers_data = _require_mapping(data.get("layers", {}), "layers")
    _reject_unknown(layers_data, ("tol", "xi_span", "xi_max"), "layers")
    xi_max = layers_data.get("xi_max")
    layers = LayersConfig(
        tol=_number(layers_data, "tol", "layers", float(layer_defaults["tol"])),
        xi_span=_number(layers_data, "xi_span", "layers", float(layer_defaults["xi_span"])),
        xi_max=None if xi_max is None else _number(layers_data, "xi_max", "layers"),
    )
    transient = _parse_transient(data.get("transient", {}))
    sweep = _parse_sweep(data.get("sweep", {}))

    output_dir = data.get("output_dir", "output")
    if not isinstance(output_dir, str) or not output_dir:
        raise ValidationError("'output_dir' deve ser um texto não vazio")
    seed = _number(data, "seed", "<raiz>", 0, integer=True)
    return RunConfig(problem, solver, layers, transient, sweep, output_dir, seed)


def config_to_dict(config: RunConfig) -> dict:
    """Forma JSON canônica (mu explícito, lambda omitido)."""
    problem = config.problem
    geometry = problem.geometry.to_dict()
    if problem.normalize:
        geometry["normalize"] = True
    transient = {"T": config.transient.T, "N": config.transient.N,
                 "initial": asdict(config.transient.initial), **asdict(config.transient.options)}
    sweep = {"method": config.sweep.method}
    if config.sweep.axis is not None:
        sweep.update(axis=config.sweep.axis, values=list(config.sweep.values))
    layers = {"tol": config.layers.tol, "xi_span": config.layers.xi_span}
    if config.layers.xi_max is not None:
        layers["xi_max"] = config.layers.xi_max
    return {
        "problem": {
            "geometry": geometry,
            "species": asdict(problem.species),
            "boundary": asdict(problem.boundary),
            "mu": problem.mu,
        },
        "solver": asdict(config.solver),
        "layers": layers,
        "transient": transient,
        "sweep": sweep,
        "output_dir": config.output_dir,
        "seed": config.seed,
    }


def serialize_config(config: RunConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True)


def with_overrides(config: RunConfig, output_dir: str = None, seed: int = None) -> RunConfig:
    changes = {}
    if output_dir is not None:
        changes["output_dir"] = output_dir
    if seed is not None:
        changes["seed"] = int(seed)
    return replace(config, **changes) if changes else config
