"""Experiment configuration: JSON schema validation and object construction.

A run is described by one JSON document with ``model``, ``rv``,
``learner``, ``baselines``, and ``output`` blocks.  Unknown keys are
rejected so typos fail loudly before any computation.  Bundled presets
live next to this module in ``presets/``.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from ashgp import rv as rvmod
from ashgp import truss as trussmod
from ashgp.learner import LearnerConfig
from ashgp.models import LinearModel, ProductModel, gradient_fd, ModelEval
from ashgp.rv import Dist, InvalidParameterError, MarginalSpec, RandomVectorSpec


class ConfigError(ValueError):
    """Invalid configuration file, with a location-anchored message."""


_MARGINAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "p1", "p2"],
    "properties": {
        "kind": {"enum": ["gaussian", "lognormal", "uniform"]},
        "p1": {"type": "number"},
        "p2": {"type": "number"},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "rv", "learner"],
    "properties": {
        "name": {"type": "string"},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["product", "linear", "truss25"]},
                "dimension": {"type": "integer", "minimum": 1},
                "y_f": {"type": "number"},
                "lambdas": {"type": "array", "items": {"type": "number"}},
                "beta0": {"type": "number"},
                "gradient_mode": {"enum": ["analytic", "fd"]},
            },
        },
        "rv": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["uniform01", "standard_normal", "truss25_table"]},
                "marginals": {"type": "array", "minItems": 1, "items": _MARGINAL_SCHEMA},
            },
        },
        "learner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_initial": {"type": "integer", "minimum": 1},
                "n_pool": {"type": "integer", "minimum": 1},
                "n_candidates": {"type": "integer", "minimum": 1},
                "eps_c": {"type": "number", "exclusiveMinimum": 0},
                "eps1_tol": {"type": "number", "exclusiveMinimum": 0},
                "eps2_tol": {"type": "number", "exclusiveMinimum": 0},
                "eps_d_rel": {"type": "number", "exclusiveMinimum": 0},
                "eps_d_abs": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "d_max": {"type": ["integer", "null"], "minimum": 1},
                "max_iterations": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "mode": {"enum": ["adaptive", "global_doe"]},
                "hgp_restarts": {"type": "integer", "minimum": 1},
                "hgp_max_iter": {"type": "integer", "minimum": 1},
            },
        },
        "baselines": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mcs_n": {"type": "integer", "minimum": 1},
                "form": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["json", "csv"]},
                },
            },
        },
    },
}

PRESET_NAMES = (
    "example1_d30",
    "example1_d50",
    "example1_d100",
    "appendixA_d100",
    "truss25",
)


def preset_path(name: str) -> Path:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    return Path(str(resources.files("ashgp").joinpath("presets", f"{name}.json")))


def load_config(path) -> dict:
    """Parse and schema-validate a config file or bundled preset name."""
    p = Path(path)
    if not p.exists() and p.name == str(path) and str(path) in PRESET_NAMES:
        p = preset_path(str(path))
    if not p.exists():
        raise ConfigError(f"{path}: no such config file or preset")
    text = p.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return validate_config(doc, source=str(p))


def validate_config(doc: dict, source: str = "<config>") -> dict:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(k) for k in exc.absolute_path) or "(root)"
        raise ConfigError(f"{source}: at {where}: {exc.message}") from exc
    rv = doc["rv"]
    if ("preset" in rv) == ("marginals" in rv):
        raise ConfigError(f"{source}: at rv: give exactly one of 'preset' or 'marginals'")
    return doc


class _FdGradientModel:
    """Wraps a model so gradients come from central finite differences."""

    def __init__(self, inner):
        self.inner = inner
        self.dimension = inner.dimension
        self.threshold = inner.threshold

    def value(self, x):
        return self.inner.value(x)

    def value_batch(self, x):
        return self.inner.value_batch(x)

    def evaluate(self, x) -> ModelEval:
        y = self.inner.value(x)
        return ModelEval(y, gradient_fd(self.inner.value, x))


def build_model(doc: dict):
    blk = doc["model"]
    name = blk["name"]
    if name == "truss25":
        model = trussmod.TrussModel()
        if "dimension" in blk and blk["dimension"] != model.dimension:
            raise ConfigError(f"truss25 model has fixed dimension {model.dimension}")
        if "y_f" in blk:
            model.threshold = blk["y_f"]
        return model
    if "dimension" not in blk:
        raise ConfigError(f"model {name!r} requires 'dimension'")
    d = blk["dimension"]
    if name == "product":
        kwargs = {}
        if "lambdas" in blk:
            kwargs["lambdas"] = blk["lambdas"]
        if "y_f" in blk:
            kwargs["threshold"] = blk["y_f"]
        model = ProductModel(d, **kwargs)
    else:
        kwargs = {}
        if "beta0" in blk:
            kwargs["beta0"] = blk["beta0"]
        if "y_f" in blk:
            kwargs["threshold"] = blk["y_f"]
        model = LinearModel(d, **kwargs)
    if blk.get("gradient_mode", "analytic") == "fd":
        model = _FdGradientModel(model)
    return model


def build_random_vector(doc: dict, dimension: int) -> RandomVectorSpec:
    blk = doc["rv"]
    if "preset" in blk:
        name = blk["preset"]
        if name == "uniform01":
            return rvmod.uniform_vector(dimension)
        if name == "standard_normal":
            return rvmod.standard_normal_vector(dimension)
        spec = trussmod.table2_random_vector()
        if spec.dimension != dimension:
            raise ConfigError("truss25_table preset only fits the truss25 model")
        return spec
    marginals = [MarginalSpec(Dist(m["kind"]), m["p1"], m["p2"]) for m in blk["marginals"]]
    if len(marginals) != dimension:
        raise ConfigError(
            f"rv lists {len(marginals)} marginals but the model dimension is {dimension}"
        )
    return RandomVectorSpec(marginals)


def build_learner_config(doc: dict, seed_override=None) -> LearnerConfig:
    blk = dict(doc["learner"])
    mode = blk.pop("mode", "adaptive")
    if mode == "global_doe":
        blk["max_iterations"] = 0
    if seed_override is not None:
        blk["seed"] = seed_override
    try:
        return LearnerConfig(**blk)
    except InvalidParameterError as exc:
        raise ConfigError(f"at learner: {exc}") from exc
