"""Run configuration files: JSON schema validation and conversion to run specs."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .coverage import ConfigError, InitialConfig
from .dynamics import CONSTRUCTIONS, RadiusTransform, RunSpec, SpecError
from .geometry import GeometryError
from .pointproc import DistributionError, distribution_from_dict

_NUMBER_OR_INF = {"oneOf": [{"type": "number", "minimum": 0}, {"const": "inf"}]}

SCHEMA = {
    "type": "object",
    "required": ["dimension", "types", "pieces", "rho", "betas", "seed", "stop"],
    "properties": {
        "dimension": {"type": "integer", "minimum": 1},
        "types": {"type": "integer", "minimum": 1, "maximum": 8},
        "pieces": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["shape", "type", "time"],
                "properties": {
                    "shape": {"type": "object", "required": ["shape"]},
                    "type": {"type": "integer", "minimum": 1},
                    "time": _NUMBER_OR_INF,
                },
            },
        },
        "rho": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["deterministic", "uniform", "exponential", "pareto", "mixture"]},
                "params": {"type": "object"},
            },
        },
        "betas": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
        "seed": {"type": "integer", "minimum": 0},
        "stop": {
            "type": "object",
            "required": ["tmax"],
            "properties": {
                "tmax": {"type": "number", "exclusiveMinimum": 0},
                "rstop": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "rcap": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "construction": {"enum": list(CONSTRUCTIONS)},
        "transform": {
            "oneOf": [
                {"enum": ["identity", "shrink"]},
                {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {"kind": {"enum": ["identity", "shrink", "scale"]}, "factor": {"type": "number"}},
                },
            ]
        },
        "strengthCap": {"type": "number", "exclusiveMinimum": 0},
        "experiment": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"type": "string"}, "params": {"type": "object"}},
        },
    },
}


class ConfigValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    spec: RunSpec
    experiment: dict | None
    document: dict


def parse_config(doc: dict, seed_override: int | None = None) -> RunConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigValidationError(f"{where}: {exc.message}") from exc
    try:
        config = InitialConfig.from_dict(doc)
        rho = distribution_from_dict(doc["rho"])
        stop = doc["stop"]
        seed = doc["seed"] if seed_override is None else seed_override
        spec = RunSpec(
            config,
            rho,
            tuple(doc["betas"]),
            int(seed),
            float(stop["tmax"]),
            r_stop=stop.get("rstop"),
            construction=doc.get("construction", CONSTRUCTIONS[0]),
            transform=RadiusTransform.from_dict(doc.get("transform")),
            strength_cap=doc.get("strengthCap"),
            r_cap=float(stop.get("rcap", 1e4)),
        )
    except (ConfigError, SpecError, GeometryError, DistributionError, KeyError, TypeError, ValueError) as exc:
        raise ConfigValidationError(str(exc)) from exc
    return RunConfig(spec, doc.get("experiment"), doc)


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigValidationError(f"cannot read {path}: {exc}") from exc
    return parse_config(doc, seed_override)
