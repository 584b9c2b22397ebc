"""Run configuration: JSON schema, validation and object construction."""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema

from . import charts as ch
from . import geometry as geo
from .errors import ConfigError, NoKnownStationary
from .integrators import Repair, Scheme, SimConfig
from .models import ModelKind, ModelSpec
from .models.spec import Interaction, SwarmSpec
from .potentials import Potential

MANIFEST_VERSION = 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_POSINT = {"type": "integer", "minimum": 1}

POTENTIAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["zero", "quadratic", "linear", "polynomial"]},
        "coefficients": {"type": "array", "items": _NUM, "minItems": 1},
        "index": {"type": "integer", "minimum": 0},
        "scale": _NUM,
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["coef", "powers"],
                "properties": {"coef": _NUM,
                               "powers": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
            },
        },
    },
}

INTERACTION_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["none", "quadratic", "morse", "inverse_power"]},
        "strength": _NUM, "power": _POS,
        "c_rep": _NUM, "l_rep": _POS, "c_att": _NUM, "l_att": _POS,
    },
}

MANIFOLD_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name"],
    "properties": {
        "name": {"enum": sorted(geo.MANIFOLDS)},
        "ambient_dim": {"type": "integer", "minimum": 2},
        "radius": _POS,
        "axes": {"type": "array", "items": _POS, "minItems": 2},
    },
}

CHART_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name"],
    "properties": {
        "name": {"enum": sorted(ch.CHARTS) + ["spherical"]},
        "n": {"type": "integer", "minimum": 1},
        "radius": _POS,
    },
}

SWARM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["K"],
    "properties": {
        "K": _POSINT,
        "roosting": POTENTIAL_SCHEMA,
        "interaction": INTERACTION_SCHEMA,
        "r": _POS, "sigma": _NONNEG, "lambda": _NONNEG,
        "d": {"type": "integer", "minimum": 2},
        "form": {"enum": ["ambient", "planar"]},
        "smooth": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "sim"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": [k.value for k in ModelKind]},
                "lambda": _NONNEG, "sigma": _NONNEG, "r": _POS,
                "d": {"type": "integer", "minimum": 1},
                "potential": POTENTIAL_SCHEMA,
                "manifold": MANIFOLD_SCHEMA,
                "chart": CHART_SCHEMA,
                "swarm": SWARM_SCHEMA,
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dt", "steps"],
            "properties": {
                "dt": _POS, "steps": _POSINT, "stride": _POSINT,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "trajectories": _POSINT,
                "repair": {"enum": [r.value for r in Repair]},
                "repair_threshold": _POS,
                "scheme": {"enum": [s.value for s in Scheme]},
                "initial": {"type": "array", "items": _NUM, "minItems": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string", "minLength": 1},
                "formats": {"type": "array", "items": {"enum": ["csv", "jsonl"]}, "uniqueItems": True},
                "emit_plot_data": {"type": "boolean"},
                "unwrapped": {"type": "boolean"},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "weak_check": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "h": _POS, "n": _POSINT,
                        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                        "state": {"type": "array", "items": _NUM, "minItems": 1},
                        "control_variate": {"type": "boolean"},
                    },
                },
                "stationary_test": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "burn_in": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "bins": {"type": "object", "additionalProperties": _POSINT},
                        "tv_threshold": _POS,
                        "var_rtol": {"oneOf": [_POS, {"type": "null"}]},
                        "min_samples": _POSINT,
                    },
                },
                "conserved_monitor": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"max_residual": _POS, "invariant_tol": _POS},
                },
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["parameter", "values"],
            "properties": {
                "parameter": {"enum": ["sigma", "lambda", "r"]},
                "values": {"type": "array", "items": _NONNEG, "minItems": 1},
            },
        },
    },
}

DEFAULT_OUTPUT = {"directory": "output", "formats": ["csv"], "emit_plot_data": False, "unwrapped": False}
DEFAULT_SIM = {"stride": 1, "seed": 0, "trajectories": 1, "repair": Repair.EVERY_STEP.value,
               "repair_threshold": 1e-10}


def validate(doc: Any) -> None:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def load_document(path: str | Path) -> dict:
    """Read a config file or a manifest written by a previous run."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    if isinstance(doc, dict) and "manifest_version" in doc:
        doc = doc.get("config")
    validate(doc)
    return doc


def build_manifold(block: dict | None) -> geo.ImplicitManifold | None:
    if block is None:
        return None
    name = block["name"]
    if name == "sphere":
        return geo.sphere(block.get("ambient_dim", 3), block.get("radius", 1.0))
    if name == "cylinder":
        return geo.cylinder(block.get("radius", 1.0))
    if name == "ellipsoid":
        if "axes" not in block:
            raise ConfigError("ellipsoid needs axes")
        return geo.ellipsoid(block["axes"])
    if "ambient_dim" not in block:
        raise ConfigError(f"manifold {name!r} needs ambient_dim")
    return geo.MANIFOLDS[name](block["ambient_dim"])


def build_chart(block: dict | None) -> ch.Chart | None:
    if block is None:
        return None
    name = block["name"]
    if name == "spherical":
        return ch.spherical_chart(block.get("n", 2))
    if name == "cylinder":
        return ch.cylinder_chart(block.get("radius", 1.0))
    return ch.CHARTS[name]()


def build_swarm(block: dict | None) -> SwarmSpec | None:
    if block is None:
        return None
    roost = Potential.from_config(block["roosting"]) if "roosting" in block else Potential.zero()
    return SwarmSpec(
        K=block["K"], roosting=roost, interaction=Interaction.from_config(block.get("interaction")),
        r=block.get("r", 1.0), sigma=block.get("sigma", 1.0), d=block.get("d", 2),
        form=block.get("form", "ambient"), smooth=block.get("smooth", False), lam=block.get("lambda", 1.0),
    )


def build_spec(model: dict) -> ModelSpec:
    try:
        return ModelSpec(
            kind=ModelKind(model["kind"]),
            lam=model.get("lambda", 1.0),
            sigma=model.get("sigma", 1.0),
            r=model.get("r", 1.0),
            d=model.get("d", 2),
            potential=Potential.from_config(model.get("potential", {"kind": "zero"})),
            manifold=build_manifold(model.get("manifold")),
            chart=build_chart(model.get("chart")),
            swarm=build_swarm(model.get("swarm")),
        )
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"model block: {exc}") from None


def build_sim(sim: dict) -> SimConfig:
    s = {**DEFAULT_SIM, **sim}
    return SimConfig(dt=s["dt"], steps=s["steps"], stride=s["stride"], seed=s["seed"],
                     trajectories=s["trajectories"], repair=Repair(s["repair"]),
                     repair_threshold=s["repair_threshold"],
                     scheme=Scheme(s.get("scheme", Scheme.HEUN.value)))


@dataclass(frozen=True)
class Run:
    """One simulation of a (possibly swept) configuration."""

    label: str
    model: dict
    spec: ModelSpec


@dataclass(frozen=True)
class RunConfig:
    document: dict
    runs: tuple[Run, ...]
    sim: SimConfig
    output: dict
    analysis: dict

    @property
    def output_dir(self) -> Path:
        return Path(os.environ.get("OUTPUT_DIR") or self.output["directory"])


_SWEEP_KEYS = {"sigma": "sigma", "lambda": "lambda", "r": "r"}


def _label(value: float) -> str:
    return format(value, "g")


def parse(doc: dict) -> RunConfig:
    """Validate and build every object; raises ConfigError on any problem."""
    validate(doc)
    doc = copy.deepcopy(doc)
    models = []
    if "sweep" in doc:
        key = _SWEEP_KEYS[doc["sweep"]["parameter"]]
        for v in doc["sweep"]["values"]:
            models.append((f"{key}-{_label(v)}", {**doc["model"], key: v}))
    else:
        models.append(("", doc["model"]))
    runs = tuple(Run(label, m, build_spec(m)) for label, m in models)
    sim = build_sim(doc["sim"])
    analysis = doc.get("analysis", {})
    if "stationary_test" in analysis:
        from .analysis import stationary_law
        for run in runs:
            try:
                stationary_law(run.spec)
            except NoKnownStationary as exc:
                raise ConfigError(f"stationary_test requested: {exc}") from None
    return RunConfig(doc, runs, sim, {**DEFAULT_OUTPUT, **doc.get("output", {})}, analysis)


def load(path: str | Path) -> RunConfig:
    return parse(load_document(path))
