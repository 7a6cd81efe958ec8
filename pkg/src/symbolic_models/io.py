"""Config loading, JSON schemas and canonical JSON output."""

from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from . import expr as ex
from .errors import ConfigError, SymbolicModelError
from .lattice import AbstractionParams
from .sysmodel import (
    ControlSystem,
    KinfGain,
    KLGain,
    LyapunovCertificate,
    StabilityCertificate,
    linear_gains,
)

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_box = {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}, "minItems": 1}
_kinf = {
    "type": "object",
    "properties": {"k": {"type": "number", "minimum": 0}, "p": _pos},
    "required": ["k"],
    "additionalProperties": False,
}
_idx = {"type": "integer", "minimum": 0}
_vec = {"type": "array", "items": _num}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "system": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "f": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "U": _box,
                "X": _box,
            },
            "required": ["f", "U", "X"],
            "additionalProperties": False,
        },
        "certificate": {
            "type": "object",
            "properties": {
                "beta": {
                    "type": "object",
                    "properties": {"c": _pos, "lambda": _pos, "p": _pos},
                    "required": ["c", "lambda"],
                    "additionalProperties": False,
                },
                "gamma": _kinf,
                "linear": {
                    "type": "object",
                    "properties": {
                        "A": {"type": "array", "items": _vec},
                        "B": {"type": "array", "items": _vec},
                        "s_max": _pos,
                        "samples": {"type": "integer", "minimum": 2},
                    },
                    "required": ["A", "B"],
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "params": {
            "type": "object",
            "properties": {
                "eps": _pos,
                "tau": _pos,
                "eta": {"type": "number", "minimum": 0},
                "mu": {"type": "number", "minimum": 0},
                "nu": {"type": "number", "minimum": 0},
                "steps": {"type": "integer", "minimum": 1},
            },
            "required": ["eps", "tau", "eta", "mu"],
            "additionalProperties": False,
        },
        "spec": {
            "type": "object",
            "properties": {
                "legs": {"type": "array", "items": {"type": "array", "items": _idx, "minItems": 1}, "minItems": 1},
                "safe": {"type": "array", "items": _idx},
                "start": _idx,
            },
            "required": ["legs"],
            "additionalProperties": False,
        },
        "sim": {
            "type": "object",
            "properties": {
                "x0": _vec,
                "substeps": {"type": "integer", "minimum": 1},
                "inputs": {"type": "array", "items": _vec},
                "waypoints": {"type": "array", "items": _idx},
                "start": _idx,
                "feedback": {"type": "boolean"},
            },
            "required": ["x0"],
            "additionalProperties": False,
        },
        "lyapunov": {
            "type": "object",
            "properties": {
                "V": {"type": "string"},
                "alpha1": _kinf,
                "alpha2": _kinf,
                "rho": _kinf,
                "sigma": _kinf,
                "norm2": {"type": "boolean"},
                "density": {"type": "integer", "minimum": 2},
            },
            "required": ["V", "alpha1", "alpha2", "rho"],
            "additionalProperties": False,
        },
    },
    "required": ["system"],
    "additionalProperties": False,
}

TS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "format": {"const": "transition-system"},
        "version": {"const": 1},
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 1},
        "outputs": {"type": "array", "items": _vec},
        "labels": {"type": "array", "items": _vec},
        "transitions": {"type": "array", "items": {"type": "array", "items": _idx, "minItems": 3, "maxItems": 3}},
        "meta": {"type": "object"},
    },
    "required": ["format", "version", "n", "m", "outputs", "labels", "transitions"],
    "additionalProperties": False,
}

RELATION_SCHEMA = {
    "type": "object",
    "properties": {
        "eps": {"type": "number", "minimum": 0},
        "pairs": {"type": "array", "items": {"type": "array", "items": _idx, "minItems": 2, "maxItems": 2}},
    },
    "required": ["eps", "pairs"],
}

_leg = {
    "type": "object",
    "properties": {
        "target": {"type": "array", "items": _idx},
        "winning": {"type": "array", "items": _idx},
        "policy": {"type": "object", "patternProperties": {"^[0-9]+$": _idx}, "additionalProperties": False},
        "rank": {"type": "object", "patternProperties": {"^[0-9]+$": _idx}, "additionalProperties": False},
    },
    "required": ["target", "winning", "policy"],
}
CONTROLLER_SCHEMA = {
    "type": "object",
    "properties": {"legs": {"type": "array", "items": _leg}},
    "required": ["legs"],
}

PLAN_SCHEMA = {
    "type": "object",
    "properties": {
        "start": _idx,
        "labels": {"type": "array", "items": _idx},
        "waypoints": {"type": "array", "items": _idx},
        "inputs": {"type": "array", "items": _vec},
        "leg_ends": {"type": "array", "items": _idx},
    },
    "required": ["start", "labels", "waypoints", "inputs"],
}

TUBE_SCHEMA = {
    "type": "object",
    "properties": {
        "eps": _pos,
        "passed": {"type": "boolean"},
        "distances": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "waypoints": {"type": "array", "items": _idx},
        "violations": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    },
    "required": ["eps", "passed", "distances", "waypoints", "violations"],
}


def validate(doc, schema, what="document"):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path)
        raise ConfigError(f"{what} invalid at '{path}': {err.message}") from None


# --- canonical JSON ------------------------------------------------------------


def _enc(obj, out):
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"non-finite float {v} cannot be written as JSON")
        s = "%.17g" % v
        if not any(ch in s for ch in ".en"):
            s += ".0"
        out.append(s)
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for i, k in enumerate(sorted(obj, key=str)):
            if i:
                out.append(",")
            out.append(json.dumps(str(k), ensure_ascii=False))
            out.append(":")
            _enc(obj[k], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _enc(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, no whitespace, floats with 17 significant digits."""
    out = []
    _enc(obj, out)
    return "".join(out) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from None


# --- config ----------------------------------------------------------------------


class Config:
    """Parsed run configuration; blocks are materialized on demand."""

    def __init__(self, doc: dict):
        validate(doc, CONFIG_SCHEMA, "config")
        self.doc = doc
        try:
            self.system = self._system(doc["system"])
        except SymbolicModelError as err:
            raise ConfigError(f"system block: {err}") from err

    @classmethod
    def load(cls, path):
        return cls(read_json(path))

    def _require(self, block):
        if block not in self.doc:
            raise ConfigError(f"config has no '{block}' block")
        return self.doc[block]

    @staticmethod
    def _system(d):
        sys = ControlSystem.from_strings(d["f"], d["U"], d["X"])
        if d.get("n", sys.n) != sys.n or d.get("m", sys.m) != sys.m:
            raise ConfigError("declared n/m disagree with the boxes")
        return sys

    @property
    def certificate(self) -> StabilityCertificate:
        d = self._require("certificate")
        if "linear" in d:
            lin = d["linear"]
            return linear_gains(lin["A"], lin["B"], lin.get("s_max", 20.0), lin.get("samples", 2001))
        if "beta" not in d:
            raise ConfigError("certificate needs 'beta' or 'linear'")
        b = d["beta"]
        beta = KLGain(b["c"], b["lambda"], b.get("p", 1.0))
        gamma = KinfGain(d["gamma"]["k"], d["gamma"].get("p", 1.0)) if "gamma" in d else None
        return StabilityCertificate(beta, gamma)

    @property
    def params(self) -> AbstractionParams:
        d = self._require("params")
        try:
            return AbstractionParams(d["tau"], d["eta"], d["mu"], d["eps"], d.get("nu", 0.0))
        except SymbolicModelError as err:
            raise ConfigError(f"params block: {err}") from err

    @property
    def steps(self) -> int:
        return self.doc.get("params", {}).get("steps", 100)

    @property
    def spec(self) -> dict:
        return self._require("spec")

    @property
    def sim(self) -> dict:
        return self._require("sim")

    @property
    def lyapunov(self) -> tuple[LyapunovCertificate, int]:
        d = self._require("lyapunov")
        V = ex.bind(ex.parse(d["V"]), self.system.n, self.system.m)

        def g(key):
            return KinfGain(d[key]["k"], d[key].get("p", 1.0)) if key in d else None

        cert = LyapunovCertificate(V, g("alpha1"), g("alpha2"), g("rho"), g("sigma"), d.get("norm2", False))
        return cert, d.get("density", 9)
