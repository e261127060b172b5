"""Scenario configuration: JSON documents validated against a schema.

Errors carry the line of the offending entry so batch users can fix configs
without guessing.
"""

from __future__ import annotations

import copy
import json
import re
from pathlib import Path

import jsonschema

from .errors import InputError
from .families import NAMES as PROFILE_NAMES

ACTIONS = ("classify", "curvature", "verify", "chart", "solve", "identities")

_profile = {
    "type": "object",
    "oneOf": [
        {"required": ["name"]},
        {"required": ["csv"]},
        {"required": ["derivative"]},
    ],
    "properties": {
        "name": {"enum": list(PROFILE_NAMES)},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "csv": {"type": "string"},
        "derivative": {"$ref": "#/$defs/profile"},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "$defs": {"profile": _profile},
    "required": ["n", "actions"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 3},
        "fiber": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["round_sphere", "flat", "constant"]},
                "R_sigma": {"type": "number"},
            },
        },
        "grid": {
            "type": "object",
            "required": ["r_min", "r_max"],
            "additionalProperties": False,
            "properties": {
                "r_min": {"type": "number"},
                "r_max": {"type": "number"},
                "nodes": {"type": "integer", "minimum": 16},
                "spacing": {"enum": ["uniform", "chebyshev"]},
            },
        },
        "order": {"enum": [2, 4, 6]},
        "warp": {"$ref": "#/$defs/profile"},
        "potential": {"$ref": "#/$defs/profile"},
        "soliton": {
            "type": "object",
            "required": ["type"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["conformal", "yamabe", "k_yamabe", "generalized"]},
                "lambda": {"type": "number"},
                "k": {"type": "integer", "minimum": 1},
                "psi": {"enum": ["log", "linear"]},
            },
        },
        "solve": {
            "type": "object",
            "required": ["family"],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["yamabe", "k_yamabe", "generalized"]},
                "lambda": {"type": "number"},
                "k": {"type": "integer", "minimum": 1},
                "psi": {"enum": ["log", "linear"]},
                "start": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["smooth_origin", "cylinder"]},
                        "w0": {"type": "number", "exclusiveMinimum": 0},
                        "a0": {"type": "number"},
                    },
                },
                "span": {"type": "number", "exclusiveMinimum": 0},
                "samples": {"type": "integer", "minimum": 16},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "ks": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "actions": {"type": "array", "items": {"enum": list(ACTIONS)}, "minItems": 1, "uniqueItems": True},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "output": {"type": "string"},
        "plots": {"type": "boolean"},
        "sweep": {
            "type": "object",
            "required": ["parameter", "values"],
            "additionalProperties": False,
            "properties": {
                "parameter": {"type": "string", "pattern": r"^[A-Za-z_]+(\.[A-Za-z_0-9]+)*$"},
                "values": {"type": "array", "minItems": 1},
            },
        },
    },
}


def _line_of(text: str, path) -> int:
    """Best-effort line number of the JSON entry at ``path``."""
    pos = 0
    for key in path:
        if isinstance(key, str):
            m = re.compile(r'"' + re.escape(key) + r'"\s*:').search(text, pos)
            if m is None:
                break
            pos = m.start()
    return text.count("\n", 0, pos) + 1


def _error_message(text: str, err: jsonschema.ValidationError, source: str) -> str:
    path = list(err.absolute_path)
    where = "/".join(str(p) for p in path) or "<root>"
    locate = path
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = err.schema.get("properties", {})
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            locate = path + extra[:1]
    return f"{source}:{_line_of(text, locate)}: {where}: {err.message}"


def parse_config(text: str, source: str = "<config>") -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    return validate(cfg, text, source)


def validate(cfg: dict, text: str = "", source: str = "<config>") -> dict:
    """Schema and cross-field checks; ``text`` (the raw JSON) locates errors by line."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(list(e.absolute_path)), e.message))
    if errors:
        raise InputError(_error_message(text, errors[0], source))
    _semantic_checks(cfg, text, source)
    return cfg


def _semantic_checks(cfg: dict, text: str, source: str) -> None:
    def fail(path, msg):
        raise InputError(f"{source}:{_line_of(text, path)}: {'/'.join(map(str, path))}: {msg}")

    actions = set(cfg["actions"])
    if actions - {"solve"} and "solve" not in actions and "warp" not in cfg:
        fail(["actions"], "actions other than solve need a warp profile")
    if "warp" in cfg and "csv" not in cfg["warp"] and "grid" not in cfg:
        fail(["warp"], "analytic profiles need a grid")
    if "solve" in actions and "solve" not in cfg:
        fail(["actions"], "action solve needs a solve section")
    if "grid" in cfg and not cfg["grid"]["r_max"] > cfg["grid"]["r_min"]:
        fail(["grid", "r_max"], "r_max must exceed r_min")
    for k in cfg.get("ks", []):
        if k > cfg["n"]:
            fail(["ks"], f"k={k} exceeds n={cfg['n']}")
    fib = cfg.get("fiber", {})
    if fib.get("kind") == "constant" and "R_sigma" not in fib:
        fail(["fiber"], "constant fiber needs R_sigma")


def load_config(path) -> tuple[dict, str]:
    """Validated config and its raw text."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    text = path.read_text()
    cfg = parse_config(text, str(path))
    return cfg, text


def set_dotted(cfg: dict, dotted: str, value) -> dict:
    """Copy of ``cfg`` with the entry at ``a.b.c`` replaced by ``value``."""
    out = copy.deepcopy(cfg)
    node = out
    keys = dotted.split(".")
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise InputError(f"sweep parameter {dotted!r} does not address a config entry")
    node[keys[-1]] = value
    return out
