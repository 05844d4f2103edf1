"""Run configuration: one YAML file per experiment, validated and completed with defaults."""

import copy
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

PRESETS = ("ou_1d", "phi4_1d", "phi4_2d_wick", "phi3_2d_nonlocal", "regime_phi4_delta")

_num = {"type": "number"}
_int = {"type": "integer"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "grid": {
            "type": "object", "additionalProperties": False, "required": ["dim", "n"],
            "properties": {
                "dim": {"enum": [1, 2]},
                "n": {"type": "integer", "minimum": 8},
                "laplacian": {"enum": ["spectral", "fd"]},
            },
        },
        "noise": {
            "type": "object", "additionalProperties": False,
            "properties": {"beta": {"type": "number", "maximum": 0}},
        },
        "nonlinearity": {
            "type": "object", "additionalProperties": False, "required": ["coeffs"],
            "properties": {
                "coeffs": {"type": "array", "items": _num, "maxItems": 13},
                "wick": {"type": "boolean"},
                "nonlocal": {
                    "type": "object", "additionalProperties": False, "required": ["terms"],
                    "properties": {
                        "ell": {"type": "integer", "minimum": 1},
                        "terms": {
                            "type": "array",
                            "items": {
                                "type": "array", "minItems": 2, "maxItems": 2,
                                "prefixItems": [_num, {"type": "array", "items": _int}],
                            },
                        },
                    },
                },
            },
        },
        "trajectory": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "burn_in": {"type": "number", "minimum": 0},
                "stride": {"type": "number", "exclusiveMinimum": 0},
                "chains": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "scheme": {"enum": ["direct", "dpd"]},
                "init": {"enum": ["zero", "gff"]},
            },
        },
        "diagnostics": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "phis": {
                    "type": "array",
                    "items": {
                        "type": "object", "additionalProperties": False, "required": ["k"],
                        "properties": {
                            "k": {"type": "array", "items": _int},
                            "kind": {"enum": ["cos", "sin"]},
                        },
                    },
                },
                "k_max": {"type": "integer", "minimum": 1},
                "n_batches": {"type": "integer", "minimum": 16},
                "alpha": {"type": "number"},
                "besov_ns": {"type": "array", "items": _int},
                "sigma2_override": {"type": ["number", "null"]},
            },
        },
        "oracle": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "chains": {"type": "integer", "minimum": 1},
                "thin": {"type": "integer", "minimum": 1},
                "warmup": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "regime": {
            "type": "object", "additionalProperties": False, "required": ["p", "d"],
            "properties": {
                "p": {"type": "integer", "minimum": 1},
                "d": {"enum": [1, 2, 3, 4]},
                "beta": {"type": ["number", "string"]},
                "rho": {"type": ["number", "string"]},
            },
        },
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json", "npz", "svg"]}},
            },
        },
    },
    "anyOf": [
        {"required": ["regime"]},
        {"required": ["grid", "nonlinearity"]},
    ],
}

DEFAULTS = {
    "grid": {"laplacian": "spectral"},
    "noise": {"beta": 0.0},
    "nonlinearity": {"wick": True},
    "trajectory": {"dt": 1e-3, "t_end": 20.0, "burn_in": 5.0, "stride": 0.1, "chains": 32,
                   "seed": 0, "scheme": "direct", "init": "gff"},
    "diagnostics": {"phis": [], "k_max": 4, "n_batches": 32, "alpha": -0.1,
                    "besov_ns": [32, 64, 128], "sigma2_override": None},
    "oracle": {"samples": 2000, "chains": 50, "thin": 1, "warmup": 2000, "seed": 1},
    "outputs": {"dir": "runs/out", "formats": ["csv", "json", "npz"]},
}


class ConfigError(ValueError):
    pass


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(raw):
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping, got " + type(raw).__name__)
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid configuration at {where}: {exc.message}") from None


def resolve(raw):
    """Validate ``raw`` and return the fully materialised configuration."""
    validate(raw)
    cfg = copy.deepcopy(raw)
    if "grid" in cfg:
        for key, val in DEFAULTS.items():
            cfg[key] = _merge(val, cfg.get(key, {}))
        if cfg["grid"]["n"] & (cfg["grid"]["n"] - 1):
            raise ConfigError("invalid configuration at grid/n: must be a power of two")
    return cfg


def set_path(cfg, dotted, value):
    """Override ``cfg['a']['b'] = value`` for ``dotted = 'a.b'``; value is parsed as YAML."""
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = _parse_value(value) if isinstance(value, str) else value
    return cfg


def _parse_value(text):
    val = yaml.safe_load(text)
    if isinstance(val, str):
        # YAML 1.1 reads "1e-4" (no dot) as a string
        try:
            return float(val)
        except ValueError:
            pass
    return val


def load_preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("sqtorus").joinpath("presets", name + ".yaml").read_text()
    return yaml.safe_load(text)


def load(path_or_preset, overrides=()):
    """Read a YAML file (or a preset name), apply ``key=value`` overrides, resolve."""
    src = str(path_or_preset)
    if src in PRESETS:
        raw = load_preset(src)
    else:
        path = Path(src)
        if not path.exists():
            raise ConfigError(f"config file not found: {src}")
        raw = yaml.safe_load(path.read_text())
    raw = {} if raw is None else raw
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        set_path(raw, key.strip(), val)
    return resolve(raw)
