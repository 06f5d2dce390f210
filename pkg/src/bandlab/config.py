"""Experiment configuration: a single JSON object plus command-line overrides."""
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Tuple

from .errors import ConfigError

KINDS = ("sample", "decay", "fluctuations", "lemma21", "lemma22",
         "decomposition", "conjecture_scan", "selftest")

REQUIRED = ("M_list", "replicas", "master_seed")

# JSON key -> dataclass attribute, where they differ ("lambda" is a keyword).
_JSON_NAMES = {"lam": "lambda"}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    M_list: Tuple[int, ...]
    replicas: int
    master_seed: int
    N_list: Tuple[int, ...] = (8,)
    lam: float = 0.0
    epsilon: float = 0.25
    output_dir: str = "results"
    interval: Tuple[float, float] = (-0.2, 0.2)
    bootstrap: int = 1000
    cross_check: bool = False

    def to_json_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[_JSON_NAMES.get(f.name, f.name)] = value
        return out


def _int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", field=name)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", field=name)
    return value


def _float(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=name)
    return float(value)


def _int_list(value, name):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("expected a non-empty list of integers", field=name)
    return tuple(_int(v, name, minimum=1) for v in value)


def validate(cfg):
    """Type- and range-check a config; returns a normalized copy."""
    if cfg.kind not in KINDS:
        raise ConfigError(f"unknown kind {cfg.kind!r}; expected one of {', '.join(KINDS)}",
                          field="kind")
    M_list = _int_list(cfg.M_list, "M_list")
    N_list = _int_list(cfg.N_list, "N_list")
    replicas = _int(cfg.replicas, "replicas", minimum=1)
    seed = _int(cfg.master_seed, "master_seed", minimum=0)
    if seed >= 1 << 64:
        raise ConfigError("must fit in 64 bits", field="master_seed")
    lam = _float(cfg.lam, "lambda")
    epsilon = _float(cfg.epsilon, "epsilon")
    if not 0 < epsilon < 1:
        raise ConfigError(f"must lie in (0, 1), got {epsilon}", field="epsilon")
    if not abs(lam) < 1.0 / epsilon:
        raise ConfigError(f"|lambda| = {abs(lam)} violates |lambda| < 1/epsilon = {1 / epsilon:g}",
                          field="lambda")
    if not isinstance(cfg.interval, (list, tuple)) or len(cfg.interval) != 2:
        raise ConfigError("expected [lo, hi]", field="interval")
    lo, hi = (_float(v, "interval") for v in cfg.interval)
    if not lo < hi:
        raise ConfigError("need lo < hi", field="interval")
    bootstrap = _int(cfg.bootstrap, "bootstrap", minimum=1)
    if not isinstance(cfg.cross_check, bool):
        raise ConfigError("expected true or false", field="cross_check")
    if not isinstance(cfg.output_dir, str) or not cfg.output_dir:
        raise ConfigError("expected a non-empty path", field="output_dir")
    return replace(cfg, M_list=M_list, N_list=N_list, replicas=replicas, master_seed=seed,
                   lam=lam, epsilon=epsilon, interval=(lo, hi), bootstrap=bootstrap)


def config_from_dict(data, kind=None):
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    attr_of = {_JSON_NAMES.get(f.name, f.name): f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - set(attr_of))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", field=unknown[0])
    file_kind = data.get("kind")
    if kind is not None and file_kind is not None and file_kind != kind:
        raise ConfigError(f"config kind {file_kind!r} does not match subcommand {kind!r}",
                          field="kind")
    kwargs = {attr_of[k]: v for k, v in data.items()}
    kwargs["kind"] = kind if kind is not None else file_kind
    if kwargs["kind"] is None:
        raise ConfigError("missing required field", field="kind")
    for name in REQUIRED:
        if name not in kwargs:
            raise ConfigError("missing required field", field=name)
    return validate(ExperimentConfig(**kwargs))


def parse_config(path=None, kind=None, overrides=None):
    """Load a JSON config file, apply flag overrides, and validate.

    ``overrides`` maps JSON key names (``master_seed``, ``replicas``,
    ``output_dir``, ...) to values; ``None`` values are ignored.
    """
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})",
                              line=exc.lineno) from exc
    if overrides:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    return config_from_dict(data, kind=kind)


def write_config(cfg, path):
    Path(path).write_text(json.dumps(cfg.to_json_dict(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
    return Path(path)

