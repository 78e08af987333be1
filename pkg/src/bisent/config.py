"""Run configuration: key=value files merged with command-line overrides.

Unknown keys are rejected so typos never silently fall back to defaults.
"""

from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass
class RunConfig:
    direction: str = "src2tgt"
    hidden_size: int = 64
    emb_size: int = 32
    batch_size: int = 120
    max_updates: int = 5000
    lr: float = 1.0
    lr_decay: float = 0.9
    lr_decay_interval: int = 50_000
    lr_warmup_updates: int = 100_000
    seed: int = 1
    max_len: int = 60
    checkpoint_every: int = 0
    log_every: int = 100
    dtype: str = "f64"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
CONFIG_KEYS = frozenset(_FIELD_TYPES)


def parse_config_file(path):
    """Parse 'key = value' lines; '#' starts a comment, blanks are skipped."""
    raw = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            raw[key] = value.strip()
    return raw


def _convert(key, value):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int" or kind is int:
            return int(value)
        if kind == "float" or kind is float:
            return float(value)
        return str(value)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r} as {kind}") from None


def build_run_config(file_values=None, overrides=None):
    """Merge config-file values with overrides (overrides win).

    Both arguments map key -> string (file) or key -> typed/None (overrides).
    Unknown keys raise ConfigError before anything else runs.
    """
    merged = {}
    for source in (file_values or {}, ):
        unknown = sorted(set(source) - CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for key, value in source.items():
            merged[key] = _convert(key, value)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config override: {key}")
        merged[key] = _convert(key, str(value))
    return RunConfig(**merged)
