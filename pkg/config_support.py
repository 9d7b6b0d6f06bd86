"""
Run configuration: defaults, config-file loading (YAML / TOML), schema validation
and the reproducibility hash embedded into every artifact.
"""

import hashlib
import json
import math
from dataclasses import dataclass, asdict, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional

import toml
import yaml

from errors_support import ConfigError

VERSION = "1.0.0"

# Published schema for RunConfig; `netrecon.py schema` prints it.
RUN_CONFIG_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "RunConfig",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "n": {"type": "integer", "minimum": 2, "maximum": 10000},
        "q": {"type": "integer", "minimum": 0},
        "edges": {"type": ["integer", "null"], "minimum": 0},
        "clique_size_min": {"type": "integer", "minimum": 2},
        "clique_size_max": {"type": "integer", "minimum": 2},
        "separated_latents": {"type": "boolean"},
        "poly": {"type": ["string", "null"], "enum": ["parity", "listed", None]},
        "m": {"type": "integer", "minimum": 1},
        "p": {"type": "integer", "minimum": 0},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "require_sufficient_condition": {"type": "boolean"},
        "require_recovery": {"type": "boolean"},
        "max_retries": {"type": "integer", "minimum": 1},
        "grid_size": {"type": "integer", "minimum": 8},
        "omega": {"type": "string"},
        "eps": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
        "mode": {"type": "string", "enum": ["analytic", "data"]},
        "samples": {"type": "integer", "minimum": 16},
        "segment_length": {"type": "integer", "minimum": 8},
        "overlap": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "window": {"type": "string", "enum": ["hann", "hamming", "boxcar", "blackman"]},
        "burn_in": {"type": "integer", "minimum": 0},
        "cond_limit": {"type": "number", "exclusiveMinimum": 1},
        "tau_edge": {"type": ["number", "null"], "minimum": 0},
        "tau_supp": {"type": "number", "minimum": 0},
        "tau_rank": {"type": "number", "minimum": 0},
        "tau_group": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "tau_zero": {"type": "number", "exclusiveMinimum": 0},
        "min_zero_run": {"type": "integer", "minimum": 1},
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "rho_growth": {"type": "number", "minimum": 1},
        "mu_max_ratio": {"type": "number", "minimum": 1},
        "max_iters": {"type": "integer", "minimum": 1},
        "primal_tol": {"type": "number", "exclusiveMinimum": 0},
        "dual_tol": {"type": "number", "exclusiveMinimum": 0},
        "rank_tol": {"type": "number", "exclusiveMinimum": 0},
        "gap_tol": {"type": "number", "exclusiveMinimum": 0},
        "threads": {"type": ["integer", "null"], "minimum": 1},
        "seeds": {"type": "integer", "minimum": 1},
        "model": {"type": ["string", "null"]},
        "out_dir": {"type": "string"},
        "output": {"type": ["string", "null"]},
    },
}

# Fields that never change numerical results and stay out of the hash.
_UNHASHED = {'out_dir', 'output', 'threads', 'model'}


@dataclass
class RunConfig:
    """All parameters of every command, with the declared defaults"""
    seed: int = 7
    n: int = 29
    q: int = 3
    edges: Optional[int] = None
    clique_size_min: int = 3
    clique_size_max: int = 4
    separated_latents: bool = False
    poly: Optional[str] = None
    m: int = 2
    p: int = 3
    sigma: float = 1.0
    require_sufficient_condition: bool = False
    require_recovery: bool = True
    max_retries: int = 50
    grid_size: int = 512
    omega: str = "3/8"
    eps: float = 0.01
    mode: str = "analytic"
    samples: int = 1_000_000
    segment_length: int = 4096
    overlap: float = 0.5
    window: str = "hann"
    burn_in: int = 1000
    cond_limit: float = 1e8
    tau_edge: Optional[float] = None
    tau_supp: float = 1e-6
    tau_rank: float = 1e-6
    tau_group: float = 1e-3
    tau_zero: float = 1e-3
    min_zero_run: int = 2
    rho: float = 1.25
    rho_growth: float = 1.2
    mu_max_ratio: float = 1e7
    max_iters: int = 3000
    primal_tol: float = 1e-7
    dual_tol: float = 1e-6
    rank_tol: float = 1e-8
    gap_tol: float = 1e-4
    threads: Optional[int] = None
    seeds: int = 20
    model: Optional[str] = None
    out_dir: str = "netrecon-output"
    output: Optional[str] = None

    def validate(self) -> 'RunConfig':
        data = asdict(self)
        for name, rule in RUN_CONFIG_SCHEMA['properties'].items():
            _check_field(name, data[name], rule)
        if self.clique_size_min > self.clique_size_max:
            raise ConfigError("clique_size_min exceeds clique_size_max",
                              clique_size_min=self.clique_size_min, clique_size_max=self.clique_size_max)
        if self.segment_length & (self.segment_length - 1):
            raise ConfigError("segment_length must be a power of two", segment_length=self.segment_length)
        steps = 1.0 / self.eps
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError("1/eps must be an integer", eps=self.eps)
        parse_omega(self.omega)
        return self

    @property
    def omega_value(self) -> float:
        return parse_omega(self.omega)

    @property
    def edge_threshold(self) -> float:
        if self.tau_edge is not None:
            return self.tau_edge
        return 1e-6 if self.mode == 'analytic' else 0.05

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        payload = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def metadata(self) -> Dict[str, Any]:
        return {'seed': self.seed, 'config_hash': self.config_hash(), 'version': VERSION}

    def updated(self, **overrides: Any) -> 'RunConfig':
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError("unknown configuration keys", keys=sorted(unknown))
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(**data)


def _check_field(name: str, value: Any, rule: Dict[str, Any]) -> None:
    allowed = rule['type'] if isinstance(rule['type'], list) else [rule['type']]
    if value is None:
        if 'null' not in allowed:
            raise ConfigError(f"'{name}' must not be null", field=name)
        return
    type_ok = False
    for kind in allowed:
        if kind == 'integer' and isinstance(value, int) and not isinstance(value, bool):
            type_ok = True
        elif kind == 'number' and isinstance(value, (int, float)) and not isinstance(value, bool):
            type_ok = True
        elif kind == 'boolean' and isinstance(value, bool):
            type_ok = True
        elif kind == 'string' and isinstance(value, str):
            type_ok = True
    if not type_ok:
        raise ConfigError(f"'{name}' has the wrong type", field=name, value=value, expected=allowed)
    if 'enum' in rule and value not in rule['enum']:
        raise ConfigError(f"'{name}' must be one of {rule['enum']}", field=name, value=value)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(f"'{name}' must be finite", field=name)
        if 'minimum' in rule and value < rule['minimum']:
            raise ConfigError(f"'{name}' below minimum {rule['minimum']}", field=name, value=value)
        if 'maximum' in rule and value > rule['maximum']:
            raise ConfigError(f"'{name}' above maximum {rule['maximum']}", field=name, value=value)
        if 'exclusiveMinimum' in rule and value <= rule['exclusiveMinimum']:
            raise ConfigError(f"'{name}' must exceed {rule['exclusiveMinimum']}", field=name, value=value)
        if 'exclusiveMaximum' in rule and value >= rule['exclusiveMaximum']:
            raise ConfigError(f"'{name}' must stay below {rule['exclusiveMaximum']}", field=name, value=value)


def parse_omega(text: str) -> float:
    """Parse a frequency given as a rational multiple of pi ("3/8" -> 3*pi/8)"""
    try:
        ratio = Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError("frequency must be a rational multiple of pi such as '3/8'", omega=text) from exc
    if not (-1 < ratio <= 1):
        raise ConfigError("frequency multiple of pi must lie in (-1, 1]", omega=text)
    return float(ratio) * math.pi


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read overrides from a YAML or TOML file"""
    path = Path(path)
    if not path.exists():
        raise ConfigError("config file does not exist", path=str(path))
    text = path.read_text(encoding='utf-8')
    try:
        if path.suffix in ('.yaml', '.yml'):
            data = yaml.safe_load(text) or {}
        elif path.suffix == '.toml':
            data = toml.loads(text)
        else:
            raise ConfigError("config file must be .yaml, .yml or .toml", path=str(path))
    except (yaml.YAMLError, toml.TomlDecodeError) as exc:
        raise ConfigError("config file could not be parsed", path=str(path), reason=str(exc)) from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping", path=str(path))
    return data


def build_config(file_path: Optional[str] = None, **cli_overrides: Any) -> RunConfig:
    """Defaults -> config file -> command-line flags, then validate"""
    config = RunConfig()
    if file_path:
        config = config.updated(**load_config_file(Path(file_path)))
    return config.updated(**cli_overrides).validate()
