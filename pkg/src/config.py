"""
Scenario configuration.

A scenario is a YAML file under configs/ (or any path) whose keys mirror
ScenarioConfig. Builtin names `scenario1`..`scenario5` and `ow` resolve to
the checked-in files. Command-line flags override file values.
"""

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml

from src.agent import DeciderConfig, parse_decider_name
from src.errors import ConfigError
from src.llm.client import LlmClientConfig
from src.llm.prompts import DEFAULT_SCENARIO_TEXT
from src.network import OD

PROJECT_ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = PROJECT_ROOT / "configs"
BUILTIN_SCENARIOS = ("scenario1", "scenario2", "scenario3", "scenario4", "scenario5", "ow")

# Keys that may differ when resuming an interrupted run
RESUMABLE_KEYS = ("days", "jobs")


@dataclass(frozen=True)
class Demand:
    origin: str
    destination: str
    travelers: int

    def __post_init__(self):
        if not isinstance(self.travelers, int) or self.travelers < 0:
            raise ConfigError(f"Demand {self.origin}->{self.destination}: travelers must be a non-negative integer")
        if self.origin == self.destination:
            raise ConfigError(f"Demand origin and destination coincide ({self.origin})")

    @property
    def od(self) -> OD:
        return (self.origin, self.destination)


@dataclass(frozen=True)
class BonusConfig:
    enabled: bool = False
    rate: float = 0.02
    reference_time: float = 40.0
    currency: str = "RMB"

    def __post_init__(self):
        if self.rate < 0 or self.reference_time < 0:
            raise ConfigError("bonus rate and reference_time must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    network: str
    demands: Tuple[Demand, ...]
    travelers_per_agent: int = 1
    k_routes: int = 2
    days: int = 100
    runs: int = 3
    seed: int = 0
    selfish: bool = False
    scenario_text: str = DEFAULT_SCENARIO_TEXT
    jobs: int = 1
    due_reference: Optional[float] = None
    decider: DeciderConfig = field(default_factory=DeciderConfig)
    bonus: BonusConfig = field(default_factory=BonusConfig)
    llm: LlmClientConfig = field(default_factory=LlmClientConfig)

    def __post_init__(self):
        if not self.name:
            raise ConfigError("name must not be empty")
        if not self.demands:
            raise ConfigError("at least one demand is required")
        ods = [d.od for d in self.demands]
        if len(set(ods)) != len(ods):
            raise ConfigError("each OD pair may appear only once in demands")
        for key in ("travelers_per_agent", "k_routes", "days", "runs", "jobs"):
            value = getattr(self, key)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{key} must be a positive integer, got {value!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")

    @property
    def demand_map(self) -> Dict[OD, int]:
        return {d.od: d.travelers for d in self.demands}

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["demands"] = [asdict(d) for d in self.demands]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping of keys to values")
        data = dict(data)
        _reject_unknown(cls, data, "config")

        try:
            demands = tuple(
                Demand(str(d["origin"]), str(d["destination"]), d["travelers"]) for d in data.pop("demands", ())
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"each demand needs origin, destination and travelers ({e})") from None

        nested = {}
        for key, nested_cls in (("decider", DeciderConfig), ("bonus", BonusConfig), ("llm", LlmClientConfig)):
            section = data.pop(key, None) or {}
            if not isinstance(section, dict):
                raise ConfigError(f"'{key}' must be a mapping")
            _reject_unknown(nested_cls, section, key)
            nested[key] = nested_cls(**section)

        try:
            return cls(demands=demands, **nested, **data)
        except TypeError as e:
            raise ConfigError(str(e)) from None


def _reject_unknown(cls, data: Dict[str, Any], section: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown {section} keys: {', '.join(unknown)}")


def resolve_config_path(source: Union[str, Path]) -> Path:
    if str(source) in BUILTIN_SCENARIOS:
        return CONFIG_DIR / f"{source}.yaml"
    return Path(source)


def load_config(source: Union[str, Path]) -> ScenarioConfig:
    """Load a scenario from a YAML path or a builtin scenario name."""
    path = resolve_config_path(source)
    if not path.exists():
        raise ConfigError(f"File not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML ({e})") from None
    return ScenarioConfig.from_dict(data or {})


def dump_config(config: ScenarioConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=False), encoding="utf-8")


def apply_overrides(
    config: ScenarioConfig,
    seed: Optional[int] = None,
    days: Optional[int] = None,
    runs: Optional[int] = None,
    decider: Optional[str] = None,
    jobs: Optional[int] = None,
    travelers_per_agent: Optional[int] = None,
    model: Optional[str] = None,
) -> ScenarioConfig:
    """Return a copy of `config` with every non-None flag applied."""
    changes: Dict[str, Any] = {
        key: value
        for key, value in (
            ("seed", seed),
            ("days", days),
            ("runs", runs),
            ("jobs", jobs),
            ("travelers_per_agent", travelers_per_agent),
        )
        if value is not None
    }
    if decider is not None:
        changes["decider"] = replace(config.decider, **parse_decider_name(decider))
    if model is not None:
        changes["llm"] = replace(config.llm, model_name=model)
    return replace(config, **changes)


def snapshot_matches(existing: Dict[str, Any], config: ScenarioConfig) -> bool:
    """True when an existing run snapshot differs from `config` only in resumable keys."""
    current = config.to_dict()
    strip = lambda d: {k: v for k, v in d.items() if k not in RESUMABLE_KEYS}
    return strip(existing) == strip(current)
