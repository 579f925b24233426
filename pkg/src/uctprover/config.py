import dataclasses
import hashlib
import logging
import sys
from dataclasses import dataclass, field

import yaml

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_NAME = "uctprover.yml"

MODE_BARE = "bare"
MODE_UCT = "uct"
MODE_UCT_POLICY = "uct+policy"
MODE_UCT_VALUE = "uct+value"
MODE_UCT_POLICY_VALUE = "uct+policy+value"
MODES = (MODE_BARE, MODE_UCT, MODE_UCT_POLICY, MODE_UCT_VALUE, MODE_UCT_POLICY_VALUE)

SELECTION_UCT = "uct"
SELECTION_PUCT = "puct"
LEAF_GOALS = "goals"
LEAF_BINARY = "binary"
LEAF_CONSTANT = "constant"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _option(section, key, default, **kwargs):
    return field(default=default, metadata={"section": section, "key": key}, **kwargs)


@dataclass(frozen=True)
class RunConfig:
    """
    Every tunable of a run. Built from the nested YAML sections; each field records
    the section and key it is read from.
    """
    log_level: str = _option(("general", "logging"), "level", "INFO")
    timing: bool = _option(("general",), "timing", False)
    output: str = _option(("general",), "output", "experiments")

    mode: str = _option(("search",), "mode", MODE_UCT)
    budget: int = _option(("search",), "budget", 200000)
    playouts: int = _option(("search",), "playouts", 2000)
    exploration: float = _option(("search",), "exploration", 2.0)
    selection: str = _option(("search",), "selection", SELECTION_UCT)
    temperature: float = _option(("search",), "temperature", 2.5)
    goal_base: float = _option(("search",), "goal_base", 0.95)
    leaf_evaluation: str = _option(("search",), "leaf_evaluation", LEAF_GOALS)
    constant_value: float = _option(("search",), "constant_value", 0.5)
    playout_length: int = _option(("search",), "playout_length", 0)
    reuse_tree: bool = _option(("search",), "reuse_tree", True)
    discount: float = _option(("search",), "discount", 0.99)

    regularization: float = _option(("learning",), "regularization", 1.5)
    max_epochs: int = _option(("learning",), "max_epochs", 200)
    tolerance: float = _option(("learning",), "tolerance", 1e-8)
    window: int = _option(("learning",), "window", 0)

    seed: int = _option(("corpus",), "seed", 0)
    workers: int = _option(("corpus",), "workers", 1)
    test_fraction: float = _option(("corpus",), "test_fraction", 0.0)
    memory_limit_mb: int = _option(("corpus",), "memory_limit_mb", None)

    bridge_command: str = _option(("bridge",), "command", None)
    bridge_settings: dict = _option(("bridge",), "settings", None)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown search mode '{self.mode}' (expected one of {', '.join(MODES)})")
        if self.selection not in (SELECTION_UCT, SELECTION_PUCT):
            raise ConfigurationError(f"unknown selection formula '{self.selection}'")
        if self.leaf_evaluation not in (LEAF_GOALS, LEAF_BINARY, LEAF_CONSTANT):
            raise ConfigurationError(f"unknown leaf evaluation '{self.leaf_evaluation}'")
        if str(self.log_level).upper() not in LOG_LEVELS:
            raise ConfigurationError(f"unknown logging level '{self.log_level}'")
        if self.budget < 1 or self.playouts < 1:
            raise ConfigurationError("budget and playouts must be positive")
        if self.temperature <= 0:
            raise ConfigurationError("temperature must be positive")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigurationError("test_fraction must lie in [0, 1)")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if self.playout_length < 0 or self.window < 0:
            raise ConfigurationError("playout_length and window must not be negative")

    @property
    def uses_policy(self):
        return self.mode in (MODE_UCT_POLICY, MODE_UCT_POLICY_VALUE)

    @property
    def uses_value(self):
        return self.mode in (MODE_UCT_VALUE, MODE_UCT_POLICY_VALUE)

    @classmethod
    def from_mapping(cls, mapping):
        """
        Build a config from the nested YAML mapping.

        :raises ConfigurationError: On unknown sections or keys and on invalid values.
        """
        mapping = mapping or {}
        known = {}
        for spec in dataclasses.fields(cls):
            known[spec.metadata["section"] + (spec.metadata["key"],)] = spec.name
        values = {}

        def walk(node, prefix):
            if not isinstance(node, dict):
                raise ConfigurationError(f"section '{'.'.join(prefix)}' must be a mapping")
            for key, value in node.items():
                path = prefix + (str(key),)
                if path in known:
                    values[known[path]] = value
                elif isinstance(value, dict) and any(k[:len(path)] == path for k in known):
                    walk(value, path)
                else:
                    raise ConfigurationError(f"unknown configuration key '{'.'.join(path)}'")

        walk(mapping, ())
        return cls(**values)

    def to_mapping(self):
        mapping = {}
        for spec in dataclasses.fields(self):
            node = mapping
            for section in spec.metadata["section"]:
                node = node.setdefault(section, {})
            node[spec.metadata["key"]] = getattr(self, spec.name)
        return mapping

    def replace(self, **overrides):
        """Copy with the non-None overrides applied; CLI flags use this."""
        overrides = {key: value for key, value in overrides.items() if value is not None}
        unknown = set(overrides) - {spec.name for spec in dataclasses.fields(self)}
        if unknown:
            raise ConfigurationError(f"unknown configuration fields {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)

    def dump(self):
        return yaml.safe_dump(self.to_mapping(), sort_keys=True, default_flow_style=False)

    def digest(self):
        """First 12 hex digits of the SHA-1 of the canonical YAML dump."""
        return hashlib.sha1(self.dump().encode("utf-8")).hexdigest()[:12]


def load_config(path=None):
    """
    Read a YAML configuration file; without a path the defaults are returned.

    :raises ConfigurationError: When the file is missing or not valid YAML.
    """
    if path is None:
        return RunConfig()
    try:
        with open(path, "r") as file:
            return RunConfig.from_mapping(yaml.safe_load(file))
    except FileNotFoundError:
        raise ConfigurationError(f"configuration file not found at {path}") from None
    except yaml.YAMLError as e:
        raise ConfigurationError(f"error parsing configuration file {path}: {e}") from None


def configure_logging(config):
    level = str(config.log_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s - %(levelname)s - %(message)s",
                        stream=sys.stdout)
    created_logger = logging.getLogger("uctprover")
    created_logger.setLevel(getattr(logging, level, logging.INFO))
    created_logger.debug("Logging level set to %s", level)
    return created_logger
