from .api import canonical_json, create_app
from .config import Config, config_from_dict, default_config, load_config, validate_config
from .engine import ChangeReport, Engine, EngineState

__all__ = [
    "canonical_json",
    "create_app",
    "Config",
    "config_from_dict",
    "default_config",
    "load_config",
    "validate_config",
    "ChangeReport",
    "Engine",
    "EngineState",
]
