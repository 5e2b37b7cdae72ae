"""
vgan Configuration

TOML defaults, presets and user overrides, plus the typed RunConfig.
"""

from .loader import ConfigLoader, get_config, reload_config, write_resolved_config
from .run_config import RunConfig, load_run_config

__all__ = ["ConfigLoader", "get_config", "reload_config", "write_resolved_config",
           "RunConfig", "load_run_config"]
