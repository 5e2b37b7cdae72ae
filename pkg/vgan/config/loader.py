"""
Configuration Loader

Handles loading and merging of configuration files for vgan.
"""

import os
import toml
from pathlib import Path
from typing import Dict, Any, Optional, Tuple

from vgan.core.base import log
from vgan.core.errors import ConfigError


_PACKAGE_DIR = Path(__file__).resolve().parent

KNOWN_SECTIONS = ('paths', 'data', 'augment', 'model', 'schedule', 'loss', 'optimizer',
                  'training', 'generate', 'selftest', 'synthdata')


class ConfigLoader:
    """Handles configuration loading with TOML file fallback system"""

    def __init__(self):
        self._config_cache: Dict[Tuple[Optional[str], Optional[str]], Dict[str, Any]] = {}
        self._default_config_path = _PACKAGE_DIR / "default.toml"
        self._preset_dir = _PACKAGE_DIR
        self._user_config_paths = [
            "config/config.toml",          # Primary user config location
            "vgan.toml"                    # Single-file project layout
        ]

    def load_config(self, config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
                    preset: Optional[str] = None) -> Dict[str, Any]:
        """Load configuration with proper fallback hierarchy

        defaults -> preset -> user file (explicit path, $VGAN_CONFIG, config/config.toml) -> overrides
        """
        cache_key = (config_path, preset)
        if cache_key in self._config_cache:
            config = self._config_cache[cache_key]
        else:
            config = self._load_uncached(config_path, preset)
            self._config_cache[cache_key] = config

        if overrides:
            config = self._merge_configs(config, overrides)
        self._warn_unknown_sections(config)
        return config

    def _load_uncached(self, config_path: Optional[str], preset: Optional[str]) -> Dict[str, Any]:
        # Step 1: Always load defaults first
        config = self._load_config_file(str(self._default_config_path))
        if not config:
            raise ConfigError([f"cannot load default configuration from {self._default_config_path}"])

        # Step 2: Named preset (e.g. the full-scale run)
        if preset:
            preset_path = self._preset_dir / f"{preset}.toml"
            preset_config = self._load_config_file(str(preset_path))
            if not preset_config:
                raise ConfigError([f"unknown preset '{preset}' (no {preset_path.name})"])
            config = self._merge_configs(config, preset_config)
            log("CONFIG", f"Applied preset: {preset}")

        # Step 3: Override with user configuration if available
        user_config_path = None
        user_config: Dict[str, Any] = {}

        if config_path:
            if not os.path.exists(config_path):
                raise ConfigError([f"config file not found: {config_path}"])
            user_config = self._load_config_file(config_path)
            user_config_path = config_path
        else:
            candidates = [os.environ["VGAN_CONFIG"]] if os.environ.get("VGAN_CONFIG") else []
            for path in candidates + self._user_config_paths:
                if os.path.exists(path):
                    loaded_config = self._load_config_file(path)
                    if loaded_config:
                        user_config = loaded_config
                        user_config_path = path
                        break

        if user_config:
            config = self._merge_configs(config, user_config)
            log("CONFIG", f"Loaded defaults + user overrides from: {user_config_path}", "success")
        else:
            log("CONFIG", "Using default configuration (no user config found)", "warning")
        return config

    def _load_config_file(self, path: str) -> Dict[str, Any]:
        """Load configuration from a specific file"""
        try:
            with open(path, 'r') as f:
                return toml.load(f)
        except FileNotFoundError:
            return {}
        except toml.TomlDecodeError as e:
            raise ConfigError([f"{path}: invalid TOML: {e}"])
        except OSError as e:
            log("CONFIG", f"Error loading {path}: {e}", "error")
            return {}

    def _merge_configs(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively merge override config into base config"""
        result = base.copy()

        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                # Recursive merge for nested dictionaries
                result[key] = self._merge_configs(result[key], value)
            else:
                # Direct override for non-dict values or new keys
                result[key] = value

        return result

    def _warn_unknown_sections(self, config: Dict[str, Any]):
        for key, value in config.items():
            if isinstance(value, dict) and key not in KNOWN_SECTIONS:
                log("CONFIG", f"Warning: Unknown section '{key}' in configuration", "warning")

    def reload_config(self, config_path: Optional[str] = None):
        """Drop cached files and load again"""
        self._config_cache.clear()
        return self.load_config(config_path)


# Global config loader instance
_config_loader = ConfigLoader()

def get_config(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
               preset: Optional[str] = None) -> Dict[str, Any]:
    """Get the current configuration"""
    return _config_loader.load_config(config_path, overrides, preset)

def reload_config():
    """Reload configuration from file"""
    return _config_loader.reload_config()


def write_resolved_config(config: Dict[str, Any], directory: str) -> str:
    """Echo the merged configuration as resolved_config.toml beside a command's outputs"""
    target = Path(directory) / "resolved_config.toml"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(toml.dumps(config))
    return str(target)
