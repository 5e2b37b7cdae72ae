"""
Base Component Class

Provides the timestamped, coloured console logging shared by every long-lived
vgan object, plus a tagged logger for free functions.
"""

from abc import ABC
from datetime import datetime
from typing import Dict, Any, Optional
from termcolor import colored


_LEVELS = {"quiet": 0, "normal": 1, "debug": 2}
_verbosity = _LEVELS["normal"]

_COLOR_MAP = {
    "info": "white",
    "debug": "cyan",
    "warning": "yellow",
    "error": "red",
    "success": "green"
}


def set_verbosity(level: str):
    """Set process-wide verbosity: quiet, normal or debug"""
    global _verbosity
    if level not in _LEVELS:
        raise ValueError(f"Unknown verbosity '{level}' (expected one of {sorted(_LEVELS)})")
    _verbosity = _LEVELS[level]


def get_verbosity() -> str:
    """Get the current verbosity name"""
    for name, value in _LEVELS.items():
        if value == _verbosity:
            return name
    return "normal"


def _should_print(level: str) -> bool:
    if level == "error":
        return True
    if level == "debug":
        return _verbosity >= _LEVELS["debug"]
    return _verbosity >= _LEVELS["normal"]


def log(tag: str, message: str, level: str = "info"):
    """Log a tagged message from module-level code, e.g. [VOLIO] ..."""
    if not _should_print(level):
        return
    print(colored(f"[{tag}] {message}", _COLOR_MAP.get(level, "white")))


class Component(ABC):
    """Abstract base class for vgan pipeline components"""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.config = config if config is not None else {}
        self.component_name = self.__class__.__name__

    def _timestamp(self) -> str:
        """Get current timestamp string"""
        return datetime.now().strftime("%H:%M:%S")

    def _log(self, message: str, level: str = "info"):
        """Log a message with timestamp and component name"""
        if not _should_print(level):
            return
        color = _COLOR_MAP.get(level, "white")
        formatted_message = f"[{self._timestamp()}] {self.component_name}: {message}"
        print(colored(formatted_message, color))

    def _log_debug(self, message: str):
        """Log a debug message"""
        self._log(f"[DEBUG] {message}", "debug")

    def _log_warning(self, message: str):
        """Log a warning message"""
        self._log(f"[WARNING] {message}", "warning")

    def _log_error(self, message: str):
        """Log an error message"""
        self._log(f"[ERROR] {message}", "error")

    def _log_success(self, message: str):
        """Log a success message"""
        self._log(message, "success")

    def get_status(self) -> Dict[str, Any]:
        """Get current component status"""
        return {
            'name': self.component_name,
            'timestamp': datetime.now().isoformat()
        }
