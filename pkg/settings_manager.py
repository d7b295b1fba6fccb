"""Operator settings (settings.ini): thread-safe, typed read access."""

import configparser
import os
from threading import Lock
from typing import Any, List, Optional

import config
from error_logger import log_info, log_warning, log_error


class SettingsManager:
    """Thread-safe settings.ini reader."""

    def __init__(self, settings_file: str = config.Files.SETTINGS_FILENAME):
        self.settings_file = settings_file
        self.config = configparser.ConfigParser()
        self._lock = Lock()
        self.load()

    def load(self) -> bool:
        """Load settings from file. A missing file is not an error."""
        with self._lock:
            try:
                if os.path.exists(self.settings_file):
                    self.config.read(self.settings_file)
                    log_info(f"Settings loaded from {self.settings_file}")
                return True
            except configparser.Error as e:
                log_error(f"Failed to load settings from {self.settings_file}", e)
                self.config = configparser.ConfigParser()
                return False

    def get(self, section: str, key: str, default: Any = None,
            value_type: type = str) -> Any:
        """Get setting value with type conversion and default support."""
        with self._lock:
            if not self.config.has_option(section, key):
                return default
            value = self.config.get(section, key)
            try:
                if value_type == bool:
                    return value.strip().lower() in ('true', '1', 'yes', 'on')
                if value_type == int:
                    return int(value)
                if value_type == float:
                    return float(value)
                return value
            except ValueError as e:
                log_warning(f"Error reading setting [{section}].{key}: {e}")
                return default

    def get_export_location(self) -> str:
        """Directory bench/report exports default to (current directory when unset)."""
        location = self.get('Export', 'default_save_location', default='')
        if location and os.path.isdir(location):
            return location
        return os.path.abspath('.')

    def get_export_formats(self) -> List[str]:
        """Bench export formats beyond CSV, e.g. ['excel', 'pdf']."""
        raw = self.get('Export', 'bench_formats', default='')
        return [part.strip().lower() for part in raw.split(',') if part.strip()]

    def get_default_min_score(self) -> float:
        return self.get('Pipeline', 'default_min_score',
                        default=config.Pipeline.DEFAULT_MIN_SCORE, value_type=float)


_settings_instance: Optional[SettingsManager] = None


def get_settings_manager(settings_file: str = config.Files.SETTINGS_FILENAME) -> SettingsManager:
    """Get singleton instance of SettingsManager."""
    global _settings_instance
    if _settings_instance is None:
        _settings_instance = SettingsManager(settings_file)
    return _settings_instance
