#!/usr/bin/env python3
"""
Error logging system for SheetLoc
"""

import logging
import os

import config


class ErrorLogger:
    """Centralized logging for SheetLoc"""

    def __init__(self, log_file=config.Files.LOG_FILENAME):
        self.log_file = log_file
        self.setup_logger()

    def _load_logging_settings(self):
        """
        Load log level and file-logging switch from settings.ini.

        The SHEETLOC_LOG_LEVEL environment variable wins over settings.ini.

        Returns:
            (logging level, log_to_file flag)
        """
        level = logging.INFO
        log_to_file = False
        try:
            import configparser
            parser = configparser.ConfigParser()
            if os.path.exists(config.Files.SETTINGS_FILENAME):
                parser.read(config.Files.SETTINGS_FILENAME)
                if parser.getboolean('Logging', 'debug_mode', fallback=False):
                    level = logging.DEBUG
                log_to_file = parser.getboolean('Logging', 'log_to_file', fallback=False)
        except Exception:
            pass

        env_level = os.environ.get(config.App.LOG_LEVEL_ENV, "").strip().upper()
        if env_level:
            level = getattr(logging, env_level, level)

        return level, log_to_file

    def setup_logger(self):
        """Setup the logging configuration"""
        log_level, log_to_file = self._load_logging_settings()

        self.logger = logging.getLogger(config.App.NAME)
        self.logger.setLevel(log_level)
        self.logger.propagate = False

        if not self.logger.handlers:
            formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')
            stream = logging.StreamHandler()
            stream.setFormatter(formatter)
            self.logger.addHandler(stream)

            if log_to_file:
                os.makedirs(config.Files.LOG_DIR, exist_ok=True)
                log_path = os.path.join(config.Files.LOG_DIR, self.log_file)
                file_handler = logging.FileHandler(log_path, mode='a', encoding='utf-8')
                file_handler.setFormatter(formatter)
                self.logger.addHandler(file_handler)

        for handler in self.logger.handlers:
            handler.setLevel(log_level)

        self.logger.debug(f"{config.App.NAME} logger started (level={logging.getLevelName(log_level)})")

    def log_error(self, message, exception=None):
        """Log an error with optional exception details"""
        if exception:
            self.logger.error(f"{message}: {str(exception)}", exc_info=True)
        else:
            self.logger.error(message)

    def log_warning(self, message):
        """Log a warning"""
        self.logger.warning(message)

    def log_info(self, message):
        """Log an info message"""
        self.logger.info(message)

    def log_debug(self, message):
        """Log a debug message"""
        self.logger.debug(message)

    def log_filter_report(self, report):
        """Log one refinement filter run"""
        self.logger.debug(
            f"Filter {report.name}: {report.points_in} -> {report.points_out} points "
            f"in {report.duration:.4f}s"
        )

    def log_match(self, result):
        """Log a pose hypothesis"""
        t = result.pose.translation
        self.logger.debug(
            f"Match model={result.model_id} score={result.score:.3f} "
            f"t=({t[0]:.2f}, {t[1]:.2f}, {t[2]:.2f}) duration={result.duration:.3f}s"
        )

    def log_stage(self, name, duration):
        """Log a pipeline stage completion"""
        self.logger.info(f"Stage '{name}' completed in {duration:.3f}s")

    def log_calibration(self, residual, sample_count):
        """Log a hand-eye calibration result"""
        self.logger.info(f"Hand-eye calibration: samples={sample_count}, residual={residual:.6f} mm")

    def log_library_check(self, library_name, available):
        """Log library availability check"""
        status = "AVAILABLE" if available else "MISSING"
        self.logger.debug(f"Library check: {library_name} = {status}")

    def log_export_success(self, format_type, filepath, row_count):
        """Log successful export"""
        self.logger.info(f"Export successful: Format={format_type}, File={filepath}, Rows={row_count}")

    def log_export_error(self, format_type, error, step="unknown"):
        """Log export error with detailed information"""
        self.logger.error(f"Export failed at step '{step}': Format={format_type}, Error={str(error)}", exc_info=True)


_error_logger = None


def get_error_logger():
    """Get the process-wide ErrorLogger, creating it on first use."""
    global _error_logger
    if _error_logger is None:
        _error_logger = ErrorLogger()
    return _error_logger


def log_error(message, exception=None):
    """Convenience function to log errors"""
    get_error_logger().log_error(message, exception)


def log_warning(message):
    """Convenience function to log warnings"""
    get_error_logger().log_warning(message)


def log_info(message):
    """Convenience function to log info"""
    get_error_logger().log_info(message)


def log_debug(message):
    """Convenience function to log debug"""
    get_error_logger().log_debug(message)


def log_filter_report(report):
    """Convenience function for filter reports"""
    get_error_logger().log_filter_report(report)


def log_match(result):
    """Convenience function for match results"""
    get_error_logger().log_match(result)


def log_stage(name, duration):
    """Convenience function for pipeline stages"""
    get_error_logger().log_stage(name, duration)


def log_calibration(residual, sample_count):
    """Convenience function for calibration results"""
    get_error_logger().log_calibration(residual, sample_count)


def log_library_check(library_name, available):
    """Convenience function for library checks"""
    get_error_logger().log_library_check(library_name, available)


def log_export_success(format_type, filepath, row_count):
    """Convenience function for export success"""
    get_error_logger().log_export_success(format_type, filepath, row_count)


def log_export_error(format_type, error, step="unknown"):
    """Convenience function for export errors"""
    get_error_logger().log_export_error(format_type, error, step)
