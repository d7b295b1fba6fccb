"""Timestamp helpers. All timestamps are ISO 8601 with an explicit UTC offset."""

from datetime import datetime, timezone
from typing import Optional


class DateUtils:
    """Static utility methods for timestamps"""

    # seconds precision keeps session files diff-friendly
    TIMESPEC = "seconds"

    @staticmethod
    def now_iso() -> str:
        """Current UTC time as an ISO 8601 string."""
        return datetime.now(timezone.utc).isoformat(timespec=DateUtils.TIMESPEC)

    @staticmethod
    def parse_iso(value: str) -> Optional[datetime]:
        """Parse an ISO 8601 string. Returns None if invalid; naive values are taken as UTC."""
        try:
            dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
        except (ValueError, TypeError, AttributeError):
            return None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt

    @staticmethod
    def is_valid_iso(value: str) -> bool:
        return DateUtils.parse_iso(value) is not None
