"""
Console rendering of run events and result tables, with optional ANSI colors.
"""
from typing import Any, Dict, List, Optional, Sequence
from datetime import datetime
import re


class Color:
    """ANSI codes for terminal text."""

    RED = "\033[31m"
    GREEN = "\033[32m"
    YELLOW = "\033[33m"
    BLUE = "\033[34m"
    MAGENTA = "\033[35m"
    CYAN = "\033[36m"
    WHITE = "\033[37m"

    BRIGHT_BLACK = "\033[90m"
    BRIGHT_RED = "\033[91m"
    BRIGHT_WHITE = "\033[97m"

    BOLD = "\033[1m"
    DIM = "\033[2m"

    RESET = "\033[0m"

    @classmethod
    def strip_color(cls, text: str) -> str:
        """Remove every color code from a string."""
        return re.sub(r'\033\[[0-9;]*m', '', text)

    @classmethod
    def get_length(cls, text: str) -> int:
        """Visible length of a string (without color codes)."""
        return len(cls.strip_color(text))


class Level:
    """Event levels, lowest first."""
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARN = "WARN"
    ERROR = "ERROR"
    FATAL = "FATAL"

    @classmethod
    def get_all_levels(cls) -> List[str]:
        return [cls.DEBUG, cls.INFO, cls.WARN, cls.ERROR, cls.FATAL]


class DisplayTheme:
    """Colors per level and per field, and table border characters."""

    def __init__(self, colored_output: bool = True):
        self.colored_output = colored_output

        self.level_colors = {
            Level.DEBUG: Color.BLUE,
            Level.INFO: Color.GREEN,
            Level.WARN: Color.YELLOW,
            Level.ERROR: Color.RED,
            Level.FATAL: Color.BRIGHT_RED + Color.BOLD
        }

        self.field_colors = {
            "timestamp": Color.BRIGHT_BLACK,
            "component": Color.MAGENTA,
            "action": Color.CYAN,
            "description": Color.BRIGHT_WHITE,
        }

        self.table_chars = {
            "top_left": "┌",
            "top_right": "┐",
            "bottom_left": "└",
            "bottom_right": "┘",
            "horizontal": "─",
            "vertical": "│",
            "cross": "┼",
            "top_t": "┬",
            "bottom_t": "┴",
            "left_t": "├",
            "right_t": "┤"
        }

    def colorize(self, text: str, color: str) -> str:
        if self.colored_output:
            return f"{color}{text}{Color.RESET}"
        return text

    def get_level_color(self, level: str) -> str:
        return self.level_colors.get(level, Color.WHITE)

    def get_field_color(self, field: str) -> str:
        return self.field_colors.get(field, Color.WHITE)


class DisplayFormat:
    """Which event fields are shown and how."""

    def __init__(self,
                display_fields: Optional[List[str]] = None,
                timestamp_format: str = "%H:%M:%S",
                separator: str = " | ",
                float_format: str = "{:.6g}"):
        """
        Args:
            display_fields: event fields to show, in order
            timestamp_format: strftime format for timestamps
            separator: text between fields
            float_format: format applied to floats in tables and metadata
        """
        self.display_fields = display_fields or ["timestamp", "level", "component", "description"]
        self.timestamp_format = timestamp_format
        self.separator = separator
        self.float_format = float_format

    def format_field(self, field: str, value: Any) -> str:
        if field == "timestamp" and isinstance(value, (int, float)):
            return datetime.fromtimestamp(value).strftime(self.timestamp_format)
        return self.format_value(value)

    def format_value(self, value: Any) -> str:
        if isinstance(value, float):
            return self.float_format.format(value)
        return str(value)


class DisplayConfig:
    """Complete console display settings."""

    def __init__(self,
                display_fields: Optional[List[str]] = None,
                timestamp_format: str = "%H:%M:%S",
                colored_output: bool = True,
                separator: str = " | ",
                show_metadata: bool = True):
        self.format = DisplayFormat(
            display_fields=display_fields,
            timestamp_format=timestamp_format,
            separator=separator,
        )
        self.theme = DisplayTheme(colored_output=colored_output)
        self.show_metadata = show_metadata

    def format_metadata(self, metadata: Dict[str, Any]) -> str:
        if not metadata:
            return ""
        parts = []
        for key, value in metadata.items():
            text = self.format.format_value(value)
            if self.theme.colored_output:
                parts.append(f"{Color.DIM}{key}={Color.RESET}{text}")
            else:
                parts.append(f"{key}={text}")
        return "(" + ", ".join(parts) + ")"

    def format_event(self, event: Dict[str, Any]) -> str:
        """One line per event."""
        parts = []
        for field in self.format.display_fields:
            if field not in event:
                continue
            value = self.format.format_field(field, event[field])
            if field == "level":
                value = self.theme.colorize(f"[{value}]", self.theme.get_level_color(event[field]))
            elif field == "timestamp":
                value = self.theme.colorize(f"[{value}]", self.theme.get_field_color("timestamp"))
            else:
                value = self.theme.colorize(value, self.theme.get_field_color(field))
            parts.append(value)
        line = self.format.separator.join(parts)
        if self.show_metadata and event.get("metadata"):
            line = f"{line} {self.format_metadata(event['metadata'])}"
        return line

    def format_table(self, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
        """Box-drawn table of dict rows."""
        if not rows:
            return "No rows."
        columns = columns or list(rows[0].keys())

        cells = [[self.format.format_value(row.get(c, "")) for c in columns] for row in rows]
        widths = {c: len(c) for c in columns}
        for line in cells:
            for c, text in zip(columns, line):
                widths[c] = max(widths[c], Color.get_length(text))

        tc = self.theme.table_chars

        def border(left: str, mid: str, right: str) -> str:
            return (f"{left}{tc['horizontal']}"
                    + f"{tc['horizontal']}{mid}{tc['horizontal']}".join(
                        tc['horizontal'] * widths[c] for c in columns)
                    + f"{tc['horizontal']}{right}")

        def row_line(texts: List[str]) -> str:
            return f"{tc['vertical']} " + f" {tc['vertical']} ".join(texts) + f" {tc['vertical']}"

        header = row_line([self.theme.colorize(f"{c:{widths[c]}}", Color.BOLD) for c in columns])
        body = [row_line([f"{text:{widths[c]}}" for c, text in zip(columns, line)]) for line in cells]
        return "\n".join([
            border(tc['top_left'], tc['top_t'], tc['top_right']),
            header,
            border(tc['left_t'], tc['cross'], tc['right_t']),
            *body,
            border(tc['bottom_left'], tc['bottom_t'], tc['bottom_right']),
        ])
