"""Run logger: colored console lines plus a JSON-lines event log per run."""
import itertools
import time
from typing import Any, Dict, Optional

from .core import EventAggregator, RunEvent, RunMetrics, to_jsonable
from .display import Color, DisplayConfig, Level
from .storage import ArtifactStore


class RunLogger:
    """Async event logger bound to one experiment run."""

    LEVELS = Level.get_all_levels()

    def __init__(self,
                 run_name: str,
                 store: Optional[ArtifactStore] = None,
                 min_level: str = Level.INFO,
                 quiet: bool = False,
                 display_config: Optional[DisplayConfig] = None,
                 max_repeats: int = 3):
        """
        Args:
            run_name: prefix of event ids
            store: where events.log is written; None keeps events in memory only
            min_level: events below this level are dropped
            quiet: no console output (the event log is still written)
            display_config: console formatting
            max_repeats: identical events shown on the console at most this often
        """
        if min_level not in self.LEVELS:
            raise ValueError(f"unknown level {min_level!r}")
        self.run_name = run_name
        self.store = store
        self.log_level = min_level
        self.quiet = quiet
        self.display_config = display_config or DisplayConfig(
            display_fields=["timestamp", "level", "component", "description"],
            colored_output=True,
            separator=" | "
        )
        self.aggregator = EventAggregator(max_repeats)
        self.metrics = RunMetrics()
        self._ids = itertools.count(1)

    def _should_log(self, level: str) -> bool:
        try:
            return self.LEVELS.index(level) >= self.LEVELS.index(self.log_level)
        except ValueError:
            return False

    def _display_console(self, event: Dict[str, Any]) -> None:
        try:
            print(self.display_config.format_event(event))
        except Exception as e:
            print(f"{Color.RED}[ERROR] Display error: {str(e)}{Color.RESET}")

    async def log(self, level: str, component: str, action: str, description: str,
                  metadata: Optional[Dict] = None) -> Optional[str]:
        if level not in self.LEVELS or not self._should_log(level):
            return None

        event = RunEvent(
            id=f"{self.run_name}-{next(self._ids):05d}",
            timestamp=time.time(),
            level=level,
            component=str(component),
            action=str(action),
            description=str(description),
            metadata=to_jsonable(metadata or {}),
        )
        data = event.to_dict()

        show = await self.aggregator.add_event(event)
        if show and not self.quiet:
            self._display_console(data)
        if self.store is not None:
            await self.store.append_event(data)
        await self.metrics.record_event(event)
        return event.id

    async def debug(self, component: str, action: str, description: str, **metadata):
        return await self.log(Level.DEBUG, component, action, description, metadata)

    async def info(self, component: str, action: str, description: str, **metadata):
        return await self.log(Level.INFO, component, action, description, metadata)

    async def warn(self, component: str, action: str, description: str, **metadata):
        return await self.log(Level.WARN, component, action, description, metadata)

    async def error(self, component: str, action: str, description: str, **metadata):
        return await self.log(Level.ERROR, component, action, description, metadata)

    async def fatal(self, component: str, action: str, description: str, **metadata):
        return await self.log(Level.FATAL, component, action, description, metadata)

    async def close(self) -> Dict[str, Any]:
        """Summary counters; repeated events hidden from the console are reported here."""
        suppressed = self.aggregator.suppressed()
        if suppressed and not self.quiet:
            print(f"{Color.DIM}{suppressed} repeated event(s) not shown{Color.RESET}")
        return self.metrics.get_metrics()
