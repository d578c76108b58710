"""Core components for run bookkeeping: events, counters and fingerprints."""
from dataclasses import dataclass, field, is_dataclass, asdict
from datetime import datetime
from enum import Enum
from typing import Any, Dict
from collections import defaultdict
import asyncio
import hashlib
import json
import math

import numpy as np


@dataclass
class RunEvent:
    """One entry of a run's event log."""
    id: str
    timestamp: float
    level: str
    component: str
    action: str
    description: str
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def to_jsonable(data: Any) -> Any:
    """Convert numpy values, complex numbers, enums and dataclasses into plain JSON types."""
    if isinstance(data, dict):
        return {str(k): to_jsonable(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [to_jsonable(item) for item in data]
    if isinstance(data, np.ndarray):
        return to_jsonable(data.tolist())
    if isinstance(data, Enum):
        return data.value
    if is_dataclass(data) and not isinstance(data, type):
        return to_jsonable(asdict(data))
    if isinstance(data, (np.bool_, bool)):
        return bool(data)
    if isinstance(data, np.integer):
        return int(data)
    if isinstance(data, (complex, np.complexfloating)):
        return {"re": to_jsonable(data.real), "im": to_jsonable(data.imag)}
    if isinstance(data, (float, np.floating)):
        value = float(data)
        # JSON has no nan/inf
        return value if math.isfinite(value) else str(value)
    return data


def canonical_json(data: Any) -> str:
    return json.dumps(to_jsonable(data), sort_keys=True, separators=(",", ":"))


def config_fingerprint(data: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON form of a configuration."""
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class EventAggregator:
    """Collapses repeated events (same component, action and description)."""

    def __init__(self, max_repeats: int = 3):
        self.event_groups = defaultdict(int)
        self.max_repeats = max_repeats
        self.lock = asyncio.Lock()

    def _compute_hash(self, event: RunEvent) -> str:
        key_parts = [
            str(event.component),
            str(event.action),
            str(event.description)
        ]
        return hashlib.sha256("\x1f".join(key_parts).encode()).hexdigest()

    async def add_event(self, event: RunEvent) -> bool:
        """True while the event should still be shown."""
        event_hash = self._compute_hash(event)
        async with self.lock:
            self.event_groups[event_hash] += 1
            return self.event_groups[event_hash] <= self.max_repeats

    def suppressed(self) -> int:
        return sum(max(0, n - self.max_repeats) for n in self.event_groups.values())


class RunMetrics:
    """Counters per level and component, plus named timings."""
    def __init__(self):
        self.metrics = defaultdict(int)
        self.timings: Dict[str, float] = {}
        self.start_time = datetime.now()
        self._lock = asyncio.Lock()

    async def record_event(self, event: RunEvent):
        async with self._lock:
            self.metrics[f"level_{event.level}"] += 1
            self.metrics[f"component_{event.component}"] += 1
            self.metrics["total"] += 1

    async def record_timing(self, name: str, seconds: float):
        async with self._lock:
            self.timings[name] = self.timings.get(name, 0.0) + seconds

    def get_metrics(self) -> Dict:
        return {
            "uptime_seconds": (datetime.now() - self.start_time).total_seconds(),
            **self.metrics,
            **{f"time_{k}": v for k, v in self.timings.items()}
        }
