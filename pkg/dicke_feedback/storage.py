# storage.py
"""Artifact storage for one run directory: CSV tables, JSON, SVG and the event log."""
import asyncio
import io
import json
from pathlib import Path
from typing import Any, AsyncGenerator, Dict, List, Mapping, Optional

import numpy as np

from .core import file_sha256, to_jsonable

EVENT_LOG = "events.log"
MANIFEST = "manifest.json"


def _format_meta(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(to_jsonable(value), sort_keys=True)


def table_text(columns: Mapping[str, Any], metadata: Optional[Mapping[str, Any]] = None) -> str:
    """CSV text with '# key: value' header lines, then '# columns: ...', values as %.17g.

    Complex columns are split into ``<name>_re`` and ``<name>_im``.
    """
    names: List[str] = []
    data: List[np.ndarray] = []
    for name, values in columns.items():
        arr = np.asarray(values)
        if np.iscomplexobj(arr):
            names += [f"{name}_re", f"{name}_im"]
            data += [arr.real.astype(float), arr.imag.astype(float)]
        else:
            names.append(name)
            data.append(arr.astype(float))
    lengths = {len(d) for d in data}
    if len(lengths) > 1:
        raise ValueError(f"columns have different lengths: {sorted(lengths)}")

    header = [f"{key}: {_format_meta(value)}" for key, value in (metadata or {}).items()]
    header.append("columns: " + ",".join(names))
    buf = io.StringIO()
    table = np.column_stack(data) if data else np.empty((0, 0))
    np.savetxt(buf, table, fmt="%.17g", delimiter=",", header="\n".join(header), comments="# ")
    return buf.getvalue()


def read_table(path) -> Dict[str, Any]:
    """Inverse of ``table_text``: returns {'metadata': {...}, 'columns': {name: array}}."""
    metadata: Dict[str, str] = {}
    names: List[str] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            if key == "columns":
                names = value.split(",")
            else:
                metadata[key] = value
    values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    cols = {name: values[:, i] for i, name in enumerate(names)} if values.size else {n: np.empty(0) for n in names}
    return {"metadata": metadata, "columns": cols}


class ArtifactStore:
    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.artifacts: List[Dict[str, str]] = []
        self._lock = asyncio.Lock()
        self.out_dir.mkdir(parents=True, exist_ok=True)

    @property
    def event_log(self) -> Path:
        return self.out_dir / EVENT_LOG

    def _register(self, path: Path, kind: str) -> Path:
        name = path.relative_to(self.out_dir).as_posix()
        self.artifacts = [a for a in self.artifacts if a["name"] != name]
        self.artifacts.append({"name": name, "kind": kind})
        return path

    async def write_table(self, name: str, columns: Mapping[str, Any],
                          metadata: Optional[Mapping[str, Any]] = None) -> Path:
        text = table_text(columns, metadata)
        path = self.out_dir / f"{name}.csv"
        async with self._lock:
            path.write_text(text, encoding="utf-8")
            return self._register(path, "csv")

    async def write_json(self, name: str, data: Any) -> Path:
        path = self.out_dir / f"{name}.json"
        text = json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n"
        async with self._lock:
            path.write_text(text, encoding="utf-8")
            return self._register(path, "json")

    async def write_svg(self, name: str, figure) -> Path:
        from .plotting import save_svg
        path = self.out_dir / f"{name}.svg"
        async with self._lock:
            save_svg(figure, path)
            return self._register(path, "svg")

    async def append_event(self, event: Dict[str, Any]) -> None:
        """Append one event as a JSON line."""
        line = json.dumps(to_jsonable(event)) + "\n"
        async with self._lock:
            with self.event_log.open("a", encoding="utf-8") as f:
                f.write(line)

    async def iter_events(self) -> AsyncGenerator[Dict, None]:
        if not self.event_log.exists():
            return
        with self.event_log.open("r", encoding="utf-8") as f:
            for line in f:
                try:
                    yield json.loads(line.strip())
                except json.JSONDecodeError:
                    continue

    def artifact_hashes(self) -> List[Dict[str, str]]:
        return [dict(a, sha256=file_sha256(self.out_dir / a["name"])) for a in self.artifacts]

    async def write_manifest(self, data: Dict[str, Any]) -> Path:
        """manifest.json: caller fields plus every artifact with its sha256."""
        async with self._lock:
            body = dict(data)
            body["artifacts"] = self.artifact_hashes()
            body["event_log"] = EVENT_LOG
            path = self.out_dir / MANIFEST
            path.write_text(json.dumps(to_jsonable(body), indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
            return path
