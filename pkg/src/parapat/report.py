"""Run reports: timings, speedup tables and a digest of the app-level results."""
from __future__ import annotations

import dataclasses
import hashlib
import json

import numpy as np

from .comm import codec

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "parapat run report",
    "type": "object",
    "required": ["app", "ranks", "backend", "seed", "wall_time", "elapsed", "results", "result_digest"],
    "properties": {
        "app": {"enum": ["parabola", "idealpoint", "dmc", "poisson", "sleep"]},
        "ranks": {"type": "integer", "minimum": 1},
        "backend": {"enum": ["threads", "sockets"]},
        "seed": {"type": "integer"},
        "wall_time": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "elapsed": {"type": "number", "minimum": 0},
        "counts": {
            "description": "tasks per rank (task farms) or walkers per rank per step (dmc)",
            "type": "array",
        },
        "speedup": {"type": ["number", "null"]},
        "efficiency": {"type": ["number", "null"]},
        "params": {"type": "object"},
        "results": {"type": "object"},
        "result_digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
    },
}

BENCH_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "parapat benchmark table",
    "type": "object",
    "required": ["app", "backend", "rows"],
    "properties": {
        "app": {"type": "string"},
        "backend": {"enum": ["threads", "sockets"]},
        "params": {"type": "object"},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["procs", "time", "speedup", "efficiency", "result_digest"],
                "properties": {
                    "procs": {"type": "integer", "minimum": 1},
                    "time": {"type": "number", "minimum": 0},
                    "speedup": {"type": "number"},
                    "efficiency": {"type": "number"},
                    "result_digest": {"type": "string"},
                },
            },
        },
    },
}

BENCH_CSV_HEADER = "procs,time,speedup,efficiency,result_digest"


def result_digest(results) -> str:
    """SHA-256 of the codec encoding; equal payloads give equal digests."""
    return hashlib.sha256(codec.encode(results)).hexdigest()


def speedup_efficiency(t1: float, tp: float, ranks: int) -> tuple[float, float]:
    if ranks < 1:
        raise ValueError("ranks must be positive")
    if not (t1 > 0 and tp > 0):
        raise ValueError(f"timings must be positive, got T1={t1}, TP={tp}")
    speedup = t1 / tp
    return speedup, speedup / ranks


def to_jsonable(obj):
    """Recursively convert numpy values, tuples and dataclasses to JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclasses.dataclass
class RunReport:
    app: str
    ranks: int
    backend: str
    seed: int
    wall_time: list[float]
    results: dict
    params: dict = dataclasses.field(default_factory=dict)
    counts: list | None = None
    speedup: float | None = None
    efficiency: float | None = None

    @property
    def elapsed(self) -> float:
        """``T_P``: the slowest rank's wall time."""
        return max(self.wall_time)

    @property
    def digest(self) -> str:
        return result_digest(self.results)

    def set_baseline(self, t1: float) -> None:
        self.speedup, self.efficiency = speedup_efficiency(t1, self.elapsed, self.ranks)

    def to_dict(self) -> dict:
        out = {
            "app": self.app,
            "ranks": self.ranks,
            "backend": self.backend,
            "seed": self.seed,
            "wall_time": list(self.wall_time),
            "elapsed": self.elapsed,
            "params": to_jsonable(self.params),
            "speedup": self.speedup,
            "efficiency": self.efficiency,
            "results": to_jsonable(self.results),
            "result_digest": self.digest,
        }
        if self.counts is not None:
            out["counts"] = to_jsonable(self.counts)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def bench_table(reports: list[RunReport]) -> list[dict]:
    """Speedup rows against the first (1-rank) report of the same invocation."""
    if not reports or reports[0].ranks != 1:
        raise ValueError("benchmark needs a 1-rank baseline first")
    t1 = reports[0].elapsed
    rows = []
    for rep in reports:
        rep.set_baseline(t1)
        rows.append({"procs": rep.ranks, "time": rep.elapsed, "speedup": rep.speedup,
                     "efficiency": rep.efficiency, "result_digest": rep.digest})
    return rows


def bench_csv(rows) -> str:
    lines = [BENCH_CSV_HEADER]
    lines += [f"{r['procs']},{r['time']:.6f},{r['speedup']:.6f},{r['efficiency']:.6f},{r['result_digest']}"
              for r in rows]
    return "\n".join(lines) + "\n"
