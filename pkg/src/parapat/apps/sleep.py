"""Synthetic task farm of fixed-duration sleeps, for scaling measurements."""
from __future__ import annotations

import time

from ..taskmap import ProblemHooks


def sleep_task(index: int, seconds: float) -> int:
    time.sleep(seconds)
    return index


def sleep_hooks(tasks: int = 1000, seconds: float = 0.01) -> ProblemHooks:
    return ProblemHooks(
        initialize=lambda: [((i, seconds), {}) for i in range(tasks)],
        task=sleep_task,
        finalize=lambda outputs: {"tasks": len(outputs), "checksum": sum(outputs)},
    )
