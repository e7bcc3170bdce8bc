"""Parameter sweep over (a, b): which parabolas a x^2 + b x + 5 dip below zero on [0, L]."""
from __future__ import annotations

import dataclasses

import numpy as np

from ..taskmap import ProblemHooks

C_FIXED = 5.0


@dataclasses.dataclass(frozen=True)
class ParabolaConfig:
    m: int = 100
    n: int = 50
    L: float = 10.0
    a_range: tuple[float, float] = (-1.0, 1.0)
    b_range: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise ValueError("m and n must be at least 2")
        if not self.L > 0:
            raise ValueError("L must be positive")


def parabola_func(x, a=0.0, b=0.0, c=1.0):
    return a * x**2 + b * x + c


def parabola_initialize(cfg: ParabolaConfig) -> list:
    """One ``((x,), {'a', 'b', 'c'})`` task per grid point, ``a`` outermost."""
    x = np.linspace(0.0, cfg.L, cfg.n)
    a_values = np.linspace(*cfg.a_range, cfg.m)
    b_values = np.linspace(*cfg.b_range, cfg.m)
    return [((x,), {"a": float(a), "b": float(b), "c": C_FIXED})
            for a in a_values for b in b_values]


def parabola_finalize(inputs, outputs) -> list[tuple[float, float]]:
    """(a, b) pairs whose sampled minimum is negative, in task order."""
    if len(inputs) != len(outputs):
        raise ValueError(f"{len(inputs)} inputs but {len(outputs)} outputs")
    return [(kw["a"], kw["b"]) for (_, kw), values in zip(inputs, outputs)
            if np.min(values) < 0]


class ParabolaProblem:
    """Bundles the hooks; the selected pairs end up in ``self.ab``."""

    def __init__(self, cfg: ParabolaConfig | None = None):
        self.cfg = cfg or ParabolaConfig()
        self.input_args: list = []
        self.outputs: list | None = None
        self.ab: list[tuple[float, float]] = []

    def initialize(self):
        self.input_args = parabola_initialize(self.cfg)
        return self.input_args

    def finalize(self, outputs):
        self.outputs = outputs
        self.ab = parabola_finalize(self.input_args, outputs)
        return self.ab

    def hooks(self) -> ProblemHooks:
        return ProblemHooks(self.initialize, parabola_func, self.finalize)


def write_ab_csv(path, pairs) -> None:
    with open(path, "w") as fh:
        fh.write("a,b\n")
        for a, b in pairs:
            fh.write(f"{a:.17g},{b:.17g}\n")
